import os
import time
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import replace
from datetime import datetime, timezone
from typing import Any, Dict, Iterator, List, Optional, Sequence, Tuple

import click
from jinja2 import Template

from kitaevqc import __version__
from kitaevqc.ed import FULL_SPECTRUM_LIMIT, diagonalize, exact_winding, ground_in_parity
from kitaevqc.models import (EVEN, ODD, Boundary, CouplingSet, GreenConfig, GroundStateSource,
                             IllDefinedWindingException, InvalidArgumentException, KitaevQCException, MzmProfile,
                             OverlapBackend, ResourceLimitException, RunManifest, TransferBackend, TrialOutcome,
                             VqeConfig, VqeResult, WindingResult, ZkSeries, parity_name, warn)
from kitaevqc.mzm import ed_profile, profile, tb_spectrum, tb_svd
from kitaevqc.storage import FileSystemResultStorage, NpzEigenCache, read_angles
from kitaevqc.topo import (GroundPreparation, momentum_grid, pipeline_winding, tb_dispersion, tb_ground_energy,
                           tb_winding)
from kitaevqc.vqe import build_ansatz, optimize

ROOTDIR = os.getcwd()
CACHE_DIR = '.eigencache'
SWEEP_AXES = ('jy', 'jz', 'hz')
DEFAULT_TEMPLATE = """# kitaevqc runs
{% for run in manifests %}

## {{ run.command }}

- started: {{ run.started_at.isoformat(timespec="seconds") }}
- version: {{ run.version }}
- elapsed: {{ '%.2f' % run.elapsed_seconds }} s
{% for name in run.outputs | sort %}
- {{ name }}: {{ run.outputs[name] }}
{% endfor %}
{% endfor %}
"""


def _delta_tag(delta: float) -> str:
    return f"{delta:g}"


class KitaevRunner:
    """
    Runs one workflow per method and writes its results, plus a manifest
    naming every output with its digest, into the output directory.
    """

    def __init__(self, path: str = ROOTDIR):
        self.path = path
        self.fs = FileSystemResultStorage(path=path)
        self._cache: Optional[NpzEigenCache] = None

    @property
    def cache(self) -> NpzEigenCache:
        """
        The on-disk eigen cache, created on first use.
        """
        if self._cache is None:
            self._cache = NpzEigenCache(os.path.join(self.path, CACHE_DIR))
        return self._cache

    @contextmanager
    def _run(self, command: str, config: Dict[str, Any]) -> Iterator[str]:
        started_at = datetime.now(timezone.utc)
        start = time.perf_counter()
        try:
            yield f"{command}-manifest.json"
        finally:
            self.fs.write_manifest(RunManifest(command=command, config=config, version=__version__.__version__,
                                               started_at=started_at, elapsed_seconds=time.perf_counter() - start,
                                               outputs=self.fs.outputs()))

    def _reference_energy(self, cs: CouplingSet, n_sites: int, parity: int) -> Optional[float]:
        if n_sites > FULL_SPECTRUM_LIMIT:
            return None
        return ground_in_parity(cs, n_sites, Boundary.OPEN, parity, self.cache)[0]

    @staticmethod
    def _check_open(boundary: Boundary, what: str) -> None:
        if boundary != Boundary.OPEN:
            raise InvalidArgumentException(f"{what} is defined on open chains only; use --boundary open.")

    def run_vqe(self, cs: CouplingSet, n_sites: int, config: VqeConfig, parity: int, threads: int = 1,
                boundary: Boundary = Boundary.OPEN) -> VqeResult:
        """
        Multi-start VQE in one parity sector.

        Writes ``vqe-<parity>-trials.csv``, ``vqe-<parity>.angles`` and
        ``vqe-<parity>.json``.

        Returns
        -------
        result : VqeResult
        """
        self._check_open(boundary, "The variational ansatz")
        settings = {'couplings': cs.to_dict(), 'n_sites': n_sites, 'boundary': boundary.value,
                    'parity': parity_name(parity), 'vqe': config, 'threads': threads}
        tag = parity_name(parity)

        def progress(outcome: TrialOutcome) -> None:
            click.echo(f"Trial {outcome.trial}: E = {outcome.energy:.10f} "
                       f"({outcome.iterations} iterations{'' if outcome.converged else ', not converged'})")

        with self._run('vqe', settings) as manifest:
            click.echo(f"Running VQE: N={n_sites}, M={config.layers}, {tag} parity, {config.trials} trials")
            result = optimize(cs, n_sites, config, parity, threads, progress)
            if not result.converged:
                warn("No VQE trial converged; the result is flagged.")
            self.fs.write_csv(f"vqe-{tag}-trials.csv", 'vqe-trials', manifest,
                              ['trial', 'energy', 'annealing_energy', 'iterations', 'converged'],
                              [(x.trial, x.energy, x.annealing_energy, x.iterations, int(x.converged))
                               for x in result.trials])
            angles_file = f"vqe-{tag}.angles"
            self.fs.write_angles(angles_file, result.angles, {'parity': tag, 'energy': repr(result.energy)})
            self.fs.write_json(f"vqe-{tag}.json", {
                'config': settings,
                'energy': result.energy,
                'reference_energy': self._reference_energy(cs, n_sites, parity),
                'best_trial': result.best_trial,
                'trial_energies': result.trial_energies,
                'parity_measured': result.parity_measured,
                'converged': result.converged,
                'angles_file': angles_file,
                'manifest': manifest,
            })
        return result

    def _ground_preparation(self, cs: CouplingSet, n_sites: int, boundary: Boundary, parity: Optional[int],
                            source: GroundStateSource, angles_path: Optional[str]) -> GroundPreparation:
        if source == GroundStateSource.ED:
            energy, state = ground_in_parity(cs, n_sites, boundary, parity, self.cache)
            click.echo(f"Exact ground state: E = {energy:.10f}")
            return state
        if angles_path is None:
            raise InvalidArgumentException("A VQE ground state needs an angles file (--angles).")
        if parity is None:
            raise InvalidArgumentException("A VQE ground state needs an explicit parity.")
        with open(angles_path) as f:
            angles, _ = read_angles(f)
        if angles.n_sites != n_sites:
            raise InvalidArgumentException(f"Angles are for N={angles.n_sites}, the chain has N={n_sites}.")
        return build_ansatz(n_sites, angles.layers, angles, parity)

    def run_winding(self, cs: CouplingSet, n_sites: int, deltas: Sequence[float], tdelta: float = 5.0,
                    dt: float = 0.01, source: GroundStateSource = GroundStateSource.ED,
                    angles_path: Optional[str] = None, backend: OverlapBackend = OverlapBackend.DIRECT,
                    shots: Optional[int] = None, boundary: Boundary = Boundary.OPEN, parity: Optional[int] = EVEN,
                    seed: int = 0, threads: int = 1) -> List[Dict[str, Any]]:
        """
        Circuit-pipeline winding number for every damping factor in ``deltas``.

        Damping factors are independent and run on up to ``threads``
        workers. Writes one ``zk-delta-<δ>.csv`` per damping factor and the
        consolidated ``winding.json``. At an ill-defined point the per-k
        phase increments go to ``winding-delta-<δ>-increments.csv`` before
        the exception propagates.
        """
        if not deltas:
            raise InvalidArgumentException("At least one damping factor is required.")
        settings = {'couplings': cs.to_dict(), 'n_sites': n_sites, 'deltas': list(deltas), 'tdelta': tdelta, 'dt': dt,
                    'gs': source.value, 'angles': angles_path, 'backend': backend.value, 'shots': shots,
                    'boundary': boundary.value, 'parity': parity_name(parity) if parity else 'lowest', 'seed': seed,
                    'threads': threads}
        results: List[Dict[str, Any]] = []
        with self._run('winding', settings) as manifest:
            gs_prep = self._ground_preparation(cs, n_sites, boundary, parity, source, angles_path)

            def compute(delta: float) -> Tuple[Optional[Tuple[ZkSeries, WindingResult]],
                                               Optional[IllDefinedWindingException]]:
                config = GreenConfig(delta=delta, tdelta=tdelta, dt=dt, backend=backend, shots=shots, seed=seed)
                click.echo(f"Winding at delta={delta:g}: {config.n_steps} steps of dt={dt:g}")
                try:
                    return pipeline_winding(gs_prep, cs, n_sites, config, boundary), None
                except IllDefinedWindingException as e:
                    return None, e

            with ThreadPoolExecutor(max_workers=max(1, threads)) as executor:
                outcomes = list(executor.map(compute, deltas))
            for delta, (computed, error) in zip(deltas, outcomes):
                if computed is None:
                    assert error is not None
                    if error.increments is not None:
                        self.fs.write_csv(f"winding-delta-{_delta_tag(delta)}-increments.csv", 'winding-increments',
                                          manifest, ['k', 'increment'], zip(momentum_grid(n_sites), error.increments))
                    raise error
                zk, result = computed
                self.fs.write_csv(f"zk-delta-{_delta_tag(delta)}.csv", 'zk', manifest, ['k', 're', 'im', 'abs'],
                                  [(k, z.real, z.imag, abs(z)) for k, z in zip(zk.momenta, zk.values)])
                results.append({'delta': delta, 'winding': result.winding, 'raw': result.raw,
                                'min_abs': result.min_abs,
                                'reference': self._reference_winding(cs, n_sites, delta, boundary, parity)})
                click.echo(f"N_w = {result.winding}")
            if len({x['winding'] for x in results}) > 1:
                warn("The winding number differs between damping factors.")
            self.fs.write_json('winding.json', {'config': settings, 'results': results, 'manifest': manifest})
        return results

    def _reference_winding(self, cs: CouplingSet, n_sites: int, delta: float, boundary: Boundary,
                           parity: Optional[int]) -> Optional[int]:
        if n_sites > FULL_SPECTRUM_LIMIT:
            return None
        try:
            return exact_winding(cs, n_sites, delta, boundary, parity, self.cache)
        except KitaevQCException as e:
            warn(f"No exact reference winding: {e}")
            return None

    def run_mzm(self, cs: CouplingSet, n_sites: int, source: GroundStateSource = GroundStateSource.ED,
                config: Optional[VqeConfig] = None, backend: TransferBackend = TransferBackend.DIRECT,
                threads: int = 1, boundary: Boundary = Boundary.OPEN) -> MzmProfile:
        """
        Transfer-amplitude profile of both Majorana modes; ``mzm.csv`` and ``mzm.json``.
        """
        if source == GroundStateSource.VQE:
            self._check_open(boundary, "The variational ansatz")
        settings = {'couplings': cs.to_dict(), 'n_sites': n_sites, 'boundary': boundary.value, 'gs': source.value,
                    'vqe': config, 'backend': backend.value, 'threads': threads}
        with self._run('mzm', settings) as manifest:
            if source == GroundStateSource.VQE:
                if config is None:
                    raise InvalidArgumentException("A VQE profile needs a VQE configuration.")
                result = profile(cs, n_sites, config, backend, threads)
            else:
                result = ed_profile(cs, n_sites, boundary)
            self.fs.write_csv('mzm.csv', 'mzm-profile', manifest, ['site', 'amplitude_s', 'amplitude_a'],
                              [(j + 1, s, a) for j, (s, a) in enumerate(zip(result.amplitude_s, result.amplitude_a))])
            self.fs.write_json('mzm.json', {
                'config': settings,
                'source': result.source,
                'energy_plus': result.energy_plus,
                'energy_minus': result.energy_minus,
                'converged': result.converged,
                'max_amplitude_s': float(result.amplitude_s.max()),
                'max_amplitude_a': float(result.amplitude_a.max()),
                'manifest': manifest,
            })
        return result

    def run_tb(self, cs: CouplingSet, n_sites: int, boundary: Boundary = Boundary.OPEN) -> Dict[str, Any]:
        """
        Tight-binding tables: dispersion and pseudo-vector angle on the
        N-point grid and the winding. Open chains add the singular values,
        the zero-mode columns and, for small N, the level list; the ground
        energy is -Σλ there and the momentum-space closed form on a ring.
        """
        settings = {'couplings': cs.to_dict(), 'n_sites': n_sites, 'boundary': boundary.value}
        with self._run('tb', settings) as manifest:
            table = tb_dispersion(cs, momentum_grid(n_sites))
            self.fs.write_csv('tb-dispersion.csv', 'tb-dispersion', manifest, ['k', 'epsilon', 'delta', 'phi', 'xi'],
                              zip(table.momenta, table.epsilon, table.delta, table.phi, table.xi))
            summary: Dict[str, Any] = {
                'config': settings,
                'ground_energy': tb_ground_energy(cs, n_sites),
                'singular_values': None,
                'winding': None,
                'manifest': manifest,
            }
            if boundary == Boundary.OPEN:
                ref = tb_svd(cs, n_sites)
                self.fs.write_csv('tb-svd.csv', 'tb-svd', manifest, ['site', 'lambda', 'u1', 'v1'],
                                  [(j + 1, ref.singular_values[j], ref.zero_mode_left[j], ref.zero_mode_right[j])
                                   for j in range(n_sites)])
                if n_sites <= FULL_SPECTRUM_LIMIT:
                    self.fs.write_csv('tb-spectrum.csv', 'tb-spectrum', manifest, ['level', 'energy'],
                                      enumerate(tb_spectrum(cs, n_sites)))
                summary['ground_energy'] = -float(ref.singular_values.sum())
                summary['singular_values'] = ref.singular_values
            try:
                summary['winding'] = tb_winding(cs)
                click.echo(f"N_w = {summary['winding']}")
            finally:
                self.fs.write_json('tb.json', summary)
        return summary

    def run_sweep(self, cs: CouplingSet, n_sites: int, axis: str, values: Sequence[float], layers: Sequence[int],
                  config: VqeConfig, parity: int = EVEN, threads: int = 1,
                  boundary: Boundary = Boundary.OPEN) -> List[Dict[str, Any]]:
        """
        VQE accuracy along one spin coupling: for every value of ``axis``
        (jy, jz or hz, the other couplings fixed at ``cs``) and every ansatz
        depth, the best VQE energy against the exact ground energy of the
        same parity sector.

        Writes ``sweep.csv`` and ``sweep.json``.

        Returns
        -------
        rows : list of dict
            One row per (value, layers) pair, in sweep order.
        """
        self._check_open(boundary, "The variational ansatz")
        if axis not in SWEEP_AXES:
            raise InvalidArgumentException(f"Sweep axis must be one of {', '.join(SWEEP_AXES)}, got {axis}.")
        if not values or not layers:
            raise InvalidArgumentException("A sweep needs at least one value and one layer count.")
        if n_sites > FULL_SPECTRUM_LIMIT:
            raise ResourceLimitException(
                f"N={n_sites} exceeds the exact-diagonalization limit of {FULL_SPECTRUM_LIMIT} needed by a sweep.")
        configs = [replace(config, layers=depth) for depth in layers]
        settings = {'couplings': cs.to_dict(), 'n_sites': n_sites, 'axis': axis, 'values': list(values),
                    'layers': list(layers), 'parity': parity_name(parity), 'vqe': config, 'threads': threads}
        rows: List[Dict[str, Any]] = []
        with self._run('sweep', settings) as manifest:
            for value in values:
                point = CouplingSet.from_spin(**{**cs.spin_view(), axis: value})
                exact = self._reference_energy(point, n_sites, parity)
                assert exact is not None
                for depth_config in configs:
                    depth = depth_config.layers
                    result = optimize(point, n_sites, depth_config, parity, threads)
                    rows.append({'value': value, 'layers': depth, 'energy_vqe': result.energy, 'energy_ed': exact,
                                 'difference': result.energy - exact, 'converged': result.converged})
                    click.echo(f"{axis}={value:g}, M={depth}: E_VQE - E_ED = {result.energy - exact:.3e}")
            self.fs.write_csv('sweep.csv', 'vqe-sweep', manifest,
                              ['value', 'layers', 'energy_vqe', 'energy_ed', 'difference', 'converged'],
                              [(x['value'], x['layers'], x['energy_vqe'], x['energy_ed'], x['difference'],
                                int(x['converged'])) for x in rows])
            self.fs.write_json('sweep.json', {
                'config': settings,
                'max_difference': {str(depth): max(x['difference'] for x in rows if x['layers'] == depth)
                                   for depth in layers},
                'converged': all(x['converged'] for x in rows),
                'manifest': manifest,
            })
        return rows

    def run_ed(self, cs: CouplingSet, n_sites: int, boundary: Boundary = Boundary.OPEN,
               deltas: Sequence[float] = (), parity: Optional[int] = EVEN, levels: int = 4) -> Dict[str, Any]:
        """
        Parity-resolved low-lying energies and the exact winding per damping factor.
        """
        settings = {'couplings': cs.to_dict(), 'n_sites': n_sites, 'boundary': boundary.value,
                    'deltas': list(deltas), 'parity': parity_name(parity) if parity else 'lowest', 'levels': levels}
        with self._run('ed', settings) as manifest:
            rows = []
            energies: Dict[str, List[float]] = {}
            for sector in (EVEN, ODD):
                solution = diagonalize(cs, n_sites, boundary, sector, cache=self.cache)
                energies[parity_name(sector)] = [float(x) for x in solution.energies[:levels]]
                rows.extend((parity_name(sector), i, e) for i, e in enumerate(solution.energies[:levels]))
            self.fs.write_csv('ed-levels.csv', 'ed-levels', manifest, ['parity', 'level', 'energy'], rows)
            windings = []
            for delta in deltas:
                windings.append({'delta': delta, 'winding': exact_winding(cs, n_sites, delta, boundary, parity,
                                                                         self.cache)})
            summary = {
                'config': settings,
                'energies': energies,
                'ground_energy': min(energies['even'][0], energies['odd'][0]),
                'windings': windings,
                'manifest': manifest,
            }
            if boundary == Boundary.PERIODIC:
                summary['tb_ground_energy'] = tb_ground_energy(cs, n_sites) if cs.v == 0 else None
            self.fs.write_json('ed.json', summary)
        return summary

    def generate_report(self, template: str = DEFAULT_TEMPLATE) -> str:
        """
        Renders every manifest in the output directory.

        Returns
        -------
        str
            Report text.
        """
        manifests: List[RunManifest] = self.fs.list_manifests()
        return Template(template, trim_blocks=True).render(manifests=manifests)
