#!/usr/bin/env python
# -*- coding: utf-8 -*-
"""
kitaevqc simulates the quantum-circuit treatment of the interacting Kitaev
chain: VQE ground states in a fixed fermion parity, the winding number from
real-time Green functions, and the Majorana-zero-mode profile.

Every command writes its results into ``--out`` (default: current directory)
together with a ``<command>-manifest.json`` listing the outputs and their
SHA-256 digests:
    out
    |
    ├── vqe-even.json
    ├── vqe-even.angles
    ├── vqe-even-trials.csv
    └── vqe-manifest.json

Parameters can also come from a key-value file given to ``--config``;
explicit flags win over the file.

Usage
=====
::
    $ kitaevqc vqe --n 12 --jx 1 --jy 0.5 --layers 4 --parity even --trials 10 --seed 7
    $ kitaevqc winding --n 12 --jx 1 --jy 0.5 --hz 0.01 --delta 0.5 --delta 0.15 --gs vqe --angles vqe-even.angles
    $ kitaevqc mzm --n 12 --jx 1 --jy 0.5 --gs ed
    $ kitaevqc tb --n 12 --t 1 --delta-pair 0.5 --mu 0
    $ kitaevqc ed --n 12 --jx 1 --jy 0.5 --delta 0.15
    $ kitaevqc sweep --n 8 --jx 1 --jy 0.5 --axis hz --values 0,0.5,1,2 --layers 1,2,3
    $ kitaevqc report > RUNS.md
"""

import functools
import os
import sys
from typing import Any, Callable, Dict, List, Optional, TextIO, Tuple, TypeVar, cast

import click

from kitaevqc import __version__
from kitaevqc.core import KitaevRunner
from kitaevqc.models import (AnnealingSchedule, Boundary, ConfigException, CouplingSet, DegenerateGroundStateException,
                             FormatVersionException, GroundStateSource, IllDefinedWindingException,
                             InconsistentWindingException, InvalidArgumentException, OverlapBackend,
                             ResourceLimitException, TransferBackend, UnsupportedSizeException, VqeConfig,
                             parity_from_name)
from kitaevqc.storage import read_config

ROOTDIR = os.getcwd()
USAGE_EXIT = 2
ILL_DEFINED_EXIT = 3
COMMANDS = ('vqe', 'winding', 'mzm', 'tb', 'ed', 'sweep')
# config keys whose option name differs
CONFIG_TO_PARAM = {'n_sites': 'n', 'delta': 'delta_pair', 'delta_list': 'delta'}

F = TypeVar('F', bound=Callable[..., Any])


def parse_list(value: str) -> List[str]:
    """
    Splits '0.5, 0.15 0.05' into ['0.5', '0.15', '0.05'].
    """
    return value.replace(',', ' ').split()


def load_config(ctx: click.Context, param: click.Parameter, value: Optional[str]) -> Optional[str]:
    """
    Turns the ``--config`` file into the default map of every subcommand.
    """
    if value is None:
        return None
    try:
        config = read_config(value)
    except ConfigException as e:
        raise click.BadParameter(str(e), ctx=ctx, param=param)
    defaults: Dict[str, Any] = {}
    for key, raw in config.items():
        defaults[CONFIG_TO_PARAM.get(key, key)] = parse_list(raw) if key == 'delta_list' else raw
    ctx.default_map = {command: dict(defaults) for command in COMMANDS}
    return value


def handle_errors(f: F) -> F:
    """
    Maps library exceptions onto exit codes: bad input is a usage error,
    ill-defined results print a red error and exit with 3.
    """
    @functools.wraps(f)
    def wrapper(*args: Any, **kwargs: Any) -> Any:
        try:
            return f(*args, **kwargs)
        except (ConfigException, InvalidArgumentException, FormatVersionException) as e:
            raise click.UsageError(str(e))
        except (IllDefinedWindingException, InconsistentWindingException, DegenerateGroundStateException,
                UnsupportedSizeException, ResourceLimitException) as e:
            click.secho(f"Error: {e}", fg='red', err=True)
            sys.exit(ILL_DEFINED_EXIT)
    return cast(F, wrapper)


def chain_options(f: F) -> F:
    """
    Chain length, couplings (spin or fermion view), boundary and output directory.
    """
    options = [
        click.option('--n', 'n', type=int, required=True, help="Number of sites N."),
        click.option('--jx', type=float, default=None, help="XX exchange Jx."),
        click.option('--jy', type=float, default=None, help="YY exchange Jy."),
        click.option('--jz', type=float, default=None, help="ZZ exchange Jz."),
        click.option('--hz', type=float, default=None, help="Longitudinal field hz."),
        click.option('--t', 't', type=float, default=None, help="Hopping t."),
        click.option('--delta-pair', 'delta_pair', type=float, default=None, help="Pairing amplitude Δ."),
        click.option('--v', 'v', type=float, default=None, help="Nearest-neighbour interaction V."),
        click.option('--mu', type=float, default=None, help="Chemical potential μ."),
        click.option('--out', default=ROOTDIR, type=click.Path(file_okay=False),
                     help="Output directory. Default to current directory."),
        click.option('--boundary', type=click.Choice([x.value for x in Boundary]), default='open',
                     help="Open chain or ring."),
    ]
    for option in reversed(options):
        f = option(f)
    return f


def run_options(f: F) -> F:
    """
    Worker cap and random seed of the stochastic commands.
    """
    f = click.option('--seed', type=int, default=0, help="Random seed.")(f)
    return click.option('--threads', type=int, default=1, help="Worker cap.")(f)


def resolve_couplings(jx: Optional[float], jy: Optional[float], jz: Optional[float], hz: Optional[float],
                      t: Optional[float], delta_pair: Optional[float], v: Optional[float],
                      mu: Optional[float]) -> CouplingSet:
    """
    Builds the parameter point from whichever view was given; missing
    values of that view are zero.
    """
    spin = (jx, jy, jz, hz)
    fermion = (t, delta_pair, v, mu)
    given_spin = any(x is not None for x in spin)
    given_fermion = any(x is not None for x in fermion)
    if given_spin and given_fermion:
        raise click.UsageError("Give either --jx/--jy/--jz/--hz or --t/--delta-pair/--v/--mu, not both.")
    if not (given_spin or given_fermion):
        raise click.UsageError("No couplings given.")
    if given_spin:
        return CouplingSet.from_spin(*(x or 0.0 for x in spin))
    return CouplingSet.from_fermion(*(x or 0.0 for x in fermion))


def _couplings(kwargs: Dict[str, Any]) -> CouplingSet:
    return resolve_couplings(*(kwargs.pop(key) for key in ('jx', 'jy', 'jz', 'hz', 't', 'delta_pair', 'v', 'mu')))


def _parity(name: str) -> Optional[int]:
    return None if name == 'lowest' else parity_from_name(name)


@click.group()
@click.option('--config', default=None, type=click.Path(exists=True, dir_okay=False), callback=load_config,
              is_eager=True, expose_value=False, help="Key-value file with default parameters.")
@click.version_option(version=str(__version__.__version__))
@click.pass_context
def cli(ctx: click.Context) -> None:
    ctx.ensure_object(dict)


@cli.command('vqe', help="Variational ground state in one parity sector.")
@chain_options
@run_options
@click.option('--layers', type=int, default=4, help="Ansatz depth M.")
@click.option('--parity', type=click.Choice(['even', 'odd']), default='even')
@click.option('--trials', type=int, default=10, help="Random starts.")
@click.option('--tolerance', type=float, default=1e-8, help="Energy change that stops BFGS.")
@click.option('--max-iterations', type=int, default=2000)
@click.option('--anneal-steps', type=int, default=AnnealingSchedule.steps, help="Simulated-annealing steps.")
@handle_errors
def cli_vqe(n: int, out: str, boundary: str, threads: int, seed: int, layers: int, parity: str, trials: int,
            tolerance: float, max_iterations: int, anneal_steps: int, **kwargs: Any) -> None:
    cs = _couplings(kwargs)
    config = VqeConfig(layers=layers, trials=trials, tolerance=tolerance, max_iterations=max_iterations,
                       annealing=AnnealingSchedule(steps=anneal_steps), seed=seed)
    result = KitaevRunner(path=out).run_vqe(cs, n, config, parity_from_name(parity), threads, Boundary(boundary))
    click.echo(message=f"E_VQE = {result.energy:.10f} (trial {result.best_trial}, <P> = {result.parity_measured:+.6f})")
    if not result.converged:
        click.secho("Result flagged: VQE did not converge.", fg='yellow')


@cli.command('winding', help="Winding number from real-time Green functions.")
@chain_options
@run_options
@click.option('--delta', type=float, multiple=True, default=(0.15,), help="Damping factor δ; repeatable.")
@click.option('--tdelta', type=float, default=5.0, help="Cutoff T times δ.")
@click.option('--dt', type=float, default=0.01, help="Trotter step.")
@click.option('--gs', type=click.Choice([x.value for x in GroundStateSource]), default='ed',
              help="Ground state from a VQE angles file or exact diagonalization.")
@click.option('--angles', default=None, type=click.Path(exists=True, dir_okay=False), help="VQE angles file.")
@click.option('--backend', type=click.Choice([x.value for x in OverlapBackend]), default='direct')
@click.option('--shots', type=int, default=None, help="Sample the Hadamard test with this many shots.")
@click.option('--parity', type=click.Choice(['even', 'odd', 'lowest']), default='even')
@handle_errors
def cli_winding(n: int, out: str, boundary: str, threads: int, seed: int, delta: Tuple[float, ...], tdelta: float,
                dt: float, gs: str, angles: Optional[str], backend: str, shots: Optional[int], parity: str,
                **kwargs: Any) -> None:
    cs = _couplings(kwargs)
    results = KitaevRunner(path=out).run_winding(cs, n, delta, tdelta, dt, GroundStateSource(gs), angles,
                                                 OverlapBackend(backend), shots, Boundary(boundary), _parity(parity),
                                                 seed, threads)
    for result in results:
        click.echo(message=f"delta={result['delta']:g}: N_w = {result['winding']}")


@cli.command('mzm', help="Majorana-zero-mode transfer-amplitude profile.")
@chain_options
@run_options
@click.option('--gs', type=click.Choice([x.value for x in GroundStateSource]), default='ed')
@click.option('--layers', type=int, default=4, help="Ansatz depth M (VQE only).")
@click.option('--trials', type=int, default=10, help="Random starts (VQE only).")
@click.option('--backend', type=click.Choice([x.value for x in TransferBackend]), default='direct')
@handle_errors
def cli_mzm(n: int, out: str, boundary: str, threads: int, seed: int, gs: str, layers: int, trials: int,
            backend: str, **kwargs: Any) -> None:
    cs = _couplings(kwargs)
    config = VqeConfig(layers=layers, trials=trials, seed=seed) if gs == GroundStateSource.VQE.value else None
    result = KitaevRunner(path=out).run_mzm(cs, n, GroundStateSource(gs), config, TransferBackend(backend), threads,
                                            Boundary(boundary))
    for j, (s, a) in enumerate(zip(result.amplitude_s, result.amplitude_a), start=1):
        click.echo(message=f"{j:3d}  s={s:.6f}  a={a:.6f}")


@cli.command('tb', help="Tight-binding dispersion, winding and singular-value reference.")
@chain_options
@handle_errors
def cli_tb(n: int, out: str, boundary: str, **kwargs: Any) -> None:
    cs = _couplings(kwargs)
    summary = KitaevRunner(path=out).run_tb(cs, n, Boundary(boundary))
    click.echo(message=f"E_TB = {summary['ground_energy']:.10f}")


@cli.command('ed', help="Exact-diagonalization reference energies and winding.")
@chain_options
@click.option('--parity', type=click.Choice(['even', 'odd', 'lowest']), default='even',
              help="Sector of the ground state used for the winding.")
@click.option('--delta', type=float, multiple=True, help="Damping factor δ for the exact winding; repeatable.")
@click.option('--levels', type=int, default=4, help="Levels reported per parity sector.")
@handle_errors
def cli_ed(n: int, out: str, boundary: str, parity: str, delta: Tuple[float, ...], levels: int,
           **kwargs: Any) -> None:
    cs = _couplings(kwargs)
    summary = KitaevRunner(path=out).run_ed(cs, n, Boundary(boundary), delta, _parity(parity), levels)
    click.echo(message=f"E_even = {summary['energies']['even'][0]:.10f}")
    click.echo(message=f"E_odd  = {summary['energies']['odd'][0]:.10f}")
    for item in summary['windings']:
        click.echo(message=f"delta={item['delta']:g}: N_w = {item['winding']}")


@cli.command('sweep', help="VQE accuracy against exact diagonalization along one coupling.")
@chain_options
@run_options
@click.option('--axis', type=click.Choice(['jy', 'jz', 'hz']), required=True, help="Coupling that is varied.")
@click.option('--values', required=True, help="Values of the swept coupling, e.g. '0,0.5,1'.")
@click.option('--layers', default='1,2,3,4', help="Ansatz depths, e.g. '1,2,3'.")
@click.option('--parity', type=click.Choice(['even', 'odd']), default='even')
@click.option('--trials', type=int, default=10, help="Random starts per point.")
@click.option('--anneal-steps', type=int, default=AnnealingSchedule.steps, help="Simulated-annealing steps.")
@handle_errors
def cli_sweep(n: int, out: str, boundary: str, threads: int, seed: int, axis: str, values: str, layers: str,
              parity: str, trials: int, anneal_steps: int, **kwargs: Any) -> None:
    cs = _couplings(kwargs)
    try:
        points = [float(x) for x in parse_list(values)]
        depths = [int(x) for x in parse_list(str(layers))]
    except ValueError as e:
        raise click.BadParameter(str(e))
    config = VqeConfig(layers=depths[0] if depths else 1, trials=trials,
                       annealing=AnnealingSchedule(steps=anneal_steps), seed=seed)
    rows = KitaevRunner(path=out).run_sweep(cs, n, axis, points, depths, config, parity_from_name(parity), threads,
                                            Boundary(boundary))
    for row in rows:
        click.echo(message=f"{axis}={row['value']:g}  M={row['layers']}  E_VQE={row['energy_vqe']:.10f}  "
                           f"E_ED={row['energy_ed']:.10f}")


@cli.command('report', help="Print a report of the runs in a directory.")
@click.option('--out', default=ROOTDIR, type=click.Path(exists=True, file_okay=False), help="Results directory.")
@click.option('--template', default=None, help="Path to a custom report template.", type=click.File('r'))
def cli_report(out: str, template: Optional[TextIO]) -> None:
    runner = KitaevRunner(path=out)
    if template:
        report = runner.generate_report(template=template.read())
    else:
        report = runner.generate_report()
    click.echo(message=report, nl=False)
