"""
Winding number of the Kitaev chain.

Tight-binding layer: the pseudo vector (Δ_k, ε_k) and its winding.
Many-body layer: real-time overlaps Re<γ_j^s(t)|γ_j'^a(t)> measured by a
direct statevector contraction or by an ancilla Hadamard test, turned into
the zero-frequency Green function by a damped trapezoidal time integral,
Fourier transformed into Z_k and wound up.
"""
import math
from typing import Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from kitaevqc.evolve import ExactPropagator, StepPropagator, TrotterPropagator, evolve, plan_gates, step_count, \
    trotter_plan
from kitaevqc.hamiltonian import fermion_parity_diagonal, majorana_string
from kitaevqc.models import (Boundary, CouplingSet, GreenConfig, IllDefinedWindingException,
                             InconsistentWindingException, InvalidArgumentException, MajoranaMode, OverlapBackend,
                             PropagatorKind, TbDispersion, WindingResult, ZkSeries)
from kitaevqc.qsim import (Circuit, Gate, PauliString, StateVector, apply_batch, controlled_pauli_gates,
                           controlled_pauli_string, hadamard, init_basis, marginal_probability, pauli_kernel)

GAP_TOLERANCE = 1e-12
MIN_ZK = 1e-9
WINDING_TOLERANCE = 0.1
DEFAULT_K_RESOLUTION = 1024

GroundPreparation = Union[Circuit, StateVector]


def momentum_grid(n_sites: int) -> np.ndarray:
    """
    k = 2πl/N for l = -N/2 .. N/2-1.
    """
    return 2 * np.pi * np.arange(-(n_sites // 2), n_sites - n_sites // 2) / n_sites


def tb_pseudo_vector(cs: CouplingSet, k: float) -> Tuple[float, float]:
    """
    (ε_k, Δ_k) = (-t cos k - μ/2, -Δ sin k); V is ignored.
    """
    return -cs.t * math.cos(k) - cs.mu / 2, -cs.delta * math.sin(k)


def tb_angle(cs: CouplingSet, k: float) -> float:
    """
    Polar angle of the pseudo vector in the (Δ_k, ε_k) plane.
    """
    epsilon, delta = tb_pseudo_vector(cs, k)
    return math.atan2(epsilon, delta)


def tb_dispersion(cs: CouplingSet, momenta: np.ndarray) -> TbDispersion:
    momenta = np.asarray(momenta, dtype=float)
    epsilon = -cs.t * np.cos(momenta) - cs.mu / 2
    delta = -cs.delta * np.sin(momenta)
    return TbDispersion(momenta=momenta, epsilon=epsilon, delta=delta, phi=np.arctan2(epsilon, delta),
                        xi=np.hypot(epsilon, delta))


def _cyclic_increments(angles: np.ndarray) -> np.ndarray:
    return np.angle(np.exp(1j * (np.roll(angles, -1) - angles)))


def tb_winding(cs: CouplingSet, k_resolution: int = DEFAULT_K_RESOLUTION) -> int:
    """
    Winding of (Δ_k, ε_k) around the origin over the Brillouin zone.

    Raises IllDefinedWindingException at gapless points.
    """
    gap_closes = (cs.delta == 0 and abs(cs.mu / 2) <= abs(cs.t)) or math.isclose(abs(cs.mu / 2), abs(cs.t))
    table = tb_dispersion(cs, 2 * np.pi * np.arange(k_resolution) / k_resolution - np.pi)
    min_gap = float(np.min(table.xi ** 2))
    if gap_closes or min_gap <= GAP_TOLERANCE:
        raise IllDefinedWindingException(f"Pseudo vector vanishes (min ε²+Δ² = {min_gap:.3e}); gapless chain.",
                                         min_abs=math.sqrt(min_gap))
    return int(round(float(np.sum(_cyclic_increments(table.phi))) / (2 * np.pi)))


def tb_ground_energy(cs: CouplingSet, n_sites: int) -> float:
    """
    Periodic-chain ground energy -Σ_k ξ_k of the quadratic model, the lower
    of the two parity sectors.
    """
    return -float(np.sum(tb_dispersion(cs, momentum_grid(n_sites)).xi))


def zk_series(g: np.ndarray, n_sites: int) -> ZkSeries:
    """
    Z_k = (1/2N) Σ_{j,j'} e^{-i(j-j')k} g_{jj'}.
    """
    g = np.asarray(g, dtype=float)
    if g.shape != (n_sites, n_sites):
        raise InvalidArgumentException(f"Green matrix must be {n_sites}×{n_sites}, got {g.shape}.")
    momenta = momentum_grid(n_sites)
    sites = np.arange(1, n_sites + 1)
    phases = np.exp(-1j * np.outer(momenta, sites))
    values = np.einsum('kj,jl,kl->k', phases, g, phases.conj()) / (2 * n_sites)
    return ZkSeries(momenta=momenta, values=values)


def winding(zk: ZkSeries) -> WindingResult:
    """
    N_w = (1/2π) Σ_k Im log(Z_{k+Δk} Z_k*) with cyclic wrap, principal branch.
    """
    magnitudes = np.abs(zk.values)
    min_abs = float(np.min(magnitudes))
    increments = np.angle(np.roll(zk.values, -1) * np.conj(zk.values))
    if min_abs < MIN_ZK:
        raise IllDefinedWindingException(f"|Z_k| drops to {min_abs:.3e}; the winding number is ill-defined.",
                                         increments=increments, min_abs=min_abs)
    raw = float(np.sum(increments)) / (2 * np.pi)
    rounded = int(round(raw))
    if abs(raw - rounded) > WINDING_TOLERANCE:
        raise InconsistentWindingException(f"Accumulated angle {raw:.4f}·2π is not an integer winding.",
                                           increments=increments)
    return WindingResult(winding=rounded, raw=raw, increments=increments, min_abs=min_abs)


def ground_state(gs_prep: GroundPreparation, n_sites: int) -> StateVector:
    if isinstance(gs_prep, Circuit):
        state = gs_prep.run(init_basis(gs_prep.n_qubits, '0' * gs_prep.n_qubits))
    else:
        state = gs_prep.copy()
    if state.n_qubits != n_sites:
        raise InvalidArgumentException(f"Ground state has {state.n_qubits} qubits, the chain {n_sites} sites.")
    return state


def state_parity(state: StateVector) -> int:
    value = float(np.dot(state.probabilities(), fermion_parity_diagonal(state.n_qubits)))
    if abs(abs(value) - 1.0) > 1e-6:
        raise InvalidArgumentException(f"Ground state is not a parity eigenstate (<P> = {value:.6f}).")
    return 1 if value > 0 else -1


def _wrap_sign(boundary: Boundary, parity: int) -> float:
    # fermion chains close with -P·(Jx, Jy) on the wrap bond of the spin chain
    return float(-parity) if boundary == Boundary.PERIODIC else 1.0


def _extend(pauli: PauliString) -> PauliString:
    return PauliString(pauli.coefficient, pauli.letters + 'I')


def _hadamard_prefix(n_sites: int, right: PauliString) -> List[Gate]:
    ancilla = n_sites
    return [hadamard(ancilla)] + controlled_pauli_gates(_extend(right), ancilla, control_state=0)


def _with_ancilla(state: StateVector) -> StateVector:
    return StateVector(np.concatenate([state.amplitudes, np.zeros_like(state.amplitudes)]))


def _ancilla_x(psi: np.ndarray) -> np.ndarray:
    half = psi.shape[-1] // 2
    return 2.0 * np.real(np.sum(psi[..., :half].conj() * psi[..., half:], axis=-1))


def _sampled(expectation: np.ndarray, shots: int, rng: np.random.Generator) -> np.ndarray:
    p0 = np.clip((1.0 + expectation) / 2.0, 0.0, 1.0)
    return 2.0 * rng.binomial(shots, p0) / shots - 1.0


def overlap_re(gs_prep: GroundPreparation, cs: CouplingSet, j: int, j_prime: int, t: float, dt: float = 0.01,
               backend: OverlapBackend = OverlapBackend.DIRECT, boundary: Boundary = Boundary.OPEN,
               shots: Optional[int] = None, seed: int = 0) -> float:
    """
    Re<γ_j^s(t)|γ_j'^a(t)> with |γ(t)> = e^{-iHt}γ|gs>.

    Parameters
    -------
    gs_prep : Circuit or StateVector
        Preparation of the (parity eigenstate) ground state.
    cs : CouplingSet
    j, j_prime : int
        Sites of γ^s and γ^a, 1-indexed.
    t, dt : float
        Time and Trotter step; t must be a whole number of steps.
    backend : OverlapBackend
        Direct contraction, or the ancilla Hadamard test built from
        elementary controlled gates.
    shots : int, optional
        Hadamard test only; estimate <X_a> from this many measurements.

    Returns
    -------
    overlap : float
    """
    ground = ground_state(gs_prep, gs_prep.n_qubits)
    n = ground.n_qubits
    gamma_s = majorana_string(j, MajoranaMode.S, n)
    gamma_a = majorana_string(j_prime, MajoranaMode.A, n)
    parity = state_parity(ground) if boundary == Boundary.PERIODIC else 1
    if backend == OverlapBackend.DIRECT:
        u = evolve(ground, cs, t, dt, boundary, _wrap_sign(boundary, parity))
        v = evolve(StateVector(pauli_kernel(ground.amplitudes, gamma_a)), cs, t, dt, boundary,
                   _wrap_sign(boundary, -parity))
        return float(np.real(np.vdot(u.amplitudes, pauli_kernel(v.amplitudes, gamma_s))))
    steps = step_count(t, dt)
    plan = trotter_plan(cs, dt, boundary, _wrap_sign(boundary, parity))
    circuit = Circuit(n + 1, _hadamard_prefix(n, gamma_a))
    branch = n if boundary == Boundary.PERIODIC else None
    for _ in range(steps):
        circuit.extend(plan_gates(plan, n, branch))
    circuit.extend(controlled_pauli_gates(_extend(gamma_s), n, control_state=1))
    state = circuit.run(_with_ancilla(ground))
    if shots is None:
        return float(_ancilla_x(state.amplitudes))
    state = Circuit(n + 1, [hadamard(n)]).run(state)
    p0 = marginal_probability(state, n, 0)
    k = np.random.default_rng(seed).binomial(shots, min(max(p0, 0.0), 1.0))
    return 2.0 * k / shots - 1.0


def _propagator(cs: CouplingSet, n_sites: int, config: GreenConfig, boundary: Boundary, wrap_sign: float,
                n_qubits: Optional[int] = None, branch: Optional[int] = None) -> StepPropagator:
    if config.propagator == PropagatorKind.EXACT:
        return ExactPropagator(cs, n_sites, config.dt, boundary)
    return TrotterPropagator(trotter_plan(cs, config.dt, boundary, wrap_sign), n_sites, n_qubits, branch)


def _left_operators(n_sites: int, left: Optional[PauliString]) -> List[PauliString]:
    return [left if left is not None else majorana_string(j, MajoranaMode.S, n_sites) for j in range(1, n_sites + 1)]


def _direct_overlaps(ground: StateVector, cs: CouplingSet, config: GreenConfig, boundary: Boundary,
                     lefts: Sequence[PauliString], right_sites: Sequence[int]) -> Iterator[np.ndarray]:
    n = ground.n_qubits
    parity = state_parity(ground) if boundary == Boundary.PERIODIC else 1
    rights = np.stack([pauli_kernel(ground.amplitudes, majorana_string(j, MajoranaMode.A, n)) for j in right_sites])
    block = np.ascontiguousarray(np.vstack([ground.amplitudes[None, :], rights]))
    twisted = boundary == Boundary.PERIODIC and config.propagator == PropagatorKind.TROTTER
    u_propagator = _propagator(cs, n, config, boundary, _wrap_sign(boundary, parity))
    v_propagator = _propagator(cs, n, config, boundary, _wrap_sign(boundary, -parity)) if twisted else None
    for m in range(config.n_steps + 1):
        if m:
            if v_propagator is None:
                u_propagator.step(block)
            else:
                u_propagator.step(block[:1])
                v_propagator.step(block[1:])
        u = block[0]
        bras = np.stack([pauli_kernel(u, op) for op in lefts])
        yield np.real(bras.conj() @ block[1:].T)


def _hadamard_overlaps(ground: StateVector, cs: CouplingSet, config: GreenConfig, boundary: Boundary,
                       lefts: Sequence[PauliString], right_sites: Sequence[int],
                       rng: np.random.Generator) -> Iterator[np.ndarray]:
    n = ground.n_qubits
    parity = state_parity(ground) if boundary == Boundary.PERIODIC else 1
    controlled_lefts = [_extend(op) for op in lefts]
    start = _with_ancilla(ground).amplitudes
    block = np.empty((len(right_sites), start.size), dtype=np.complex128)
    for row, j_prime in enumerate(right_sites):
        block[row] = start
        Circuit(n + 1, _hadamard_prefix(n, majorana_string(j_prime, MajoranaMode.A, n))).apply_batch(
            block[row:row + 1])
    branch = n if boundary == Boundary.PERIODIC else None
    propagator = _propagator(cs, n, config, boundary, _wrap_sign(boundary, parity), n + 1, branch)
    for m in range(config.n_steps + 1):
        if m:
            propagator.step(block)
        overlaps = np.empty((len(controlled_lefts), len(right_sites)))
        for j, op in enumerate(controlled_lefts):
            branches = block.copy()
            apply_batch(branches, controlled_pauli_string(op, n, control_state=1))
            overlaps[j] = _ancilla_x(branches)
        if config.shots is not None:
            overlaps = _sampled(overlaps, config.shots, rng)
        yield overlaps


def trapezoid_weights(config: GreenConfig) -> np.ndarray:
    """
    Trapezoidal weights times e^{-δt} on t = 0, dt, ..., T.
    """
    times = np.arange(config.n_steps + 1) * config.dt
    weights = np.full(times.size, config.dt)
    weights[0] = weights[-1] = config.dt / 2
    return weights * np.exp(-config.delta * times)


def _integrate(ground: StateVector, cs: CouplingSet, config: GreenConfig, boundary: Boundary,
               lefts: Sequence[PauliString], right_sites: Sequence[int]) -> np.ndarray:
    weights = trapezoid_weights(config)
    if config.backend == OverlapBackend.DIRECT:
        series = _direct_overlaps(ground, cs, config, boundary, lefts, right_sites)
    else:
        series = _hadamard_overlaps(ground, cs, config, boundary, lefts, right_sites,
                                    np.random.default_rng(config.seed))
    g = np.zeros((len(lefts), len(right_sites)))
    for weight, overlaps in zip(weights, series):
        g += weight * overlaps
    return -2.0 * g


def green_matrix(gs_prep: GroundPreparation, cs: CouplingSet, n_sites: int, config: GreenConfig,
                 boundary: Boundary = Boundary.OPEN, left: Optional[PauliString] = None) -> np.ndarray:
    """
    g_{jj'} = -2 ∫_0^T e^{-δt} Re<γ_j^s(t)|γ_j'^a(t)> dt for all site pairs.

    The ground state and the N states γ_j'^a|gs> are evolved once, as one
    batch; overlaps are taken at every grid time. ``left`` replaces γ_j^s.
    """
    ground = ground_state(gs_prep, n_sites)
    return _integrate(ground, cs, config, boundary, _left_operators(n_sites, left), range(1, n_sites + 1))


def green_rs(gs_prep: GroundPreparation, cs: CouplingSet, j: int, j_prime: int, config: GreenConfig,
             boundary: Boundary = Boundary.OPEN, n_sites: Optional[int] = None) -> float:
    """
    One element g_{jj'}; evolves only |gs> and γ_j'^a|gs>.
    """
    n = n_sites if n_sites is not None else gs_prep.n_qubits
    for site in (j, j_prime):
        if not 1 <= site <= n:
            raise InvalidArgumentException(f"Site {site} outside 1..{n}.")
    ground = ground_state(gs_prep, n)
    g = _integrate(ground, cs, config, boundary, [majorana_string(j, MajoranaMode.S, n)], [j_prime])
    return float(g[0, 0])


def pipeline_winding(gs_prep: GroundPreparation, cs: CouplingSet, n_sites: int, config: GreenConfig,
                     boundary: Boundary = Boundary.OPEN) -> Tuple[ZkSeries, WindingResult]:
    zk = zk_series(green_matrix(gs_prep, cs, n_sites, config, boundary), n_sites)
    return zk, winding(zk)
