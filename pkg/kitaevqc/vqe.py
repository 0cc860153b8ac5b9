"""
Parity-conserving variational ground-state search.

The ansatz starts from |0...0> (even parity for N ≡ 0 mod 4) or from
X_0|0...0> (odd parity) and applies M layers of parity-preserving gates:
U2 = U2a·U2b·U2c on odd bonds, then on even bonds, then U1 = R_z(2ϑ) on
every site.
"""
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
import scipy.optimize
import scipy.sparse

from kitaevqc.hamiltonian import bonds, fermion_parity_diagonal, hamiltonian_sparse
from kitaevqc.models import (EVEN, ODD, AnnealingSchedule, AnsatzAngles, Boundary, CouplingSet,
                             InvalidArgumentException, TrialOutcome, UnsupportedSizeException, VqeConfig, VqeResult,
                             check_parity, count_angles)
from kitaevqc.qsim import (Circuit, Gate, StateVector, init_basis, pauli_x, rotation, xx_minus_yy, xx_plus_yy,
                           zz)

GRADIENT_STEP = 1e-6


def bond_gates(q0: int, q1: int, theta_a: float, theta_b: float, theta_c: float) -> List[Gate]:
    """
    U2 = U2a·U2b·U2c; U2c is applied first.
    """
    return [zz(q0, q1, theta_c), xx_minus_yy(q0, q1, theta_b), xx_plus_yy(q0, q1, theta_a)]


def site_gate(q: int, vartheta: float) -> Gate:
    return rotation('z', q, 2 * vartheta)


def layer_gates(n_sites: int, bond_angles: Sequence[Tuple[float, float, float]], site_angles: Sequence[float],
                boundary: Boundary = Boundary.OPEN) -> List[Gate]:
    """
    One layer: odd bonds, even bonds, then on-site rotations.

    ``bond_angles[j-1]`` belongs to bond j; for periodic chains bond N is the
    wrap bond (N, 1) and falls into the even group.
    """
    pairs = bonds(n_sites, boundary)
    if len(bond_angles) != len(pairs) or len(site_angles) != n_sites:
        raise InvalidArgumentException("Layer angles do not match the chain geometry.")
    gates: List[Gate] = []
    for first in (1, 2):
        for j in range(first, len(pairs) + 1, 2):
            q0, q1 = pairs[j - 1]
            gates.extend(bond_gates(q0, q1, *bond_angles[j - 1]))
    for j, vartheta in enumerate(site_angles):
        gates.append(site_gate(j, vartheta))
    return gates


def _check_size(n_sites: int) -> None:
    if n_sites < 4 or n_sites % 4 != 0:
        raise UnsupportedSizeException(
            f"The parity-conserving ansatz needs N ≡ 0 (mod 4), got N={n_sites}.")


def build_ansatz(n_sites: int, layers: int, angles: AnsatzAngles, parity: int) -> Circuit:
    _check_size(n_sites)
    check_parity(parity)
    if angles.n_sites != n_sites or angles.layers != layers:
        raise InvalidArgumentException(
            f"Angles for N={angles.n_sites}, M={angles.layers} do not fit N={n_sites}, M={layers}.")
    circuit = Circuit(n_sites)
    if parity == ODD:
        circuit.append(pauli_x(0))
    for m in range(1, layers + 1):
        bond_angles = [angles.bond(m, j) for j in range(1, n_sites)]
        site_angles = [angles.site(m, j) for j in range(1, n_sites + 1)]
        circuit.extend(layer_gates(n_sites, bond_angles, site_angles))
    return circuit


def prepare(circuit: Circuit) -> StateVector:
    return circuit.run(init_basis(circuit.n_qubits, '0' * circuit.n_qubits))


def measured_parity(state: StateVector) -> float:
    return float(np.dot(state.probabilities(), fermion_parity_diagonal(state.n_qubits)))


class AnsatzKernel:
    """
    The ansatz as a fixed sequence of one-parameter rotations exp(iθG),
    with the index arrays of every generator G precomputed for one
    (N, M, parity). Evaluates states and adjoint-mode gradients without
    building gate objects.

    Each step is (position in the flat angle vector, sign array or None,
    left indices, right indices). A sign array marks a diagonal generator
    (Z or ZZ); otherwise G swaps the amplitudes at ``left`` and ``right``.
    """

    def __init__(self, n_sites: int, layers: int, parity: int):
        _check_size(n_sites)
        self.n_sites = n_sites
        self.layers = layers
        self.parity = check_parity(parity)
        self.size = count_angles(n_sites, layers)
        self.initial_index = 0 if parity == EVEN else 1

        index = np.arange(2 ** n_sites)
        bits = [(index >> q) & 1 for q in range(n_sites)]
        signs = [1.0 - 2.0 * bit for bit in bits]
        positions = {label: i for i, label in enumerate(AnsatzAngles.zeros(n_sites, layers).labels())}
        pairs = bonds(n_sites, Boundary.OPEN)

        self.steps: List[Tuple[int, Optional[np.ndarray], np.ndarray, np.ndarray]] = []
        for m in range(1, layers + 1):
            for first in (1, 2):
                for j in range(first, n_sites, 2):
                    q0, q1 = pairs[j - 1]
                    mask = (1 << q0) | (1 << q1)
                    equal = index[(bits[q0] == 0) & (bits[q1] == 0)]
                    differ = index[(bits[q0] == 1) & (bits[q1] == 0)]
                    self.steps.append((positions[(m, j, 'c')], signs[q0] * signs[q1], equal, equal))
                    self.steps.append((positions[(m, j, 'b')], None, equal, equal ^ mask))
                    self.steps.append((positions[(m, j, 'a')], None, differ, differ ^ mask))
            for j in range(1, n_sites + 1):
                self.steps.append((positions[(m, j, 'site')], signs[j - 1], index, index))

    def _angles(self, values: np.ndarray) -> np.ndarray:
        values = np.asarray(values, dtype=float).reshape(-1)
        if values.size != self.size:
            raise InvalidArgumentException(
                f"Expected {self.size} angles for N={self.n_sites}, M={self.layers}, got {values.size}.")
        return values

    @staticmethod
    def _rotate(psi: np.ndarray, step: Tuple[int, Optional[np.ndarray], np.ndarray, np.ndarray],
                theta: float) -> None:
        _, sign, left, right = step
        c, s = math.cos(theta), math.sin(theta)
        if sign is not None:
            psi *= c + 1j * s * sign
            return
        lhs, rhs = psi[left], psi[right]
        psi[left] = c * lhs + 1j * s * rhs
        psi[right] = 1j * s * lhs + c * rhs

    @staticmethod
    def _generator_overlap(bra: np.ndarray, ket: np.ndarray,
                           step: Tuple[int, Optional[np.ndarray], np.ndarray, np.ndarray]) -> complex:
        _, sign, left, right = step
        if sign is not None:
            return complex(np.vdot(bra, sign * ket))
        return complex(np.vdot(bra[left], ket[right]) + np.vdot(bra[right], ket[left]))

    def amplitudes(self, values: np.ndarray) -> np.ndarray:
        values = self._angles(values)
        psi = np.zeros(2 ** self.n_sites, dtype=np.complex128)
        psi[self.initial_index] = 1.0
        for step in self.steps:
            self._rotate(psi, step, values[step[0]])
        return psi

    def energy_and_gradient(self, values: np.ndarray,
                            hamiltonian: scipy.sparse.csr_matrix) -> Tuple[float, np.ndarray]:
        """
        Adjoint-mode differentiation: one forward pass, then one backward
        pass that un-applies every rotation to both |ψ> and H|ψ>. For
        U = exp(iθG), dE/dθ = -2 Im <λ|G|ψ> with |ψ> the state right after
        the rotation and <λ| = <ψ_final|H U_later.
        """
        values = self._angles(values)
        psi = self.amplitudes(values)
        lam = hamiltonian @ psi
        value = float(np.vdot(psi, lam).real)
        grad = np.zeros(self.size)
        for step in reversed(self.steps):
            grad[step[0]] += -2.0 * self._generator_overlap(lam, psi, step).imag
            theta = -values[step[0]]
            self._rotate(psi, step, theta)
            self._rotate(lam, step, theta)
        return value, grad


class EnergyFunction:
    """
    E(θ) = <ψ(θ)|H_S|ψ(θ)> over flat angle vectors, with the open-chain
    Hamiltonian held as a sparse matrix.
    """

    def __init__(self, cs: CouplingSet, n_sites: int, layers: int, parity: int):
        self.kernel = AnsatzKernel(n_sites, layers, parity)
        self.n_sites = n_sites
        self.layers = layers
        self.parity = self.kernel.parity
        self.hamiltonian: scipy.sparse.csr_matrix = hamiltonian_sparse(cs, n_sites, Boundary.OPEN)

    def state(self, values: np.ndarray) -> StateVector:
        return StateVector(self.kernel.amplitudes(values))

    def __call__(self, values: np.ndarray) -> float:
        psi = self.kernel.amplitudes(values)
        return float(np.vdot(psi, self.hamiltonian @ psi).real)

    def gradient(self, values: np.ndarray) -> np.ndarray:
        return self.kernel.energy_and_gradient(values, self.hamiltonian)[1]

    def finite_difference(self, values: np.ndarray, step: float = GRADIENT_STEP) -> np.ndarray:
        """
        Central differences, one pair of energy evaluations per angle.
        """
        values = np.asarray(values, dtype=float)
        grad = np.empty_like(values)
        for i in range(values.size):
            shift = np.zeros_like(values)
            shift[i] = step
            grad[i] = (self(values + shift) - self(values - shift)) / (2 * step)
        return grad


def energy(cs: CouplingSet, n_sites: int, layers: int, angles: AnsatzAngles, parity: int) -> float:
    return EnergyFunction(cs, n_sites, layers, parity)(angles.values)


def gradient(cs: CouplingSet, n_sites: int, layers: int, angles: AnsatzAngles, parity: int,
             step: Optional[float] = None) -> np.ndarray:
    """
    Exact gradient by adjoint differentiation, or central finite differences
    with the given step.
    """
    function = EnergyFunction(cs, n_sites, layers, parity)
    if step is None:
        return function.gradient(angles.values)
    return function.finite_difference(angles.values, step)


def anneal(objective: Callable[[np.ndarray], float], start: np.ndarray, schedule: AnnealingSchedule,
           rng: np.random.Generator) -> Tuple[np.ndarray, float]:
    """
    Simulated annealing with geometric cooling and Gaussian proposals.
    Returns the best point visited and its energy.
    """
    current = start.copy()
    current_energy = objective(current)
    best, best_energy = current.copy(), current_energy
    temperature = schedule.initial_temperature
    for _ in range(schedule.steps):
        proposal = current + rng.normal(0.0, schedule.step_size, size=current.size)
        proposal_energy = objective(proposal)
        gain = proposal_energy - current_energy
        if gain < 0 or rng.random() < math.exp(-gain / max(temperature, 1e-300)):
            current, current_energy = proposal, proposal_energy
            if current_energy < best_energy:
                best, best_energy = current.copy(), current_energy
        temperature *= schedule.cooling_rate
    return best, best_energy


def run_trial(function: EnergyFunction, config: VqeConfig, trial: int) -> TrialOutcome:
    """
    Random start in (-π, π], annealing warm start, then BFGS until the
    energy changes by less than the tolerance between iterations.
    """
    rng = np.random.default_rng([config.seed, trial])
    size = count_angles(function.n_sites, function.layers)
    start = math.pi - rng.uniform(0.0, 2 * math.pi, size=size)
    warm, warm_energy = anneal(function, start, config.annealing, rng)

    history = [warm_energy]
    stopped: List[bool] = []

    def callback(intermediate_result: scipy.optimize.OptimizeResult) -> None:
        history.append(float(intermediate_result.fun))
        if history[-2] - history[-1] < config.tolerance:
            stopped.append(True)
            raise StopIteration

    result = scipy.optimize.minimize(function, warm, jac=function.gradient, method='BFGS', callback=callback,
                                     options={'maxiter': config.max_iterations, 'gtol': 1e-12})
    final = np.asarray(result.x, dtype=float)
    final_energy = float(function(final))
    if warm_energy < final_energy:
        final, final_energy = warm, warm_energy
    return TrialOutcome(trial=trial, energy=final_energy, angles=final, iterations=len(history) - 1,
                        converged=bool(stopped) or bool(result.success), annealing_energy=warm_energy)


def optimize(cs: CouplingSet, n_sites: int, config: VqeConfig, parity: int = EVEN, threads: int = 1,
             progress: Optional[Callable[[TrialOutcome], None]] = None) -> VqeResult:
    """
    Multi-start VQE. Trials run on a thread pool; the result is the lowest
    trial energy, ties going to the lower trial index.

    Parameters
    -------
    cs : CouplingSet
    n_sites : int
        Chain length, N ≡ 0 (mod 4).
    config : VqeConfig
        Layers, trial count, tolerance, annealing schedule and seed.
    parity : int
        Requested fermion parity, +1 or -1.
    threads : int
        Upper bound on concurrently running trials.
    progress : callable, optional
        Called with every finished TrialOutcome, in trial order.

    Returns
    -------
    result : VqeResult
    """
    function = EnergyFunction(cs, n_sites, config.layers, parity)
    with ThreadPoolExecutor(max_workers=max(1, threads)) as executor:
        outcomes = list(executor.map(lambda trial: run_trial(function, config, trial), range(config.trials)))
    if progress is not None:
        for outcome in outcomes:
            progress(outcome)
    best = min(outcomes, key=lambda x: (x.energy, x.trial))
    angles = AnsatzAngles.from_flat(n_sites, config.layers, best.angles)
    state = function.state(angles.values)
    return VqeResult(energy=best.energy, angles=angles, trials=outcomes, parity_requested=parity,
                     parity_measured=measured_parity(state), converged=any(x.converged for x in outcomes),
                     config=config)
