"""
Exact diagonalization reference: parity-resolved eigenpairs, the closed
form of the damped Green-function time integral, and the exact winding.
"""
from typing import Optional, Protocol, Tuple

import numpy as np
import scipy.linalg

from kitaevqc.hamiltonian import (fermion_parity_diagonal, hamiltonian_sparse, majorana_string)
from kitaevqc.models import (EVEN, ODD, Boundary, CouplingSet, DegenerateGroundStateException, EigenSolution,
                             InternalException, InvalidArgumentException, MajoranaMode, ResourceLimitException,
                             ZkSeries, check_parity)
from kitaevqc.qsim import PauliString, StateVector, pauli_kernel
from kitaevqc.topo import winding, zk_series

FULL_SPECTRUM_LIMIT = 12
DEGENERACY_TOLERANCE = 1e-8
ZERO_FREQUENCY = 1e-12


class EigenCache(Protocol):
    def load(self, cs: CouplingSet, n_sites: int, boundary: Boundary, parity: int) -> Optional[EigenSolution]:
        ...

    def save(self, cs: CouplingSet, n_sites: int, boundary: Boundary, parity: int, solution: EigenSolution) -> None:
        ...


def parity_indices(n_sites: int, parity: int) -> np.ndarray:
    return np.flatnonzero(fermion_parity_diagonal(n_sites) == check_parity(parity))


def diagonalize(cs: CouplingSet, n_sites: int, boundary: Boundary = Boundary.OPEN, parity: int = EVEN,
                levels: Optional[int] = None, dense_limit: int = FULL_SPECTRUM_LIMIT,
                cache: Optional[EigenCache] = None) -> EigenSolution:
    """
    Eigenpairs of one parity block, lowest ``levels`` only if given.

    The block is cut out of the sparse Hamiltonian by masking basis states
    of the requested parity; eigenvectors are embedded back into the full
    2^N space.
    """
    if levels is not None and levels < 1:
        raise InvalidArgumentException(f"At least one level is required, got {levels}.")
    if n_sites > dense_limit:
        raise ResourceLimitException(f"N={n_sites} exceeds the exact-diagonalization limit of {dense_limit}.")
    if levels is None and cache is not None:
        cached = cache.load(cs, n_sites, boundary, parity)
        if cached is not None:
            return cached
    idx = parity_indices(n_sites, parity)
    hamiltonian = hamiltonian_sparse(cs, n_sites, boundary)
    block = hamiltonian[idx][:, idx].toarray()
    if levels is None:
        energies, vectors = scipy.linalg.eigh(block)
    else:
        top = min(levels, len(idx)) - 1
        energies, vectors = scipy.linalg.eigh(block, subset_by_index=[0, top])
    if len(energies) == 0:
        raise InternalException(f"Empty parity block for N={n_sites}, parity {parity}.")
    states = np.zeros((1 << n_sites, len(energies)))
    states[idx] = vectors
    solution = EigenSolution(energies=energies, states=states, parities=np.full(len(energies), parity))
    if levels is None and cache is not None:
        cache.save(cs, n_sites, boundary, parity, solution)
    return solution


def full_spectrum(cs: CouplingSet, n_sites: int, boundary: Boundary = Boundary.OPEN,
                  cache: Optional[EigenCache] = None) -> EigenSolution:
    """
    All 2^N eigenpairs, ascending, from both parity blocks.
    """
    even = diagonalize(cs, n_sites, boundary, EVEN, cache=cache)
    odd = diagonalize(cs, n_sites, boundary, ODD, cache=cache)
    energies = np.concatenate([even.energies, odd.energies])
    order = np.argsort(energies, kind='stable')
    return EigenSolution(energies=energies[order],
                         states=np.concatenate([even.states, odd.states], axis=1)[:, order],
                         parities=np.concatenate([even.parities, odd.parities])[order])


def ground_in_parity(cs: CouplingSet, n_sites: int, boundary: Boundary = Boundary.OPEN,
                     parity: Optional[int] = EVEN, cache: Optional[EigenCache] = None) -> Tuple[float, StateVector]:
    """
    Lowest eigenpair in a parity block. ``parity=None`` picks the lower of
    the two block ground states (even on ties).
    """
    if parity is None:
        even = ground_in_parity(cs, n_sites, boundary, EVEN, cache)
        odd = ground_in_parity(cs, n_sites, boundary, ODD, cache)
        return odd if odd[0] < even[0] else even
    solution = diagonalize(cs, n_sites, boundary, parity, levels=None if cache is not None else 1, cache=cache)
    return float(solution.energies[0]), StateVector(solution.states[:, 0].astype(np.complex128))


def _lower_parity(cs: CouplingSet, n_sites: int, boundary: Boundary) -> int:
    even = diagonalize(cs, n_sites, boundary, EVEN, levels=1)
    odd = diagonalize(cs, n_sites, boundary, ODD, levels=1)
    return ODD if odd.energies[0] < even.energies[0] else EVEN


def _kernel(omega: np.ndarray, delta: float, cutoff: Optional[float]) -> np.ndarray:
    """
    ∫_0^T e^{-(δ+iω)t} dt for every ω; T = ∞ when ``cutoff`` is None.
    """
    z = delta + 1j * omega
    if delta == 0:
        with np.errstate(divide='ignore', invalid='ignore'):
            kernel = np.where(np.abs(omega) < ZERO_FREQUENCY, 0.0, -1j / omega)
        return kernel
    if cutoff is None:
        return 1.0 / z
    return (1.0 - np.exp(-z * cutoff)) / z


def green_matrix_exact(cs: CouplingSet, n_sites: int, boundary: Boundary = Boundary.OPEN, delta: float = 0.15,
                       parity: Optional[int] = EVEN, cutoff: Optional[float] = None,
                       left: Optional[PauliString] = None, right: Optional[PauliString] = None,
                       cache: Optional[EigenCache] = None) -> np.ndarray:
    """
    g_{jj'} = -2 Re Σ_n c_n ∫_0^T e^{-(δ+iω_n)t} dt for all site pairs.

    Parameters
    -------
    cs : CouplingSet
    n_sites : int
    boundary : Boundary
    delta : float
        Damping δ >= 0; δ = 0 gives the principal sum skipping ω_n < 1e-12.
    parity : int or None
        Parity block of the ground state; None takes the lower block.
    cutoff : float or None
        Finite integration time T; None integrates to infinity.
    left, right : PauliString or None
        Replace γ_j^s (left) or γ_{j'}^a (right) for every j, j'.

    Returns
    -------
    g : np.ndarray
        Real N×N matrix indexed [j-1, j'-1].
    """
    if delta < 0:
        raise InvalidArgumentException("Damping delta must be non-negative.")
    if parity is None:
        parity = _lower_parity(cs, n_sites, boundary)
    own = diagonalize(cs, n_sites, boundary, parity, cache=cache)
    if len(own.energies) > 1 and own.energies[1] - own.energies[0] < DEGENERACY_TOLERANCE:
        raise DegenerateGroundStateException(
            f"Ground state of the {'even' if parity == EVEN else 'odd'} block is degenerate "
            f"(gap {own.energies[1] - own.energies[0]:.3e}).")
    ground_energy = own.energies[0]
    ground = own.states[:, 0].astype(np.complex128)
    other = diagonalize(cs, n_sites, boundary, -parity, cache=cache)
    if left is None and right is None:
        energies, vectors = other.energies, other.states
    else:
        energies = np.concatenate([own.energies, other.energies])
        vectors = np.concatenate([own.states, other.states], axis=1)

    def operator(j: int, mode: MajoranaMode, override: Optional[PauliString]) -> PauliString:
        return override if override is not None else majorana_string(j, mode, n_sites)

    sites = range(1, n_sites + 1)
    left_states = np.stack([pauli_kernel(ground, operator(j, MajoranaMode.S, left)) for j in sites])
    right_states = np.stack([pauli_kernel(ground, operator(j, MajoranaMode.A, right)) for j in sites])
    bra = left_states.conj() @ vectors
    ket = vectors.T @ right_states.T
    kernel = _kernel(energies - ground_energy, delta, cutoff)
    return -2.0 * np.real((bra * kernel) @ ket)


def green_rs_exact(cs: CouplingSet, n_sites: int, boundary: Boundary, j: int, j_prime: int, delta: float,
                   parity: Optional[int] = EVEN, cutoff: Optional[float] = None,
                   left: Optional[PauliString] = None, right: Optional[PauliString] = None,
                   cache: Optional[EigenCache] = None) -> float:
    for site in (j, j_prime):
        if not 1 <= site <= n_sites:
            raise InvalidArgumentException(f"Site {site} outside 1..{n_sites}.")
    g = green_matrix_exact(cs, n_sites, boundary, delta, parity, cutoff, left, right, cache)
    return float(g[j - 1, j_prime - 1])


def exact_zk(cs: CouplingSet, n_sites: int, delta: float, boundary: Boundary = Boundary.OPEN,
             parity: Optional[int] = EVEN, cutoff: Optional[float] = None,
             cache: Optional[EigenCache] = None) -> ZkSeries:
    g = green_matrix_exact(cs, n_sites, boundary, delta, parity, cutoff, cache=cache)
    return zk_series(g, n_sites)


def exact_winding(cs: CouplingSet, n_sites: int, delta: float, boundary: Boundary = Boundary.OPEN,
                  parity: Optional[int] = EVEN, cache: Optional[EigenCache] = None) -> int:
    return winding(exact_zk(cs, n_sites, delta, boundary, parity, cache=cache)).winding
