"""
Kitaev chain / XYZ spin chain / Majorana Hamiltonians.

Site j (1-indexed) lives on qubit j-1. The occupation basis used by the
Fock builder stores n_j in bit j-1; a Fock index f corresponds to the qubit
index f XOR (2^N - 1) without extra signs, because the canonical ordering
c†_1 ... c†_N |vac> adds no Jordan-Wigner phases.
"""
from typing import List, Sequence, Tuple

import numpy as np
import scipy.sparse

from kitaevqc.models import (Boundary, CouplingSet, InvalidArgumentException, MajoranaMode,
                             ResourceLimitException, UnsupportedSizeException)
from kitaevqc.qsim import PauliString, PauliSum

DEFAULT_DENSE_LIMIT = 14


def bonds(n_sites: int, boundary: Boundary) -> List[Tuple[int, int]]:
    """
    Nearest-neighbour bonds as 0-indexed qubit pairs; the wrap bond is (N-1, 0).
    """
    pairs = [(j, j + 1) for j in range(n_sites - 1)]
    if boundary == Boundary.PERIODIC:
        pairs.append((n_sites - 1, 0))
    return pairs


def _check_sites(n_sites: int) -> None:
    if n_sites < 2:
        raise InvalidArgumentException(f"The chain needs at least two sites, got {n_sites}.")


def spin_hamiltonian(cs: CouplingSet, n_sites: int, boundary: Boundary = Boundary.OPEN,
                     wrap_sign: float = 1.0) -> PauliSum:
    """
    H_S = -Σ_α J_α Σ S^α_j S^α_{j+1} - hz Σ S^z_j with S = σ/2.

    Parameters
    -------
    cs : CouplingSet
        Parameter point.
    n_sites : int
        Chain length N >= 2.
    boundary : Boundary
        Open chains have N-1 bonds, periodic ones N.
    wrap_sign : float
        Multiplies Jx and Jy on the wrap bond. -1 gives the twisted bond the
        fermion chain sees in its even-parity sector.

    Returns
    -------
    hamiltonian : PauliSum
    """
    _check_sites(n_sites)
    terms = []
    for a, b in bonds(n_sites, boundary):
        sign = wrap_sign if (a, b) == (n_sites - 1, 0) else 1.0
        for letter, coupling in (('X', cs.jx * sign), ('Y', cs.jy * sign), ('Z', cs.jz)):
            if coupling != 0:
                terms.append(PauliString.from_sparse(n_sites, {a: letter, b: letter}, -coupling / 4))
    if cs.hz != 0:
        for j in range(n_sites):
            terms.append(PauliString.from_sparse(n_sites, {j: 'Z'}, -cs.hz / 2))
    if not terms:
        terms.append(PauliString.identity(n_sites, 0.0))
    return PauliSum(terms)


def majorana_string(j: int, mode: MajoranaMode, n_sites: int) -> PauliString:
    """
    Jordan-Wigner image of γ_j^s = c†_j + c_j or γ_j^a = i(c†_j - c_j):
    γ^s = Π_{i<j}(-Z_i) X_j and γ^a = -Π_{i<j}(-Z_i) Y_j.
    """
    if not 1 <= j <= n_sites:
        raise InvalidArgumentException(f"Site {j} outside 1..{n_sites}.")
    letters = {i: 'Z' for i in range(j - 1)}
    string_sign = (-1.0) ** (j - 1)
    if mode == MajoranaMode.S:
        letters[j - 1] = 'X'
        return PauliString.from_sparse(n_sites, letters, string_sign)
    letters[j - 1] = 'Y'
    return PauliString.from_sparse(n_sites, letters, -string_sign)


def parity_string(n_sites: int) -> PauliString:
    """
    Fermion parity Π_j Z_j; only defined here for N ≡ 0 (mod 4).
    """
    if n_sites < 1 or n_sites % 4 != 0:
        raise UnsupportedSizeException(
            f"Fermion parity as a magnetization parity needs N ≡ 0 (mod 4), got N={n_sites}.")
    return PauliString(1.0, 'Z' * n_sites)


def majorana_hamiltonian(cs: CouplingSet, n_sites: int) -> PauliSum:
    """
    Open-chain H_M rebuilt from Majorana strings, simplified.
    """
    _check_sites(n_sites)

    def gamma(j: int, mode: MajoranaMode) -> PauliString:
        return majorana_string(j, mode, n_sites)

    s, a = MajoranaMode.S, MajoranaMode.A
    terms: List[PauliString] = []
    for j in range(1, n_sites):
        terms.append((gamma(j, s) * gamma(j + 1, a)).scaled(-1j * cs.g_minus))
        terms.append((gamma(j, a) * gamma(j + 1, s)).scaled(1j * cs.g_plus))
        terms.append((gamma(j, s) * gamma(j, a) * gamma(j + 1, s) * gamma(j + 1, a)).scaled(cs.zeta))
    for j in range(1, n_sites + 1):
        terms.append((gamma(j, s) * gamma(j, a)).scaled(-1j * cs.eta))
    simplified = PauliSum(terms).simplify()
    if not simplified.terms:
        return PauliSum([PauliString.identity(n_sites, 0.0)])
    return simplified


def fermion_parity_diagonal(n_sites: int) -> np.ndarray:
    """
    (-1)^{N_f} for every qubit-basis index; a set bit is an empty site.
    """
    idx = np.arange(1 << n_sites)
    empty = np.zeros_like(idx)
    for q in range(n_sites):
        empty += (idx >> q) & 1
    return np.where((n_sites - empty) % 2 == 0, 1, -1)


def _parity_below(f: np.ndarray, site: int) -> np.ndarray:
    sign = np.ones(f.shape, dtype=np.float64)
    for i in range(site):
        sign = np.where((f >> i) & 1, -sign, sign)
    return sign


def _ladder(f: np.ndarray, amp: np.ndarray, ops: Sequence[Tuple[str, int]]) -> Tuple[np.ndarray, np.ndarray]:
    """
    Applies ladder operators right to left; ('+', j) is c†_j, ('-', j) is c_j
    with j 0-indexed. Invalid transitions get amplitude 0.
    """
    for kind, site in reversed(ops):
        occupied = (f >> site) & 1
        valid = occupied == (0 if kind == '+' else 1)
        amp = np.where(valid, amp * _parity_below(f, site), 0.0)
        f = f ^ (1 << site)
    return f, amp


def fermion_fock_sparse(cs: CouplingSet, n_sites: int, boundary: Boundary = Boundary.OPEN) -> scipy.sparse.csr_matrix:
    """
    H_K in the occupation basis, bit j-1 holding n_j.
    """
    _check_sites(n_sites)
    dim = 1 << n_sites
    basis = np.arange(dim)
    rows, cols, data = [], [], []

    def add(ops: Sequence[Tuple[str, int]], coefficient: float) -> None:
        if coefficient == 0:
            return
        target, amp = _ladder(basis, np.ones(dim), ops)
        keep = amp != 0
        rows.append(target[keep])
        cols.append(basis[keep])
        data.append(coefficient * amp[keep])

    occupation = [((basis >> j) & 1) - 0.5 for j in range(n_sites)]
    diagonal = np.zeros(dim)
    for a, b in bonds(n_sites, boundary):
        add([('+', a), ('-', b)], -cs.t)
        add([('+', b), ('-', a)], -cs.t)
        add([('+', a), ('+', b)], -cs.delta)
        add([('-', b), ('-', a)], -cs.delta)
        diagonal -= cs.v * occupation[a] * occupation[b]
    for j in range(n_sites):
        diagonal -= cs.mu * occupation[j]
    rows.append(basis)
    cols.append(basis)
    data.append(diagonal)
    return scipy.sparse.coo_matrix(
        (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))), shape=(dim, dim)).tocsr()


def fermion_fock_matrix(cs: CouplingSet, n_sites: int, boundary: Boundary = Boundary.OPEN,
                        dense_limit: int = DEFAULT_DENSE_LIMIT) -> np.ndarray:
    """
    Dense real symmetric 2^N × 2^N matrix of H_K in the occupation basis.
    """
    if n_sites > dense_limit:
        raise ResourceLimitException(f"N={n_sites} exceeds the dense limit of {dense_limit} sites.")
    return fermion_fock_sparse(cs, n_sites, boundary).toarray()


def fock_to_qubit_permutation(n_sites: int) -> np.ndarray:
    """
    perm[q] is the Fock index of qubit-basis index q.
    """
    return np.arange(1 << n_sites) ^ ((1 << n_sites) - 1)


def _real(matrix: scipy.sparse.spmatrix) -> scipy.sparse.csr_matrix:
    matrix = scipy.sparse.csr_matrix(matrix)
    if matrix.nnz and np.max(np.abs(matrix.data.imag)) > 1e-14:
        raise InvalidArgumentException("Hamiltonian has complex matrix elements.")
    return scipy.sparse.csr_matrix(matrix.real)


def hamiltonian_sparse(cs: CouplingSet, n_sites: int, boundary: Boundary = Boundary.OPEN) -> scipy.sparse.csr_matrix:
    """
    Real sparse Hamiltonian in the qubit basis.

    Open chains use the spin Hamiltonian. Periodic chains are taken from the
    fermion Fock matrix so the parity-dependent boundary twist is exact.
    """
    if boundary == Boundary.OPEN:
        return _real(spin_hamiltonian(cs, n_sites, boundary).to_sparse())
    perm = fock_to_qubit_permutation(n_sites)
    return fermion_fock_sparse(cs, n_sites, boundary)[perm][:, perm].tocsr()


def hamiltonian_matrix(cs: CouplingSet, n_sites: int, boundary: Boundary = Boundary.OPEN,
                       dense_limit: int = DEFAULT_DENSE_LIMIT) -> np.ndarray:
    if n_sites > dense_limit:
        raise ResourceLimitException(f"N={n_sites} exceeds the dense limit of {dense_limit} sites.")
    return hamiltonian_sparse(cs, n_sites, boundary).toarray()
