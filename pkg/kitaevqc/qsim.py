"""
Dense statevector simulator.

Qubit q is bit q of the basis index (little-endian). |0> is the +1
eigenstate of Z. Kernels work in place on C-contiguous arrays of shape
(B, 2**n) so that several states can be carried through one circuit.
"""
import cmath
import math
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse

from kitaevqc.models import InternalException, InvalidArgumentException

UNITARY_TOLERANCE = 1e-12
HERMITIAN_TOLERANCE = 1e-12
NORM_TOLERANCE = 1e-10

PAULI_LETTERS = 'IXYZ'


class StateVector:
    """
    Normalized complex amplitudes over 2^n basis states.
    """

    def __init__(self, amplitudes: np.ndarray):
        amplitudes = np.ascontiguousarray(amplitudes, dtype=np.complex128)
        if amplitudes.ndim != 1:
            raise InvalidArgumentException("Amplitudes must be a one-dimensional array.")
        size = amplitudes.size
        if size < 2 or size & (size - 1):
            raise InvalidArgumentException(f"Amplitude count {size} is not a power of two.")
        self.amplitudes = amplitudes
        self.n_qubits = size.bit_length() - 1

    def __repr__(self) -> str:
        return f"StateVector(n_qubits={self.n_qubits})"

    def copy(self) -> 'StateVector':
        return StateVector(self.amplitudes.copy())

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def is_normalized(self, tolerance: float = NORM_TOLERANCE) -> bool:
        return abs(self.norm() - 1.0) < tolerance

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def batch(self) -> np.ndarray:
        """
        Writable (1, 2^n) view on the amplitudes.
        """
        return self.amplitudes.reshape(1, -1)


def init_basis(n_qubits: int, bits: str) -> StateVector:
    """
    Computational basis state; ``bits[q]`` is the value of qubit q.

    Parameters
    -------
    n_qubits : int
        Register size.
    bits : str
        String of '0'/'1' of length n_qubits.

    Returns
    -------
    state : StateVector
    """
    if n_qubits < 1:
        raise InvalidArgumentException("A register needs at least one qubit.")
    index = _basis_index(n_qubits, bits)
    amplitudes = np.zeros(1 << n_qubits, dtype=np.complex128)
    amplitudes[index] = 1.0
    return StateVector(amplitudes)


def _basis_index(n_qubits: int, bits: str) -> int:
    if len(bits) != n_qubits or any(b not in '01' for b in bits):
        raise InvalidArgumentException(f"Expected a bitstring of length {n_qubits}, got '{bits}'.")
    return sum(1 << q for q, b in enumerate(bits) if b == '1')


def _bitstring(index: int, n_qubits: int) -> str:
    return ''.join('1' if (index >> q) & 1 else '0' for q in range(n_qubits))


_PAULI_PRODUCT: Dict[Tuple[str, str], Tuple[complex, str]] = {
    ('I', 'I'): (1, 'I'), ('I', 'X'): (1, 'X'), ('I', 'Y'): (1, 'Y'), ('I', 'Z'): (1, 'Z'),
    ('X', 'I'): (1, 'X'), ('X', 'X'): (1, 'I'), ('X', 'Y'): (1j, 'Z'), ('X', 'Z'): (-1j, 'Y'),
    ('Y', 'I'): (1, 'Y'), ('Y', 'X'): (-1j, 'Z'), ('Y', 'Y'): (1, 'I'), ('Y', 'Z'): (1j, 'X'),
    ('Z', 'I'): (1, 'Z'), ('Z', 'X'): (1j, 'Y'), ('Z', 'Y'): (-1j, 'X'), ('Z', 'Z'): (1, 'I'),
}

_SINGLE_PAULI = {
    'I': np.eye(2, dtype=np.complex128),
    'X': np.array([[0, 1], [1, 0]], dtype=np.complex128),
    'Y': np.array([[0, -1j], [1j, 0]], dtype=np.complex128),
    'Z': np.array([[1, 0], [0, -1]], dtype=np.complex128),
}


@dataclass(frozen=True)
class PauliString:
    """
    coefficient × letters[0] ⊗ ... with letters[q] acting on qubit q.
    """
    coefficient: complex
    letters: str

    def __post_init__(self) -> None:
        if not self.letters or any(c not in PAULI_LETTERS for c in self.letters):
            raise InvalidArgumentException(f"Invalid Pauli letters '{self.letters}'.")

    @classmethod
    def identity(cls, n_qubits: int, coefficient: complex = 1.0) -> 'PauliString':
        return cls(coefficient, 'I' * n_qubits)

    @classmethod
    def from_sparse(cls, n_qubits: int, letters: Dict[int, str], coefficient: complex = 1.0) -> 'PauliString':
        """
        Builds a string from {qubit: letter}; unspecified qubits are I.
        """
        chars = ['I'] * n_qubits
        for qubit, letter in letters.items():
            if not 0 <= qubit < n_qubits:
                raise InvalidArgumentException(f"Qubit {qubit} out of range for {n_qubits} qubits.")
            chars[qubit] = letter
        return cls(coefficient, ''.join(chars))

    @property
    def n_qubits(self) -> int:
        return len(self.letters)

    @property
    def x_mask(self) -> int:
        return sum(1 << q for q, c in enumerate(self.letters) if c in 'XY')

    @property
    def z_mask(self) -> int:
        return sum(1 << q for q, c in enumerate(self.letters) if c in 'YZ')

    @property
    def y_count(self) -> int:
        return self.letters.count('Y')

    def support(self) -> List[int]:
        return [q for q, c in enumerate(self.letters) if c != 'I']

    def __mul__(self, other: 'PauliString') -> 'PauliString':
        if not isinstance(other, PauliString):
            return NotImplemented
        if other.n_qubits != self.n_qubits:
            raise InvalidArgumentException("Pauli strings act on registers of different size.")
        phase: complex = self.coefficient * other.coefficient
        chars = []
        for a, b in zip(self.letters, other.letters):
            factor, c = _PAULI_PRODUCT[(a, b)]
            phase *= factor
            chars.append(c)
        return PauliString(phase, ''.join(chars))

    def scaled(self, factor: complex) -> 'PauliString':
        return PauliString(self.coefficient * factor, self.letters)

    def dagger(self) -> 'PauliString':
        return PauliString(complex(self.coefficient).conjugate(), self.letters)

    def is_hermitian(self) -> bool:
        return abs(complex(self.coefficient).imag) < HERMITIAN_TOLERANCE

    def commutes_with(self, other: 'PauliString') -> bool:
        anti = sum(1 for a, b in zip(self.letters, other.letters) if a != 'I' and b != 'I' and a != b)
        return anti % 2 == 0

    def to_sparse(self) -> scipy.sparse.csr_matrix:
        n = self.n_qubits
        idx = np.arange(1 << n)
        values = self.coefficient * (1j ** self.y_count) * _z_signs(n, self.z_mask)
        return scipy.sparse.csr_matrix((values, (idx ^ self.x_mask, idx)), shape=(1 << n, 1 << n))

    def to_dense(self) -> np.ndarray:
        """
        Kronecker-product matrix; qubit 0 is the rightmost factor.
        """
        matrix = np.array([[1.0 + 0j]])
        for letter in self.letters:
            matrix = np.kron(_SINGLE_PAULI[letter], matrix)
        return self.coefficient * matrix


@dataclass
class PauliSum:
    terms: List[PauliString] = field(default_factory=list)

    @property
    def n_qubits(self) -> int:
        if not self.terms:
            raise InvalidArgumentException("Empty Pauli sum has no register size.")
        return self.terms[0].n_qubits

    def __iter__(self) -> Iterator[PauliString]:
        return iter(self.terms)

    def __len__(self) -> int:
        return len(self.terms)

    def __add__(self, other: 'PauliSum') -> 'PauliSum':
        return PauliSum(self.terms + other.terms)

    def scaled(self, factor: complex) -> 'PauliSum':
        return PauliSum([t.scaled(factor) for t in self.terms])

    def simplify(self, tolerance: float = 1e-14) -> 'PauliSum':
        """
        Merges equal letter strings and drops vanishing terms.
        """
        merged: Dict[str, complex] = {}
        for term in self.terms:
            merged[term.letters] = merged.get(term.letters, 0) + term.coefficient
        return PauliSum([PauliString(c, letters) for letters, c in merged.items() if abs(c) > tolerance])

    def is_hermitian(self) -> bool:
        return all(t.is_hermitian() for t in self.simplify().terms)

    def to_sparse(self) -> scipy.sparse.csr_matrix:
        n = self.n_qubits
        total = scipy.sparse.csr_matrix((1 << n, 1 << n), dtype=np.complex128)
        for term in self.terms:
            total = total + term.to_sparse()
        return total.tocsr()

    def to_dense(self) -> np.ndarray:
        return self.to_sparse().toarray()


@lru_cache(maxsize=256)
def _z_signs(n_qubits: int, z_mask: int) -> np.ndarray:
    idx = np.arange(1 << n_qubits)
    odd = np.zeros(1 << n_qubits, dtype=np.int64)
    q = 0
    mask = z_mask
    while mask:
        if mask & 1:
            odd ^= (idx >> q) & 1
        mask >>= 1
        q += 1
    signs = 1.0 - 2.0 * odd
    signs.setflags(write=False)
    return signs


def pauli_kernel(psi: np.ndarray, pauli: PauliString) -> np.ndarray:
    """
    Returns pauli · psi for a (B, 2^n) block of states.
    """
    n = pauli.n_qubits
    if psi.shape[-1] != 1 << n:
        raise InvalidArgumentException(f"Pauli string on {n} qubits applied to {psi.shape[-1]} amplitudes.")
    idx = np.arange(1 << n)
    src = idx ^ pauli.x_mask
    factor = pauli.coefficient * (1j ** pauli.y_count) * _z_signs(n, pauli.z_mask)[src]
    return factor * psi[..., src]


class GateKind(Enum):
    PAULI_X = 'pauli-x'
    PAULI_Y = 'pauli-y'
    PAULI_Z = 'pauli-z'
    HADAMARD = 'hadamard'
    S = 's'
    S_DAGGER = 's-dagger'
    PHASE = 'phase'
    ROTATION = 'rotation'
    CNOT = 'cnot'
    CZ = 'cz'
    XX_PLUS_YY = 'xx-plus-yy'
    XX_MINUS_YY = 'xx-minus-yy'
    ZZ = 'zz'
    CONTROLLED_PAULI_STRING = 'controlled-pauli-string'


_ONE_QUBIT = {GateKind.PAULI_X, GateKind.PAULI_Y, GateKind.PAULI_Z, GateKind.HADAMARD, GateKind.S,
              GateKind.S_DAGGER, GateKind.PHASE, GateKind.ROTATION}
_TWO_QUBIT = {GateKind.XX_PLUS_YY, GateKind.XX_MINUS_YY, GateKind.ZZ}
_CONTROLLED = {GateKind.CNOT: 'X', GateKind.CZ: 'Z'}
_SELF_INVERSE = {GateKind.PAULI_X, GateKind.PAULI_Y, GateKind.PAULI_Z, GateKind.HADAMARD, GateKind.CNOT, GateKind.CZ}


def _two_level(c: complex, s: complex) -> np.ndarray:
    return np.array([[c, s], [s, c]], dtype=np.complex128)


@dataclass(frozen=True, eq=False)
class Gate:
    """
    A gate on ``targets``, optionally conditioned on ``controls`` being in
    ``control_state`` (1 for the usual control, 0 for an anti-control).

    Rotations follow R_axis(θ) = exp(+iθσ/2). Two-qubit matrices are in the
    basis index b(targets[0]) + 2·b(targets[1]).
    """
    kind: GateKind
    targets: Tuple[int, ...]
    controls: Tuple[int, ...] = ()
    angle: float = 0.0
    axis: Optional[str] = None
    pauli: Optional[PauliString] = None
    control_state: int = 1

    def __post_init__(self) -> None:
        qubits = self.targets + self.controls
        if len(set(qubits)) != len(qubits):
            raise InvalidArgumentException(f"Gate qubits must be pairwise distinct, got {qubits}.")
        if any(q < 0 for q in qubits):
            raise InvalidArgumentException("Qubit indices must be non-negative.")
        if self.control_state not in (0, 1):
            raise InvalidArgumentException("control_state must be 0 or 1.")
        if self.kind in _ONE_QUBIT and len(self.targets) != 1:
            raise InvalidArgumentException(f"{self.kind.value} acts on exactly one target.")
        if self.kind in _TWO_QUBIT and len(self.targets) != 2:
            raise InvalidArgumentException(f"{self.kind.value} acts on exactly two targets.")
        if self.kind in _CONTROLLED and (len(self.targets) != 1 or len(self.controls) != 1):
            raise InvalidArgumentException(f"{self.kind.value} needs one control and one target.")
        if self.kind == GateKind.ROTATION and self.axis not in ('x', 'y', 'z'):
            raise InvalidArgumentException(f"Rotation axis must be x, y or z, got {self.axis}.")
        if self.kind == GateKind.CONTROLLED_PAULI_STRING:
            if self.pauli is None or len(self.controls) != 1:
                raise InvalidArgumentException("Controlled Pauli string needs a string and one control.")
            if abs(abs(self.pauli.coefficient) - 1.0) > UNITARY_TOLERANCE:
                raise InvalidArgumentException("Controlled Pauli string needs a unit-modulus coefficient.")
            if self.controls[0] < self.pauli.n_qubits and self.pauli.letters[self.controls[0]] != 'I':
                raise InvalidArgumentException("Control qubit overlaps the Pauli string support.")
        elif not math.isfinite(self.angle):
            raise InvalidArgumentException(f"Gate {self.kind.value} needs a finite angle, got {self.angle}.")

    @property
    def qubits(self) -> Tuple[int, ...]:
        if self.kind == GateKind.CONTROLLED_PAULI_STRING and self.pauli is not None:
            return tuple(self.pauli.support()) + self.controls
        return self.targets + self.controls

    def matrix(self) -> np.ndarray:
        """
        Local matrix acting on the targets (controls excluded).
        """
        kind, theta = self.kind, self.angle
        if kind in _CONTROLLED:
            return _SINGLE_PAULI[_CONTROLLED[kind]]
        if kind == GateKind.PAULI_X:
            return _SINGLE_PAULI['X']
        if kind == GateKind.PAULI_Y:
            return _SINGLE_PAULI['Y']
        if kind == GateKind.PAULI_Z:
            return _SINGLE_PAULI['Z']
        if kind == GateKind.HADAMARD:
            return np.array([[1, 1], [1, -1]], dtype=np.complex128) / math.sqrt(2)
        if kind == GateKind.S:
            return np.diag([1, 1j]).astype(np.complex128)
        if kind == GateKind.S_DAGGER:
            return np.diag([1, -1j]).astype(np.complex128)
        if kind == GateKind.PHASE:
            return np.diag([1, cmath.exp(1j * theta)])
        if kind == GateKind.ROTATION:
            assert self.axis is not None
            return (math.cos(theta / 2) * _SINGLE_PAULI['I']
                    + 1j * math.sin(theta / 2) * _SINGLE_PAULI[self.axis.upper()])
        if kind == GateKind.ZZ:
            phases = [cmath.exp(1j * theta), cmath.exp(-1j * theta)]
            return np.diag([phases[0], phases[1], phases[1], phases[0]])
        block = _two_level(math.cos(theta), 1j * math.sin(theta))
        matrix = np.eye(4, dtype=np.complex128)
        pair = [1, 2] if kind == GateKind.XX_PLUS_YY else [0, 3]
        matrix[np.ix_(pair, pair)] = block
        return matrix

    def inverse(self) -> 'Gate':
        if self.kind in _SELF_INVERSE:
            return self
        if self.kind == GateKind.S:
            return Gate(GateKind.S_DAGGER, self.targets, self.controls, control_state=self.control_state)
        if self.kind == GateKind.S_DAGGER:
            return Gate(GateKind.S, self.targets, self.controls, control_state=self.control_state)
        if self.kind == GateKind.CONTROLLED_PAULI_STRING:
            assert self.pauli is not None
            return Gate(self.kind, self.targets, self.controls, pauli=self.pauli.dagger(),
                        control_state=self.control_state)
        return Gate(self.kind, self.targets, self.controls, angle=-self.angle, axis=self.axis,
                    control_state=self.control_state)


def pauli_x(q: int) -> Gate:
    return Gate(GateKind.PAULI_X, (q,))


def hadamard(q: int) -> Gate:
    return Gate(GateKind.HADAMARD, (q,))


def phase(q: int, phi: float) -> Gate:
    return Gate(GateKind.PHASE, (q,), angle=phi)


def rotation(axis: str, q: int, theta: float) -> Gate:
    return Gate(GateKind.ROTATION, (q,), angle=theta, axis=axis)


def cnot(control: int, target: int) -> Gate:
    return Gate(GateKind.CNOT, (target,), (control,))


def cz(control: int, target: int) -> Gate:
    return Gate(GateKind.CZ, (target,), (control,))


def xx_plus_yy(q0: int, q1: int, theta: float) -> Gate:
    return Gate(GateKind.XX_PLUS_YY, (q0, q1), angle=theta)


def xx_minus_yy(q0: int, q1: int, theta: float) -> Gate:
    return Gate(GateKind.XX_MINUS_YY, (q0, q1), angle=theta)


def zz(q0: int, q1: int, theta: float) -> Gate:
    return Gate(GateKind.ZZ, (q0, q1), angle=theta)


def controlled_pauli_string(pauli: PauliString, control: int, control_state: int = 1) -> Gate:
    return Gate(GateKind.CONTROLLED_PAULI_STRING, (), (control,), pauli=pauli, control_state=control_state)


def controlled_pauli_gates(pauli: PauliString, control: int, control_state: int = 1) -> List[Gate]:
    """
    Decomposes a controlled Pauli string into elementary gates: one CX, CY
    or CZ per letter, a phase on the control for the coefficient and X
    conjugation of the control for an anti-control. CY is S·CX·S†.
    """
    if abs(abs(pauli.coefficient) - 1.0) > UNITARY_TOLERANCE:
        raise InvalidArgumentException("Controlled Pauli string needs a unit-modulus coefficient.")
    gates: List[Gate] = []
    if control_state == 0:
        gates.append(pauli_x(control))
    for q, letter in enumerate(pauli.letters):
        if letter == 'X':
            gates.append(cnot(control, q))
        elif letter == 'Z':
            gates.append(cz(control, q))
        elif letter == 'Y':
            gates.extend([Gate(GateKind.S_DAGGER, (q,)), cnot(control, q), Gate(GateKind.S, (q,))])
    arg = cmath.phase(pauli.coefficient)
    if abs(arg) > UNITARY_TOLERANCE:
        gates.append(phase(control, arg))
    if control_state == 0:
        gates.append(pauli_x(control))
    return gates


def _apply_one(psi: np.ndarray, matrix: np.ndarray, q: int, n: int) -> None:
    view = psi.reshape(psi.shape[0], 1 << (n - 1 - q), 2, 1 << q)
    view[...] = np.einsum('ij,bhjl->bhil', matrix, view)


def _apply_two(psi: np.ndarray, matrix: np.ndarray, q0: int, q1: int, n: int) -> None:
    lo, hi = min(q0, q1), max(q0, q1)
    tensor = matrix.reshape(2, 2, 2, 2)
    if q0 == hi:
        tensor = tensor.transpose(1, 0, 3, 2)
    view = psi.reshape(psi.shape[0], 1 << (n - 1 - hi), 2, 1 << (hi - lo - 1), 2, 1 << lo)
    view[...] = np.einsum('abcd,xhcmdl->xhambl', tensor, view)


def _reduce_target(q: int, control: int) -> int:
    return q - 1 if q > control else q


def _apply_uncontrolled(psi: np.ndarray, gate: Gate, n: int) -> None:
    if gate.kind == GateKind.CONTROLLED_PAULI_STRING:
        assert gate.pauli is not None
        psi[...] = pauli_kernel(psi, gate.pauli)
    elif len(gate.targets) == 1:
        _apply_one(psi, gate.matrix(), gate.targets[0], n)
    else:
        _apply_two(psi, gate.matrix(), gate.targets[0], gate.targets[1], n)


def apply_batch(psi: np.ndarray, gate: Gate) -> np.ndarray:
    """
    Applies ``gate`` in place to every row of a (B, 2^n) block.
    """
    if psi.ndim != 2 or not psi.flags.c_contiguous:
        raise InternalException("Kernels need a C-contiguous (B, 2^n) block.")
    n = psi.shape[-1].bit_length() - 1
    if any(q >= n for q in gate.targets + gate.controls):
        raise InvalidArgumentException(f"Gate {gate.kind.value} addresses a qubit outside a {n}-qubit register.")
    if gate.pauli is not None and gate.pauli.n_qubits != n:
        raise InvalidArgumentException(f"Pauli string on {gate.pauli.n_qubits} qubits in a {n}-qubit register.")
    if not gate.controls:
        _apply_uncontrolled(psi, gate, n)
        return psi
    control = gate.controls[0]
    view = psi.reshape(psi.shape[0], 1 << (n - 1 - control), 2, 1 << control)
    sub = np.ascontiguousarray(view[:, :, gate.control_state, :]).reshape(psi.shape[0], -1)
    if gate.kind == GateKind.CONTROLLED_PAULI_STRING:
        assert gate.pauli is not None
        reduced_letters = gate.pauli.letters[:control] + gate.pauli.letters[control + 1:]
        sub = pauli_kernel(sub, PauliString(gate.pauli.coefficient, reduced_letters))
    else:
        targets = tuple(_reduce_target(q, control) for q in gate.targets)
        matrix = gate.matrix()
        if len(targets) == 1:
            _apply_one(sub, matrix, targets[0], n - 1)
        else:
            _apply_two(sub, matrix, targets[0], targets[1], n - 1)
    view[:, :, gate.control_state, :] = sub.reshape(view.shape[0], view.shape[1], view.shape[3])
    return psi


def apply(state: StateVector, gate: Gate) -> StateVector:
    """
    Multiplies the state by the gate unitary in place and returns it.
    """
    apply_batch(state.batch(), gate)
    return state


def apply_pauli(state: StateVector, pauli: PauliString) -> StateVector:
    if pauli.n_qubits != state.n_qubits:
        raise InvalidArgumentException(
            f"Pauli string on {pauli.n_qubits} qubits applied to a {state.n_qubits}-qubit state.")
    return StateVector(pauli_kernel(state.amplitudes, pauli))


def inner(a: StateVector, b: StateVector) -> complex:
    """
    <a|b>
    """
    if a.n_qubits != b.n_qubits:
        raise InvalidArgumentException("Inner product of states on different registers.")
    return complex(np.vdot(a.amplitudes, b.amplitudes))


def expect_sparse(state: StateVector, matrix: scipy.sparse.spmatrix) -> float:
    value = complex(np.vdot(state.amplitudes, matrix @ state.amplitudes))
    if abs(value.imag) > 1e-9:
        raise InternalException(f"Expectation of a Hermitian operator has imaginary part {value.imag}.")
    return value.real


def expect(state: StateVector, h: PauliSum) -> float:
    """
    Real part of <state|h|state> for a Hermitian Pauli sum.
    """
    if not h.is_hermitian():
        raise InvalidArgumentException("Expectation requested for a non-Hermitian Pauli sum.")
    if h.n_qubits != state.n_qubits:
        raise InvalidArgumentException("Operator and state act on registers of different size.")
    total = np.zeros_like(state.amplitudes)
    for term in h.terms:
        total += pauli_kernel(state.amplitudes, term)
    value = complex(np.vdot(state.amplitudes, total))
    if abs(value.imag) > 1e-9:
        raise InternalException(f"Expectation of a Hermitian operator has imaginary part {value.imag}.")
    return value.real


def prob_basis(state: StateVector, bits: str) -> float:
    return float(abs(state.amplitudes[_basis_index(state.n_qubits, bits)]) ** 2)


def marginal_probability(state: StateVector, qubit: int, value: int) -> float:
    """
    Probability that ``qubit`` is measured in ``value``.
    """
    if not 0 <= qubit < state.n_qubits:
        raise InvalidArgumentException(f"Qubit {qubit} out of range.")
    view = state.probabilities().reshape(1 << (state.n_qubits - 1 - qubit), 2, 1 << qubit)
    return float(view[:, value, :].sum())


def sample(state: StateVector, shots: int, seed: Optional[int] = None) -> Dict[str, int]:
    """
    Samples measurement outcomes; keys are bitstrings with qubit q at position q.
    """
    if shots < 1:
        raise InvalidArgumentException("shots must be positive.")
    rng = np.random.default_rng(seed)
    probs = state.probabilities()
    probs = probs / probs.sum()
    counts = rng.multinomial(shots, probs)
    return {_bitstring(int(i), state.n_qubits): int(counts[i]) for i in np.flatnonzero(counts)}


class Circuit:
    """
    Ordered gate list on a fixed register.
    """

    def __init__(self, n_qubits: int, gates: Optional[Iterable[Gate]] = None):
        self.n_qubits = n_qubits
        self.gates: List[Gate] = []
        for gate in gates or []:
            self.append(gate)

    def append(self, gate: Gate) -> 'Circuit':
        if any(q >= self.n_qubits for q in gate.targets + gate.controls):
            raise InvalidArgumentException(
                f"Gate {gate.kind.value} on {gate.targets + gate.controls} outside a {self.n_qubits}-qubit circuit.")
        self.gates.append(gate)
        return self

    def extend(self, gates: Iterable[Gate]) -> 'Circuit':
        for gate in gates:
            self.append(gate)
        return self

    def __len__(self) -> int:
        return len(self.gates)

    def __iter__(self) -> Iterator[Gate]:
        return iter(self.gates)

    def inverse(self) -> 'Circuit':
        return Circuit(self.n_qubits, [g.inverse() for g in reversed(self.gates)])

    def apply_batch(self, psi: np.ndarray) -> np.ndarray:
        for gate in self.gates:
            apply_batch(psi, gate)
        return psi

    def run(self, initial: StateVector) -> StateVector:
        """
        Returns a new state; ``initial`` is left untouched.
        """
        if initial.n_qubits != self.n_qubits:
            raise InvalidArgumentException("Initial state does not match the circuit register.")
        state = initial.copy()
        self.apply_batch(state.batch())
        return state


def run_gates(gates: Sequence[Gate], initial: StateVector) -> StateVector:
    return Circuit(initial.n_qubits, gates).run(initial)
