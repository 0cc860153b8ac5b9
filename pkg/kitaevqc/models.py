import math
from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum
from typing import Any, Dict, Iterator, List, Optional, Tuple

import click
import numpy as np


class KitaevQCException(Exception):
    """
    Base Exception
    """
    pass


class InvalidArgumentException(KitaevQCException, ValueError):
    """
    Argument outside the domain of an operation
    """
    pass


class ResourceLimitException(KitaevQCException):
    """
    Problem size beyond the configured dense limit
    """
    pass


class UnsupportedSizeException(KitaevQCException):
    """
    System size the parity construction does not support
    """
    pass


class DegenerateGroundStateException(KitaevQCException):
    """
    Ground state is degenerate inside its parity block
    """
    pass


class IllDefinedWindingException(KitaevQCException):
    """
    Winding number cannot be extracted (vanishing Z_k or gapless pseudo vector)
    """

    def __init__(self, message: str, increments: Optional[np.ndarray] = None, min_abs: Optional[float] = None):
        super().__init__(message)
        self.increments = increments
        self.min_abs = min_abs


class InconsistentWindingException(KitaevQCException):
    """
    Accumulated angle is not close to an integer multiple of 2π
    """

    def __init__(self, message: str, increments: Optional[np.ndarray] = None):
        super().__init__(message)
        self.increments = increments


class ConfigException(KitaevQCException):
    """
    Invalid or contradictory configuration
    """
    pass


class FormatVersionException(KitaevQCException):
    """
    On-disk file written in an unsupported format version
    """
    pass


class InternalException(KitaevQCException):
    """
    Internal invariant violated
    """
    pass


def warn(message: str) -> None:
    click.secho("WARN", bg='yellow', fg='black', nl=False, err=True)
    click.secho(" " + message, err=True)


EVEN = 1
ODD = -1


def parity_from_name(name: str) -> int:
    """
    Maps 'even'/'odd' (or '+1'/'-1') to the parity eigenvalue.
    """
    normalized = name.strip().lower()
    if normalized in ('even', '+1', '1', '+'):
        return EVEN
    if normalized in ('odd', '-1', '-'):
        return ODD
    raise InvalidArgumentException(f"Unknown parity '{name}'. Allowed values: even, odd.")


def parity_name(parity: int) -> str:
    return 'even' if parity == EVEN else 'odd'


def check_parity(parity: int) -> int:
    if parity not in (EVEN, ODD):
        raise InvalidArgumentException(f"Parity must be +1 or -1, got {parity}.")
    return parity


class Boundary(Enum):
    """
    Boundary condition of the chain.
    """
    OPEN = 'open'
    PERIODIC = 'periodic'


class MajoranaMode(Enum):
    """
    Symmetric (s) and antisymmetric (a) Majorana mode of a site.
    """
    S = 's'
    A = 'a'


class OverlapBackend(Enum):
    DIRECT = 'direct'
    HADAMARD_TEST = 'hadamard-test'


class TransferBackend(Enum):
    DIRECT = 'direct'
    CIRCUIT = 'circuit'


class GroundStateSource(Enum):
    VQE = 'vqe'
    ED = 'ed'


class PropagatorKind(Enum):
    TROTTER = 'trotter'
    EXACT = 'exact'


_RELATION_TOLERANCE = 1e-12


def _same(a: float, b: float) -> bool:
    return math.isclose(a, b, rel_tol=_RELATION_TOLERANCE, abs_tol=_RELATION_TOLERANCE)


@dataclass(frozen=True)
class CouplingSet:
    """
    One point of the parameter space, held simultaneously in the fermion
    (t, Δ, V, μ), spin (Jx, Jy, Jz, hz) and Majorana (g±, ζ, η) views.

    Use ``from_spin`` or ``from_fermion``; the constructor only validates.
    """
    t: float
    delta: float
    v: float
    mu: float
    jx: float
    jy: float
    jz: float
    hz: float
    g_plus: float
    g_minus: float
    zeta: float
    eta: float

    def __post_init__(self) -> None:
        values = (self.t, self.delta, self.v, self.mu, self.jx, self.jy, self.jz, self.hz)
        if not all(math.isfinite(x) for x in values):
            raise InvalidArgumentException("Coupling constants must be finite.")
        relations = [
            (self.t, (self.jx + self.jy) / 4),
            (self.delta, (self.jx - self.jy) / 4),
            (self.v, self.jz),
            (self.mu, self.hz),
            (self.g_plus, (self.t + self.delta) / 2),
            (self.g_minus, (self.t - self.delta) / 2),
            (self.zeta, self.v / 4),
            (self.eta, self.mu / 2),
        ]
        if not all(_same(a, b) for a, b in relations):
            raise InvalidArgumentException("Fermion, spin and Majorana views are inconsistent.")

    @classmethod
    def from_spin(cls, jx: float, jy: float, jz: float, hz: float) -> 'CouplingSet':
        t = (jx + jy) / 4
        delta = (jx - jy) / 4
        return cls(t=t, delta=delta, v=jz, mu=hz, jx=jx, jy=jy, jz=jz, hz=hz,
                   g_plus=(t + delta) / 2, g_minus=(t - delta) / 2, zeta=jz / 4, eta=hz / 2)

    @classmethod
    def from_fermion(cls, t: float, delta: float, v: float, mu: float) -> 'CouplingSet':
        return cls(t=t, delta=delta, v=v, mu=mu, jx=2 * (t + delta), jy=2 * (t - delta), jz=v, hz=mu,
                   g_plus=(t + delta) / 2, g_minus=(t - delta) / 2, zeta=v / 4, eta=mu / 2)

    def swap_xy(self) -> 'CouplingSet':
        """
        Exchanges Jx and Jy, i.e. flips the sign of the pairing Δ.
        """
        return CouplingSet.from_spin(self.jy, self.jx, self.jz, self.hz)

    def spin_view(self) -> Dict[str, float]:
        return {'jx': self.jx, 'jy': self.jy, 'jz': self.jz, 'hz': self.hz}

    def fermion_view(self) -> Dict[str, float]:
        return {'t': self.t, 'delta': self.delta, 'v': self.v, 'mu': self.mu}

    def majorana_view(self) -> Dict[str, float]:
        return {'g_plus': self.g_plus, 'g_minus': self.g_minus, 'zeta': self.zeta, 'eta': self.eta}

    def to_dict(self) -> Dict[str, Dict[str, float]]:
        return {'spin': self.spin_view(), 'fermion': self.fermion_view(), 'majorana': self.majorana_view()}


@dataclass(frozen=True, eq=False)
class EigenSolution:
    """
    Eigenpairs in ascending energy order; ``states`` holds one normalized
    vector per column, ``parities`` the fermion parity of each.
    """
    energies: np.ndarray
    states: np.ndarray
    parities: np.ndarray

    def __len__(self) -> int:
        return len(self.energies)


ANGLE_KINDS = ('a', 'b', 'c')


@dataclass(frozen=True, eq=False)
class AnsatzAngles:
    """
    The (4N-3)M variational angles of the layered ansatz.

    Flat layout per layer: for each bond j = 1..N-1 the triple (θ_a, θ_b, θ_c),
    then for each site j = 1..N the single angle ϑ.
    """
    n_sites: int
    layers: int
    values: np.ndarray

    def __post_init__(self) -> None:
        expected = count_angles(self.n_sites, self.layers)
        if self.values.shape != (expected,):
            raise InvalidArgumentException(
                f"Expected {expected} angles for N={self.n_sites}, M={self.layers}, got {self.values.size}.")

    @classmethod
    def zeros(cls, n_sites: int, layers: int) -> 'AnsatzAngles':
        return cls(n_sites=n_sites, layers=layers, values=np.zeros(count_angles(n_sites, layers)))

    @classmethod
    def from_flat(cls, n_sites: int, layers: int, values: Any) -> 'AnsatzAngles':
        return cls(n_sites=n_sites, layers=layers, values=np.asarray(values, dtype=float).reshape(-1).copy())

    @property
    def flat(self) -> np.ndarray:
        return self.values.copy()

    @property
    def per_layer(self) -> int:
        return 4 * self.n_sites - 3

    def bond(self, layer: int, j: int) -> Tuple[float, float, float]:
        """
        (θ_a, θ_b, θ_c) of bond j (1-indexed) in layer m (1-indexed).
        """
        offset = (layer - 1) * self.per_layer + 3 * (j - 1)
        a, b, c = self.values[offset:offset + 3]
        return float(a), float(b), float(c)

    def site(self, layer: int, j: int) -> float:
        offset = (layer - 1) * self.per_layer + 3 * (self.n_sites - 1) + (j - 1)
        return float(self.values[offset])

    def labels(self) -> Iterator[Tuple[int, int, str]]:
        """
        Yields (m, j, kind) in flat order; kind is one of a, b, c, site.
        """
        for m in range(1, self.layers + 1):
            for j in range(1, self.n_sites):
                for kind in ANGLE_KINDS:
                    yield m, j, kind
            for j in range(1, self.n_sites + 1):
                yield m, j, 'site'


def count_angles(n_sites: int, layers: int) -> int:
    return (4 * n_sites - 3) * layers


@dataclass(frozen=True)
class AnnealingSchedule:
    """
    Simulated-annealing warm start: geometric cooling with Gaussian proposals.
    """
    initial_temperature: float = 1.0
    cooling_rate: float = 0.95
    steps: int = 200
    step_size: float = 0.3


@dataclass(frozen=True)
class VqeConfig:
    layers: int
    trials: int = 10
    tolerance: float = 1e-8
    max_iterations: int = 2000
    annealing: AnnealingSchedule = field(default_factory=AnnealingSchedule)
    seed: int = 0

    def __post_init__(self) -> None:
        if self.layers < 1:
            raise InvalidArgumentException("The ansatz needs at least one layer.")
        if self.trials < 1:
            raise InvalidArgumentException("At least one trial is required.")
        if self.tolerance <= 0:
            raise InvalidArgumentException("BFGS tolerance must be positive.")


@dataclass(frozen=True, eq=False)
class TrialOutcome:
    trial: int
    energy: float
    angles: np.ndarray
    iterations: int
    converged: bool
    annealing_energy: float


@dataclass(frozen=True, eq=False)
class VqeResult:
    energy: float
    angles: AnsatzAngles
    trials: List[TrialOutcome]
    parity_requested: int
    parity_measured: float
    converged: bool
    config: VqeConfig

    @property
    def trial_energies(self) -> List[float]:
        return [x.energy for x in self.trials]

    @property
    def best_trial(self) -> int:
        return min(self.trials, key=lambda x: (x.energy, x.trial)).trial


@dataclass(frozen=True)
class TrotterPlan:
    """
    Fixed angles of one first-order Trotter step of exp(-i H_S dt).
    """
    dt: float
    theta_a: float
    theta_b: float
    theta_c: float
    vartheta: float
    boundary: Boundary
    wrap_sign: float = 1.0


@dataclass(frozen=True)
class GreenConfig:
    """
    Damped, truncated time integral that turns real-time overlaps into the
    zero-frequency Green function. The cutoff is T = tdelta / delta.
    """
    delta: float
    tdelta: float = 5.0
    dt: float = 0.01
    backend: OverlapBackend = OverlapBackend.DIRECT
    shots: Optional[int] = None
    seed: int = 0
    propagator: PropagatorKind = PropagatorKind.TROTTER

    def __post_init__(self) -> None:
        if self.delta <= 0:
            raise InvalidArgumentException("Damping delta must be positive.")
        if self.dt <= 0:
            raise InvalidArgumentException("Time step dt must be positive.")
        if self.tdelta < 1:
            raise InvalidArgumentException(f"T*delta must be at least 1, got {self.tdelta}.")
        if self.shots is not None and self.shots < 1:
            raise InvalidArgumentException("shots must be positive.")
        if self.tdelta < 3:
            warn(f"T*delta = {self.tdelta} is small; the truncated integral may be inaccurate.")

    @property
    def cutoff(self) -> float:
        return self.tdelta / self.delta

    @property
    def n_steps(self) -> int:
        return max(1, int(round(self.cutoff / self.dt)))


@dataclass(frozen=True, eq=False)
class ZkSeries:
    """
    Many-body Anderson pseudo vector Z_k on the grid k = 2πl/N, l = -N/2..N/2-1.
    """
    momenta: np.ndarray
    values: np.ndarray

    def __post_init__(self) -> None:
        if self.momenta.shape != self.values.shape:
            raise InvalidArgumentException("Momenta and Z_k values differ in length.")
        if not np.all(np.isfinite(self.values)):
            raise InvalidArgumentException("Z_k contains non-finite values.")

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True, eq=False)
class WindingResult:
    winding: int
    raw: float
    increments: np.ndarray
    min_abs: float


@dataclass(frozen=True, eq=False)
class TbDispersion:
    """
    Tight-binding pseudo vector (Δ_k, ε_k), its polar angle φ_k and the
    bogolon energy ξ_k on a momentum grid.
    """
    momenta: np.ndarray
    epsilon: np.ndarray
    delta: np.ndarray
    phi: np.ndarray
    xi: np.ndarray


@dataclass(frozen=True, eq=False)
class MzmProfile:
    """
    Inter-parity transfer amplitudes |<gs+|γ_j^τ|gs->| per site.
    """
    amplitude_s: np.ndarray
    amplitude_a: np.ndarray
    energy_plus: float
    energy_minus: float
    couplings: CouplingSet
    source: str
    converged: bool = True

    @property
    def n_sites(self) -> int:
        return len(self.amplitude_s)


@dataclass(frozen=True, eq=False)
class TbMajoranaRef:
    """
    SVD of the tridiagonal Majorana coupling matrix with ascending singular
    values; ``left``/``right`` hold |U| and |V| column by column.
    """
    singular_values: np.ndarray
    left: np.ndarray
    right: np.ndarray

    @property
    def zero_mode_left(self) -> np.ndarray:
        return self.left[:, 0]

    @property
    def zero_mode_right(self) -> np.ndarray:
        return self.right[:, 0]


@dataclass(frozen=True)
class RunManifest:
    """
    Represents one CLI run and the files it produced.
    """
    command: str
    config: Dict[str, Any]
    version: str
    started_at: datetime
    elapsed_seconds: float
    outputs: Dict[str, str]
