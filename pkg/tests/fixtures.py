import numpy as np

from kitaevqc.models import AnnealingSchedule, CouplingSet, VqeConfig
from kitaevqc.qsim import StateVector

# (Jx, Jy, Jz, hz) points used across the suite
IDEAL = CouplingSet.from_spin(1.0, 0.0, 0.0, 0.0)
ANISOTROPIC = CouplingSet.from_spin(1.0, 0.5, 0.0, 0.0)
WEAK_FIELD = CouplingSet.from_spin(1.0, 0.5, 0.0, 0.01)
TRIVIAL = CouplingSet.from_spin(1.0, 0.5, 0.0, 1.0)
GENERIC = CouplingSet.from_spin(1.0, 0.5, 0.3, 0.2)
FIELD_ONLY = CouplingSet.from_spin(0.0, 0.0, 0.0, 1.0)

TB_TOPOLOGICAL = CouplingSet.from_fermion(1.0, 0.5, 0.0, 0.3)
TB_TRIVIAL = CouplingSet.from_fermion(1.0, 0.5, 0.0, 3.0)
TB_GAPLESS = CouplingSet.from_fermion(1.0, 0.0, 0.0, 0.0)

# enough layers and restarts to reach the exact N=4 ground state
ACCURATE_VQE = VqeConfig(layers=3, trials=6, tolerance=1e-12, annealing=AnnealingSchedule(steps=50), seed=11)

CONFIG = """# ideal Kitaev point
n_sites = 4
jx = 1.0
jy = 0.0   # no YY exchange
boundary = open
"""

MIXED_CONFIG = """jx = 1.0
t = 0.5
"""

REPORT = """Runs:
- tb: 4 files
"""


def random_state(n_qubits: int, seed: int) -> StateVector:
    rng = np.random.default_rng(seed)
    amplitudes = rng.normal(size=1 << n_qubits) + 1j * rng.normal(size=1 << n_qubits)
    return StateVector(amplitudes / np.linalg.norm(amplitudes))


def random_angles(size: int, seed: int) -> np.ndarray:
    return np.random.default_rng(seed).uniform(-np.pi, np.pi, size=size)
