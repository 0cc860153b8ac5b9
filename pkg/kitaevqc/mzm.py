"""
Majorana zero modes: inter-parity transfer amplitudes |<gs+|γ_j^τ|gs->|
and the tight-binding singular-value reference.
"""
from typing import Callable, Optional, Tuple

import numpy as np
import scipy.linalg

from kitaevqc.ed import ground_in_parity
from kitaevqc.hamiltonian import majorana_string
from kitaevqc.models import (EVEN, ODD, Boundary, CouplingSet, InvalidArgumentException, MajoranaMode, MzmProfile,
                             TbMajoranaRef, TransferBackend, TrialOutcome, VqeConfig, warn)
from kitaevqc.qsim import Circuit, apply_pauli, prob_basis
from kitaevqc.topo import GroundPreparation, ground_state, state_parity
from kitaevqc.vqe import build_ansatz, optimize


def transfer_amp(gs_plus_prep: GroundPreparation, gs_minus_prep: GroundPreparation, cs: CouplingSet, j: int,
                 mode: MajoranaMode, backend: TransferBackend = TransferBackend.DIRECT) -> float:
    """
    |<gs+|γ_j^mode|gs->|.

    The circuit backend prepares |gs->, applies γ as a Pauli string, undoes
    the |gs+> preparation and reads sqrt(P(0...0)); it needs ``gs_plus_prep``
    as a Circuit.
    """
    n = gs_plus_prep.n_qubits
    plus = ground_state(gs_plus_prep, n)
    minus = ground_state(gs_minus_prep, n)
    if state_parity(plus) == state_parity(minus):
        raise InvalidArgumentException("Transfer amplitude needs preparations of opposite parity.")
    gamma = majorana_string(j, mode, n)
    if backend == TransferBackend.DIRECT:
        return float(abs(np.vdot(plus.amplitudes, apply_pauli(minus, gamma).amplitudes)))
    if not isinstance(gs_plus_prep, Circuit):
        raise InvalidArgumentException("The circuit backend needs the even-parity preparation as a circuit.")
    state = gs_plus_prep.inverse().run(apply_pauli(minus, gamma))
    return float(np.sqrt(prob_basis(state, '0' * n)))


def _profile(plus: GroundPreparation, minus: GroundPreparation, cs: CouplingSet, n_sites: int,
             backend: TransferBackend) -> Tuple[np.ndarray, np.ndarray]:
    sites = range(1, n_sites + 1)
    amplitude_s = np.array([transfer_amp(plus, minus, cs, j, MajoranaMode.S, backend) for j in sites])
    amplitude_a = np.array([transfer_amp(plus, minus, cs, j, MajoranaMode.A, backend) for j in sites])
    return np.clip(amplitude_s, 0.0, 1.0), np.clip(amplitude_a, 0.0, 1.0)


def profile(cs: CouplingSet, n_sites: int, config: VqeConfig, backend: TransferBackend = TransferBackend.DIRECT,
            threads: int = 1, progress: Optional[Callable[[TrialOutcome], None]] = None) -> MzmProfile:
    """
    MZM profile from the two parity-sector VQE ground states.
    """
    even = optimize(cs, n_sites, config, EVEN, threads, progress)
    odd = optimize(cs, n_sites, config, ODD, threads, progress)
    plus = build_ansatz(n_sites, config.layers, even.angles, EVEN)
    minus = build_ansatz(n_sites, config.layers, odd.angles, ODD)
    amplitude_s, amplitude_a = _profile(plus, minus, cs, n_sites, backend)
    if not (even.converged and odd.converged):
        warn("VQE did not converge in every parity sector; the profile is flagged.")
    return MzmProfile(amplitude_s=amplitude_s, amplitude_a=amplitude_a, energy_plus=even.energy,
                      energy_minus=odd.energy, couplings=cs, source='vqe',
                      converged=even.converged and odd.converged)


def ed_profile(cs: CouplingSet, n_sites: int, boundary: Boundary = Boundary.OPEN) -> MzmProfile:
    """
    MZM profile from the exact parity-sector ground states.
    """
    energy_plus, plus = ground_in_parity(cs, n_sites, boundary, EVEN)
    energy_minus, minus = ground_in_parity(cs, n_sites, boundary, ODD)
    amplitude_s, amplitude_a = _profile(plus, minus, cs, n_sites, TransferBackend.DIRECT)
    return MzmProfile(amplitude_s=amplitude_s, amplitude_a=amplitude_a, energy_plus=energy_plus,
                      energy_minus=energy_minus, couplings=cs, source='ed')


def majorana_matrix(cs: CouplingSet, n_sites: int) -> np.ndarray:
    """
    Tridiagonal N×N coupling matrix: η on the diagonal, g- above, g+ below.
    """
    return (np.diag(np.full(n_sites, cs.eta)) + np.diag(np.full(n_sites - 1, cs.g_minus), 1)
            + np.diag(np.full(n_sites - 1, cs.g_plus), -1))


def tb_svd(cs: CouplingSet, n_sites: int) -> TbMajoranaRef:
    """
    SVD of the Majorana coupling matrix, singular values ascending.
    """
    if cs.zeta != 0:
        warn(f"zeta={cs.zeta} is ignored by the tight-binding reference.")
    u, s, vh = scipy.linalg.svd(majorana_matrix(cs, n_sites))
    return TbMajoranaRef(singular_values=s[::-1].copy(), left=np.abs(u[:, ::-1]), right=np.abs(vh[::-1].T))


def tb_spectrum(cs: CouplingSet, n_sites: int) -> np.ndarray:
    """
    All 2^N levels -2 Σ_l λ_l (ñ_l - 1/2), ascending.
    """
    singular_values = tb_svd(cs, n_sites).singular_values
    occupations = (np.arange(1 << n_sites)[:, None] >> np.arange(n_sites)) & 1
    return np.sort(-2.0 * (occupations - 0.5) @ singular_values)


def edge_state(profile: MzmProfile) -> Tuple[int, int]:
    """
    Sites (1-indexed) where the s and a amplitudes peak.
    """
    return int(np.argmax(profile.amplitude_s)) + 1, int(np.argmax(profile.amplitude_a)) + 1
