"""
First-order Trotterized real-time evolution e^{-iH_S t}.

One step is an ansatz layer with angles fixed by the couplings:
θ_a = (Jx+Jy)dt/4, θ_b = (Jx-Jy)dt/4, θ_c = Jz dt/4, ϑ = hz dt/2.
"""
from abc import ABC, abstractmethod
from typing import List, Optional

import numpy as np
import scipy.linalg

from kitaevqc.hamiltonian import bonds, hamiltonian_matrix, spin_hamiltonian
from kitaevqc.models import Boundary, CouplingSet, InvalidArgumentException, TrotterPlan
from kitaevqc.qsim import Circuit, Gate, GateKind, StateVector
from kitaevqc.vqe import layer_gates

DEFAULT_DT = 0.01
COMMENSURATE_TOLERANCE = 1e-9


def trotter_plan(cs: CouplingSet, dt: float = DEFAULT_DT, boundary: Boundary = Boundary.OPEN,
                 wrap_sign: float = 1.0) -> TrotterPlan:
    if dt <= 0:
        raise InvalidArgumentException(f"Time step must be positive, got {dt}.")
    return TrotterPlan(dt=dt, theta_a=(cs.jx + cs.jy) * dt / 4, theta_b=(cs.jx - cs.jy) * dt / 4,
                       theta_c=cs.jz * dt / 4, vartheta=cs.hz * dt / 2, boundary=boundary, wrap_sign=wrap_sign)


def plan_gates(plan: TrotterPlan, n_sites: int, branch_control: Optional[int] = None) -> List[Gate]:
    """
    Gates of one step. With ``branch_control`` the wrap bond's XX±YY gates
    are conditioned on that qubit: ``plan.wrap_sign`` applies when it is |1>
    and the opposite sign when it is |0>.
    """
    pairs = bonds(n_sites, plan.boundary)
    wrap = (n_sites - 1, 0) if plan.boundary == Boundary.PERIODIC else None
    angles = []
    for pair in pairs:
        sign = plan.wrap_sign if pair == wrap and branch_control is None else 1.0
        angles.append((sign * plan.theta_a, sign * plan.theta_b, plan.theta_c))
    gates = layer_gates(n_sites, angles, [plan.vartheta] * n_sites, plan.boundary)
    if branch_control is None or wrap is None:
        return gates
    result: List[Gate] = []
    for gate in gates:
        if gate.targets == wrap and gate.kind in (GateKind.XX_PLUS_YY, GateKind.XX_MINUS_YY):
            for state, sign in ((1, plan.wrap_sign), (0, -plan.wrap_sign)):
                result.append(Gate(gate.kind, gate.targets, (branch_control,), angle=sign * gate.angle,
                                   control_state=state))
        else:
            result.append(gate)
    return result


def trotter_step(cs: CouplingSet, n_sites: int, dt: float = DEFAULT_DT, boundary: Boundary = Boundary.OPEN,
                 wrap_sign: float = 1.0) -> List[Gate]:
    return plan_gates(trotter_plan(cs, dt, boundary, wrap_sign), n_sites)


def step_count(t: float, dt: float) -> int:
    """
    Number of steps covering ``t``; t must be a whole multiple of dt.
    """
    if t < 0:
        raise InvalidArgumentException(f"Evolution time must be non-negative, got {t}.")
    if dt <= 0:
        raise InvalidArgumentException(f"Time step must be positive, got {dt}.")
    ratio = t / dt
    steps = int(round(ratio))
    if abs(ratio - steps) > COMMENSURATE_TOLERANCE * max(1.0, ratio):
        raise InvalidArgumentException(f"t={t} is not a whole number of steps dt={dt}.")
    return steps


class StepPropagator(ABC):
    """
    Advances a (B, 2^n) block of states by one time step, in place.
    """

    @abstractmethod
    def step(self, psi: np.ndarray) -> np.ndarray:
        pass

    def advance(self, psi: np.ndarray, steps: int) -> np.ndarray:
        for _ in range(steps):
            self.step(psi)
        return psi


class TrotterPropagator(StepPropagator):

    def __init__(self, plan: TrotterPlan, n_sites: int, n_qubits: Optional[int] = None,
                 branch_control: Optional[int] = None):
        self.plan = plan
        self.circuit = Circuit(n_qubits or n_sites, plan_gates(plan, n_sites, branch_control))

    def step(self, psi: np.ndarray) -> np.ndarray:
        return self.circuit.apply_batch(psi)


class ExactPropagator(StepPropagator):
    """
    Dense e^{-iH dt} on the lowest ``n_sites`` qubits of the register.
    Periodic chains use the fermion Hamiltonian, which carries the
    parity-dependent boundary twist by itself.
    """

    def __init__(self, cs: CouplingSet, n_sites: int, dt: float = DEFAULT_DT, boundary: Boundary = Boundary.OPEN):
        self.n_sites = n_sites
        self.unitary = scipy.linalg.expm(-1j * dt * hamiltonian_matrix(cs, n_sites, boundary))

    def step(self, psi: np.ndarray) -> np.ndarray:
        view = psi.reshape(-1, 1 << self.n_sites)
        view[...] = view @ self.unitary.T
        return psi


def evolve(state: StateVector, cs: CouplingSet, t: float, dt: float = DEFAULT_DT,
           boundary: Boundary = Boundary.OPEN, wrap_sign: float = 1.0) -> StateVector:
    """
    Applies round(t/dt) Trotter steps to a copy of ``state``.
    """
    steps = step_count(t, dt)
    result = state.copy()
    if steps:
        TrotterPropagator(trotter_plan(cs, dt, boundary, wrap_sign), state.n_qubits).advance(result.batch(), steps)
    return result


def exact_evolution(state: StateVector, cs: CouplingSet, t: float, boundary: Boundary = Boundary.OPEN,
                    wrap_sign: float = 1.0) -> StateVector:
    """
    Dense reference e^{-iH_S t}|state> for the spin chain with the given wrap sign.
    """
    matrix = spin_hamiltonian(cs, state.n_qubits, boundary, wrap_sign).to_dense()
    return StateVector(scipy.linalg.expm(-1j * t * matrix) @ state.amplitudes)

