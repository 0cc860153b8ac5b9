import unittest

import numpy as np
import scipy.linalg

from kitaevqc.evolve import (ExactPropagator, TrotterPropagator, evolve, exact_evolution, plan_gates, step_count,
                             trotter_plan, trotter_step)
from kitaevqc.hamiltonian import spin_hamiltonian
from kitaevqc.models import Boundary, InvalidArgumentException
from kitaevqc.qsim import GateKind, run_gates
from tests import fixtures


def error(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.linalg.norm(a - b))


class TrotterPlanTest(unittest.TestCase):

    def test_angles(self) -> None:
        plan = trotter_plan(fixtures.GENERIC, 0.02)
        self.assertAlmostEqual(plan.theta_a, 0.0075)
        self.assertAlmostEqual(plan.theta_b, 0.0025)
        self.assertAlmostEqual(plan.theta_c, 0.0015)
        self.assertAlmostEqual(plan.vartheta, 0.002)

    def test_invalid_step(self) -> None:
        with self.assertRaises(InvalidArgumentException):
            trotter_plan(fixtures.GENERIC, 0.0)

    def test_step_count(self) -> None:
        self.assertEqual(step_count(1.0, 0.01), 100)
        self.assertEqual(step_count(0.0, 0.01), 0)
        with self.assertRaises(InvalidArgumentException):
            step_count(0.015, 0.01)
        with self.assertRaises(InvalidArgumentException):
            step_count(-1.0, 0.01)

    def test_gate_order(self) -> None:
        gates = trotter_step(fixtures.GENERIC, 4)
        kinds = [g.kind for g in gates[:3]]
        self.assertEqual(kinds, [GateKind.ZZ, GateKind.XX_MINUS_YY, GateKind.XX_PLUS_YY])
        self.assertEqual([g.targets for g in gates[:9:3]], [(0, 1), (2, 3), (1, 2)])
        self.assertEqual(len(gates), 3 * 3 + 4)

    def test_branch_controlled_wrap_bond(self) -> None:
        plan = trotter_plan(fixtures.GENERIC, 0.01, Boundary.PERIODIC, wrap_sign=-1.0)
        gates = plan_gates(plan, 4, branch_control=4)
        controlled = [g for g in gates if g.controls]
        self.assertEqual(len(controlled), 4)
        for g in controlled:
            self.assertEqual(g.targets, (3, 0))
            sign = -1.0 if g.control_state == 1 else 1.0
            expected = plan.theta_a if g.kind == GateKind.XX_PLUS_YY else plan.theta_b
            self.assertAlmostEqual(g.angle, sign * expected)


class EvolveTest(unittest.TestCase):

    def test_step_error_is_second_order(self) -> None:
        state = fixtures.random_state(4, 2)
        h = spin_hamiltonian(fixtures.GENERIC, 4).to_dense()
        errors = []
        for dt in (0.02, 0.01):
            exact = scipy.linalg.expm(-1j * dt * h) @ state.amplitudes
            errors.append(error(run_gates(trotter_step(fixtures.GENERIC, 4, dt), state).amplitudes, exact))
        self.assertAlmostEqual(errors[0] / errors[1], 4.0, delta=0.5)

    def test_global_error_is_first_order(self) -> None:
        state = fixtures.random_state(4, 2)
        exact = exact_evolution(state, fixtures.GENERIC, 1.0).amplitudes
        ratio = error(evolve(state, fixtures.GENERIC, 1.0, 0.02).amplitudes, exact) / \
            error(evolve(state, fixtures.GENERIC, 1.0, 0.01).amplitudes, exact)
        self.assertGreaterEqual(ratio, 1.7)
        self.assertLessEqual(ratio, 2.3)

    def test_evolve_leaves_input_untouched(self) -> None:
        state = fixtures.random_state(4, 8)
        before = state.amplitudes.copy()
        evolve(state, fixtures.GENERIC, 0.1, 0.01)
        np.testing.assert_array_equal(state.amplitudes, before)

    def test_exact_propagator(self) -> None:
        state = fixtures.random_state(4, 6)
        block = state.amplitudes.reshape(1, -1).copy()
        ExactPropagator(fixtures.GENERIC, 4, 0.05).advance(block, 4)
        np.testing.assert_allclose(block[0], exact_evolution(state, fixtures.GENERIC, 0.2).amplitudes, atol=1e-10)

    def test_propagator_matches_evolve(self) -> None:
        state = fixtures.random_state(4, 1)
        block = state.amplitudes.reshape(1, -1).copy()
        TrotterPropagator(trotter_plan(fixtures.GENERIC, 0.01), 4).advance(block, 10)
        np.testing.assert_allclose(block[0], evolve(state, fixtures.GENERIC, 0.1, 0.01).amplitudes, atol=1e-12)

    def test_evolution_composes(self) -> None:
        state = fixtures.random_state(4, 3)
        first = evolve(state, fixtures.GENERIC, 0.3, 0.1)
        both = evolve(first, fixtures.GENERIC, 0.5, 0.1)
        np.testing.assert_allclose(both.amplitudes, evolve(state, fixtures.GENERIC, 0.8, 0.1).amplitudes, atol=1e-14)

    def test_norm_is_kept_over_many_steps(self) -> None:
        state = fixtures.random_state(4, 9)
        result = evolve(state, fixtures.GENERIC, 100.0, 0.01)
        self.assertLess(abs(result.norm() - 1.0), 1e-9)


if __name__ == '__main__':
    unittest.main()
