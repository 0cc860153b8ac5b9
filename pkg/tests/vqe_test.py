import math
import unittest

import numpy as np

from kitaevqc.ed import ground_in_parity
from kitaevqc.models import (EVEN, ODD, AnnealingSchedule, AnsatzAngles, CouplingSet, InvalidArgumentException,
                             UnsupportedSizeException, VqeConfig, count_angles)
from kitaevqc.vqe import (AnsatzKernel, EnergyFunction, build_ansatz, energy, gradient, measured_parity, optimize,
                          prepare)
from tests import fixtures

QUICK = VqeConfig(layers=1, trials=2, annealing=AnnealingSchedule(steps=20), seed=7)


class AnsatzTest(unittest.TestCase):

    def test_angle_layout(self) -> None:
        angles = AnsatzAngles.zeros(4, 2)
        self.assertEqual(count_angles(4, 2), 26)
        labels = list(angles.labels())
        self.assertEqual(len(labels), 26)
        self.assertEqual(labels[0], (1, 1, 'a'))
        self.assertEqual(labels[9], (1, 1, 'site'))
        self.assertEqual(labels[13], (2, 1, 'a'))

    def test_wrong_angle_count(self) -> None:
        with self.assertRaises(InvalidArgumentException):
            AnsatzAngles.from_flat(4, 1, np.zeros(12))

    def test_unsupported_size(self) -> None:
        with self.assertRaises(UnsupportedSizeException):
            build_ansatz(6, 1, AnsatzAngles.zeros(6, 1), EVEN)
        with self.assertRaises(UnsupportedSizeException):
            EnergyFunction(fixtures.GENERIC, 6, 1, EVEN)

    def test_parity_is_conserved(self) -> None:
        for parity in (EVEN, ODD):
            angles = AnsatzAngles.from_flat(8, 2, fixtures.random_angles(count_angles(8, 2), seed=3))
            state = prepare(build_ansatz(8, 2, angles, parity))
            self.assertAlmostEqual(measured_parity(state), parity, places=10)
            self.assertTrue(state.is_normalized())

    def test_zero_angles_keep_reference_state(self) -> None:
        self.assertAlmostEqual(energy(fixtures.GENERIC, 4, 1, AnsatzAngles.zeros(4, 1), EVEN), -0.625)
        self.assertAlmostEqual(energy(fixtures.GENERIC, 4, 1, AnsatzAngles.zeros(4, 1), ODD), -0.275)

    def test_gradient_matches_parameter_shift(self) -> None:
        values = fixtures.random_angles(count_angles(4, 1), seed=5)
        angles = AnsatzAngles.from_flat(4, 1, values)
        grad = gradient(fixtures.GENERIC, 4, 1, angles, EVEN)
        # zz and site generators have eigenvalues ±1, so a ±π/4 shift is exact
        for index in (2, 5, 8, 9, 12):
            shifted = []
            for sign in (1, -1):
                moved = values.copy()
                moved[index] += sign * math.pi / 4
                shifted.append(energy(fixtures.GENERIC, 4, 1, AnsatzAngles.from_flat(4, 1, moved), EVEN))
            self.assertAlmostEqual(grad[index], shifted[0] - shifted[1], places=10)

    def test_gradient_matches_finite_differences(self) -> None:
        for parity in (EVEN, ODD):
            function = EnergyFunction(fixtures.GENERIC, 8, 2, parity)
            values = fixtures.random_angles(count_angles(8, 2), seed=11)
            np.testing.assert_allclose(function.gradient(values), function.finite_difference(values), atol=1e-6)

    def test_finite_difference_step(self) -> None:
        angles = AnsatzAngles.from_flat(4, 1, fixtures.random_angles(count_angles(4, 1), seed=2))
        exact = gradient(fixtures.GENERIC, 4, 1, angles, ODD)
        approximate = gradient(fixtures.GENERIC, 4, 1, angles, ODD, step=1e-5)
        np.testing.assert_allclose(exact, approximate, atol=1e-6)

    def test_kernel_state_matches_circuit(self) -> None:
        for parity in (EVEN, ODD):
            values = fixtures.random_angles(count_angles(8, 2), seed=4)
            circuit = build_ansatz(8, 2, AnsatzAngles.from_flat(8, 2, values), parity)
            kernel = AnsatzKernel(8, 2, parity)
            np.testing.assert_allclose(kernel.amplitudes(values), prepare(circuit).amplitudes, atol=1e-12)

    def test_kernel_energy_matches_gradient_pass(self) -> None:
        function = EnergyFunction(fixtures.GENERIC, 12, 1, EVEN)
        values = fixtures.random_angles(count_angles(12, 1), seed=8)
        value, _ = function.kernel.energy_and_gradient(values, function.hamiltonian)
        self.assertAlmostEqual(value, function(values), places=12)

    def test_kernel_rejects_wrong_angle_count(self) -> None:
        with self.assertRaises(InvalidArgumentException):
            AnsatzKernel(4, 1, EVEN).amplitudes(np.zeros(12))


class OptimizeTest(unittest.TestCase):

    def test_field_only_odd_sector(self) -> None:
        result = optimize(fixtures.FIELD_ONLY, 4, QUICK, ODD)
        self.assertAlmostEqual(result.energy, -1.0, places=6)
        self.assertAlmostEqual(result.parity_measured, -1.0, places=10)
        self.assertEqual(len(result.trials), 2)
        self.assertEqual(result.energy, min(result.trial_energies))

    def test_reaches_exact_ground_energy(self) -> None:
        cs = CouplingSet.from_spin(1.0, 0.5, 0.2, 0.1)
        for parity in (EVEN, ODD):
            exact, _ = ground_in_parity(cs, 4, parity=parity)
            result = optimize(cs, 4, fixtures.ACCURATE_VQE, parity)
            self.assertLess(abs(result.energy - exact), 1e-4)
            self.assertAlmostEqual(result.parity_measured, parity, places=10)

    def test_variational_bound(self) -> None:
        exact, _ = ground_in_parity(fixtures.GENERIC, 4, parity=EVEN)
        result = optimize(fixtures.GENERIC, 4, QUICK, EVEN)
        self.assertGreaterEqual(result.energy, exact - 1e-9)

    def test_threads_do_not_change_result(self) -> None:
        serial = optimize(fixtures.GENERIC, 4, QUICK, EVEN, threads=1)
        parallel = optimize(fixtures.GENERIC, 4, QUICK, EVEN, threads=2)
        self.assertEqual(serial.trial_energies, parallel.trial_energies)
        np.testing.assert_array_equal(serial.angles.values, parallel.angles.values)
        self.assertEqual(serial.best_trial, parallel.best_trial)

    def test_progress_sees_every_trial(self) -> None:
        seen = []
        optimize(fixtures.FIELD_ONLY, 4, QUICK, EVEN, progress=lambda x: seen.append(x.trial))
        self.assertEqual(seen, [0, 1])


if __name__ == '__main__':
    unittest.main()
