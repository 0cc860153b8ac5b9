import unittest

import numpy as np

from kitaevqc.ed import full_spectrum, ground_in_parity
from kitaevqc.models import (EVEN, ODD, AnsatzAngles, InvalidArgumentException, MajoranaMode, TransferBackend,
                             count_angles)
from kitaevqc.mzm import ed_profile, edge_state, majorana_matrix, profile, tb_spectrum, tb_svd, transfer_amp
from kitaevqc.vqe import build_ansatz
from tests import fixtures


class TransferAmplitudeTest(unittest.TestCase):

    def test_ideal_point(self) -> None:
        profile = ed_profile(fixtures.IDEAL, 4)
        np.testing.assert_allclose(profile.amplitude_s, [1.0, 0.0, 0.0, 0.0], atol=1e-10)
        np.testing.assert_allclose(profile.amplitude_a, [0.0, 0.0, 0.0, 1.0], atol=1e-10)
        self.assertAlmostEqual(profile.energy_plus, profile.energy_minus)
        self.assertEqual(profile.source, 'ed')
        self.assertEqual(edge_state(profile), (1, 4))

    def test_circuit_backend_matches_direct(self) -> None:
        size = count_angles(4, 1)
        plus = build_ansatz(4, 1, AnsatzAngles.from_flat(4, 1, fixtures.random_angles(size, seed=1)), EVEN)
        minus = build_ansatz(4, 1, AnsatzAngles.from_flat(4, 1, fixtures.random_angles(size, seed=2)), ODD)
        for j in range(1, 5):
            for mode in MajoranaMode:
                direct = transfer_amp(plus, minus, fixtures.GENERIC, j, mode)
                circuit = transfer_amp(plus, minus, fixtures.GENERIC, j, mode, TransferBackend.CIRCUIT)
                self.assertAlmostEqual(direct, circuit, places=10)

    def test_circuit_backend_needs_a_circuit(self) -> None:
        _, plus = ground_in_parity(fixtures.GENERIC, 4, parity=EVEN)
        _, minus = ground_in_parity(fixtures.GENERIC, 4, parity=ODD)
        with self.assertRaises(InvalidArgumentException):
            transfer_amp(plus, minus, fixtures.GENERIC, 1, MajoranaMode.S, TransferBackend.CIRCUIT)

    def test_same_parity(self) -> None:
        _, plus = ground_in_parity(fixtures.GENERIC, 4, parity=EVEN)
        with self.assertRaises(InvalidArgumentException):
            transfer_amp(plus, plus, fixtures.GENERIC, 1, MajoranaMode.S)

    def test_profile_follows_singular_vectors(self) -> None:
        for cs in (fixtures.ANISOTROPIC, fixtures.TB_TOPOLOGICAL, fixtures.TB_TRIVIAL):
            profile = ed_profile(cs, 8)
            reference = tb_svd(cs, 8)
            np.testing.assert_allclose(profile.amplitude_s, reference.zero_mode_left, atol=1e-8)
            np.testing.assert_allclose(profile.amplitude_a, reference.zero_mode_right, atol=1e-8)

    def test_swap_exchanges_edges(self) -> None:
        self.assertEqual(edge_state(ed_profile(fixtures.ANISOTROPIC, 8)), (1, 8))
        self.assertEqual(edge_state(ed_profile(fixtures.ANISOTROPIC.swap_xy(), 8)), (8, 1))

    def test_variational_profile_matches_exact(self) -> None:
        variational = profile(fixtures.IDEAL, 4, fixtures.ACCURATE_VQE)
        exact = ed_profile(fixtures.IDEAL, 4)
        self.assertEqual(variational.source, 'vqe')
        np.testing.assert_allclose(variational.amplitude_s, exact.amplitude_s, atol=1e-2)
        np.testing.assert_allclose(variational.amplitude_a, exact.amplitude_a, atol=1e-2)
        self.assertAlmostEqual(variational.energy_plus, exact.energy_plus, delta=1e-4)
        self.assertAlmostEqual(variational.energy_minus, exact.energy_minus, delta=1e-4)


class TightBindingReferenceTest(unittest.TestCase):

    def test_majorana_matrix(self) -> None:
        matrix = majorana_matrix(fixtures.TB_TOPOLOGICAL, 3)
        np.testing.assert_allclose(matrix, [[0.15, 0.25, 0.0], [0.75, 0.15, 0.25], [0.0, 0.75, 0.15]])

    def test_ideal_point_zero_modes(self) -> None:
        reference = tb_svd(fixtures.IDEAL, 6)
        self.assertAlmostEqual(reference.singular_values[0], 0.0)
        np.testing.assert_allclose(reference.zero_mode_left, np.eye(6)[0], atol=1e-12)
        np.testing.assert_allclose(reference.zero_mode_right, np.eye(6)[5], atol=1e-12)
        self.assertTrue(np.all(np.diff(reference.singular_values) >= 0))

    def test_trivial_chain_is_gapped(self) -> None:
        self.assertGreater(tb_svd(fixtures.TB_TRIVIAL, 8).singular_values[0], 0.1)

    def test_spectrum_matches_exact_diagonalization(self) -> None:
        for cs in (fixtures.TB_TOPOLOGICAL, fixtures.TRIVIAL):
            np.testing.assert_allclose(tb_spectrum(cs, 6), full_spectrum(cs, 6).energies, atol=1e-10)


if __name__ == '__main__':
    unittest.main()
