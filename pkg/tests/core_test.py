import json
import os
import shutil
import tempfile
import unittest

import numpy as np
from importlib_resources import files

from kitaevqc import KitaevRunner
from kitaevqc.core import CACHE_DIR
from kitaevqc.ed import ground_in_parity
from kitaevqc.models import (EVEN, ODD, AnnealingSchedule, Boundary, CouplingSet, GroundStateSource,
                             IllDefinedWindingException, InvalidArgumentException, ResourceLimitException, VqeConfig)
from kitaevqc.mzm import tb_spectrum
from kitaevqc.storage import read_angles, sha256_file
from kitaevqc.topo import tb_ground_energy
from kitaevqc.vqe import build_ansatz, measured_parity, prepare
from tests import fixtures


def read_json(directory: str, filename: str) -> dict:
    with open(os.path.join(directory, filename)) as f:
        return json.load(f)


class CoreTestCase(unittest.TestCase):

    directory_name: str

    def setUp(self) -> None:
        self.directory_name = tempfile.mkdtemp()
        print("Created directory: " + self.directory_name)

    def tearDown(self) -> None:
        print("Removing directory: " + self.directory_name)
        shutil.rmtree(self.directory_name)

    def test_tb(self) -> None:
        runner = KitaevRunner(self.directory_name)
        summary = runner.run_tb(fixtures.TB_TOPOLOGICAL, 4)
        self.assertEqual(summary['winding'], -1)
        self.assertAlmostEqual(summary['ground_energy'], tb_spectrum(fixtures.TB_TOPOLOGICAL, 4).min())
        self.assertEqual(read_json(self.directory_name, 'tb.json')['config']['boundary'], 'open')
        manifest = read_json(self.directory_name, 'tb-manifest.json')
        self.assertEqual(sorted(manifest['outputs']),
                         ['tb-dispersion.csv', 'tb-spectrum.csv', 'tb-svd.csv', 'tb.json'])
        for name, digest in manifest['outputs'].items():
            self.assertEqual(digest, sha256_file(os.path.join(self.directory_name, name)))
        with open(os.path.join(self.directory_name, 'tb-svd.csv')) as f:
            self.assertEqual(f.readline(), "# format: tb-svd/1.0; manifest: tb-manifest.json\n")
            self.assertEqual(f.readline(), "site,lambda,u1,v1\n")

    def test_tb_periodic(self) -> None:
        summary = KitaevRunner(self.directory_name).run_tb(fixtures.TB_TOPOLOGICAL, 4, Boundary.PERIODIC)
        self.assertAlmostEqual(summary['ground_energy'], tb_ground_energy(fixtures.TB_TOPOLOGICAL, 4))
        self.assertIsNone(summary['singular_values'])
        manifest = read_json(self.directory_name, 'tb-manifest.json')
        self.assertEqual(sorted(manifest['outputs']), ['tb-dispersion.csv', 'tb.json'])
        self.assertEqual(read_json(self.directory_name, 'tb.json')['config']['boundary'], 'periodic')

    def test_tb_gapless_still_writes_summary(self) -> None:
        runner = KitaevRunner(self.directory_name)
        with self.assertRaises(IllDefinedWindingException):
            runner.run_tb(fixtures.TB_GAPLESS, 4)
        self.assertIsNone(read_json(self.directory_name, 'tb.json')['winding'])
        self.assertTrue(os.path.isfile(os.path.join(self.directory_name, 'tb-manifest.json')))

    def test_ed(self) -> None:
        summary = KitaevRunner(self.directory_name).run_ed(fixtures.FIELD_ONLY, 4, levels=2)
        np.testing.assert_allclose(summary['energies']['even'], [-2.0, 0.0], atol=1e-12)
        np.testing.assert_allclose(summary['energies']['odd'], [-1.0, -1.0], atol=1e-12)
        self.assertAlmostEqual(summary['ground_energy'], -2.0)
        self.assertNotIn('tb_ground_energy', summary)

    def test_ed_periodic(self) -> None:
        summary = KitaevRunner(self.directory_name).run_ed(fixtures.TB_TOPOLOGICAL, 4, Boundary.PERIODIC)
        self.assertAlmostEqual(summary['ground_energy'], summary['tb_ground_energy'])
        self.assertAlmostEqual(read_json(self.directory_name, 'ed.json')['ground_energy'], summary['ground_energy'])

    def test_mzm(self) -> None:
        result = KitaevRunner(self.directory_name).run_mzm(fixtures.IDEAL, 4)
        self.assertAlmostEqual(result.amplitude_s[0], 1.0)
        data = read_json(self.directory_name, 'mzm.json')
        self.assertEqual(data['source'], 'ed')
        self.assertAlmostEqual(data['max_amplitude_a'], 1.0)
        with open(os.path.join(self.directory_name, 'mzm.csv')) as f:
            self.assertEqual(len(f.readlines()), 2 + 4)

    def test_mzm_periodic_ring_is_uniform(self) -> None:
        result = KitaevRunner(self.directory_name).run_mzm(fixtures.TRIVIAL, 4, boundary=Boundary.PERIODIC)
        np.testing.assert_allclose(result.amplitude_s, result.amplitude_s[0], atol=1e-8)
        np.testing.assert_allclose(result.amplitude_a, result.amplitude_a[0], atol=1e-8)
        self.assertEqual(read_json(self.directory_name, 'mzm.json')['config']['boundary'], 'periodic')

    def test_mzm_vqe_rejects_periodic(self) -> None:
        config = VqeConfig(layers=1, trials=1)
        with self.assertRaises(InvalidArgumentException):
            KitaevRunner(self.directory_name).run_mzm(fixtures.IDEAL, 4, GroundStateSource.VQE, config,
                                                      boundary=Boundary.PERIODIC)

    def test_mzm_vqe_needs_config(self) -> None:
        with self.assertRaises(InvalidArgumentException):
            KitaevRunner(self.directory_name).run_mzm(fixtures.IDEAL, 4, GroundStateSource.VQE)

    def test_winding_matches_exact_reference(self) -> None:
        results = KitaevRunner(self.directory_name).run_winding(fixtures.ANISOTROPIC, 8, [0.5], dt=0.02)
        self.assertEqual(len(results), 1)
        self.assertEqual(abs(results[0]['winding']), 1)
        self.assertEqual(results[0]['winding'], results[0]['reference'])
        self.assertTrue(os.path.isfile(os.path.join(self.directory_name, 'zk-delta-0.5.csv')))
        self.assertEqual(read_json(self.directory_name, 'winding.json')['results'][0]['winding'],
                         results[0]['winding'])

    def test_winding_threads_do_not_change_result(self) -> None:
        serial = KitaevRunner(self.directory_name).run_winding(fixtures.IDEAL, 4, [0.5, 0.15], dt=0.05, threads=1)
        parallel = KitaevRunner(self.directory_name).run_winding(fixtures.IDEAL, 4, [0.5, 0.15], dt=0.05, threads=2)
        self.assertEqual([x['delta'] for x in parallel], [0.5, 0.15])
        self.assertEqual([x['winding'] for x in serial], [x['winding'] for x in parallel])
        for a, b in zip(serial, parallel):
            self.assertAlmostEqual(a['raw'], b['raw'], places=12)
        self.assertEqual(read_json(self.directory_name, 'winding.json')['config']['threads'], 2)

    def test_winding_from_vqe_needs_angles(self) -> None:
        with self.assertRaises(InvalidArgumentException):
            KitaevRunner(self.directory_name).run_winding(fixtures.ANISOTROPIC, 4, [0.5],
                                                          source=GroundStateSource.VQE)

    def test_vqe(self) -> None:
        config = VqeConfig(layers=1, trials=2, annealing=AnnealingSchedule(steps=20), seed=1)
        result = KitaevRunner(self.directory_name).run_vqe(fixtures.FIELD_ONLY, 4, config, ODD)
        data = read_json(self.directory_name, 'vqe-odd.json')
        self.assertAlmostEqual(data['energy'], -1.0, places=6)
        self.assertAlmostEqual(data['reference_energy'], -1.0)
        self.assertEqual(data['angles_file'], 'vqe-odd.angles')
        with open(os.path.join(self.directory_name, 'vqe-odd.angles')) as f:
            angles, header = read_angles(f)
        self.assertEqual(header['parity'], 'odd')
        self.assertEqual(list(angles.values), list(result.angles.values))
        self.assertAlmostEqual(measured_parity(prepare(build_ansatz(4, 1, angles, ODD))), -1.0)

    def test_vqe_rejects_periodic(self) -> None:
        config = VqeConfig(layers=1, trials=1)
        with self.assertRaises(InvalidArgumentException):
            KitaevRunner(self.directory_name).run_vqe(fixtures.FIELD_ONLY, 4, config, EVEN, boundary=Boundary.PERIODIC)
        self.assertFalse(os.path.exists(os.path.join(self.directory_name, 'vqe-manifest.json')))

    def test_sweep(self) -> None:
        config = VqeConfig(layers=1, trials=2, annealing=AnnealingSchedule(steps=20), seed=5)
        rows = KitaevRunner(self.directory_name).run_sweep(fixtures.ANISOTROPIC, 4, 'hz', [0.5, 1.0], [1, 2], config)
        self.assertEqual([(x['value'], x['layers']) for x in rows], [(0.5, 1), (0.5, 2), (1.0, 1), (1.0, 2)])
        for row in rows:
            point = fixtures.ANISOTROPIC.spin_view()
            point['hz'] = row['value']
            exact, _ = ground_in_parity(CouplingSet.from_spin(**point), 4, parity=EVEN)
            self.assertAlmostEqual(row['energy_ed'], exact)
            self.assertGreaterEqual(row['difference'], -1e-9)
            self.assertAlmostEqual(row['difference'], row['energy_vqe'] - row['energy_ed'])
        with open(os.path.join(self.directory_name, 'sweep.csv')) as f:
            lines = f.readlines()
        self.assertEqual(lines[0], "# format: vqe-sweep/1.0; manifest: sweep-manifest.json\n")
        self.assertEqual(lines[1], "value,layers,energy_vqe,energy_ed,difference,converged\n")
        self.assertEqual(len(lines), 2 + 4)
        data = read_json(self.directory_name, 'sweep.json')
        self.assertEqual(data['config']['axis'], 'hz')
        self.assertEqual(sorted(data['max_difference']), ['1', '2'])
        self.assertEqual(sorted(read_json(self.directory_name, 'sweep-manifest.json')['outputs']),
                         ['sweep.csv', 'sweep.json'])

    def test_sweep_limits(self) -> None:
        runner = KitaevRunner(self.directory_name)
        config = VqeConfig(layers=1, trials=1)
        with self.assertRaises(InvalidArgumentException):
            runner.run_sweep(fixtures.ANISOTROPIC, 4, 'jx', [0.5], [1], config)
        with self.assertRaises(InvalidArgumentException):
            runner.run_sweep(fixtures.ANISOTROPIC, 4, 'hz', [0.5], [0], config)
        with self.assertRaises(InvalidArgumentException):
            runner.run_sweep(fixtures.ANISOTROPIC, 4, 'hz', [], [1], config)
        with self.assertRaises(ResourceLimitException):
            runner.run_sweep(fixtures.ANISOTROPIC, 16, 'hz', [0.5], [1], config)

    def test_cache_is_created_on_first_use(self) -> None:
        cache = os.path.join(self.directory_name, CACHE_DIR)
        runner = KitaevRunner(self.directory_name)
        runner.run_tb(fixtures.TB_TOPOLOGICAL, 4)
        runner.generate_report()
        self.assertFalse(os.path.exists(cache))
        runner.run_ed(fixtures.FIELD_ONLY, 4, levels=1)
        self.assertTrue(os.path.isdir(cache))

    def test_report(self) -> None:
        runner = KitaevRunner(self.directory_name)
        runner.run_tb(fixtures.TB_TOPOLOGICAL, 4)
        template = files('tests.resources').joinpath('template_01.j2').read_text()
        self.assertEqual(runner.generate_report(template), fixtures.REPORT)
        report = runner.generate_report()
        self.assertTrue(report.startswith("# kitaevqc runs\n"))
        self.assertIn("## tb", report)
        self.assertIn("- tb.json: ", report)

    def test_outputs_are_deterministic(self) -> None:
        other = tempfile.mkdtemp()
        try:
            KitaevRunner(self.directory_name).run_mzm(fixtures.GENERIC, 4)
            KitaevRunner(other).run_mzm(fixtures.GENERIC, 4)
            self.assertEqual(sha256_file(os.path.join(self.directory_name, 'mzm.csv')),
                             sha256_file(os.path.join(other, 'mzm.csv')))
        finally:
            shutil.rmtree(other)


if __name__ == '__main__':
    unittest.main()
