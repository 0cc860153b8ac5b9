import io
import json
import os
import shutil
import tempfile
import unittest
from datetime import datetime, timezone

import numpy as np
from importlib_resources import files

from kitaevqc.ed import diagonalize
from kitaevqc.models import (EVEN, AnsatzAngles, Boundary, ConfigException, FormatVersionException,
                             InvalidArgumentException, RunManifest, count_angles)
from kitaevqc.storage import (FileSystemResultStorage, NpzEigenCache, cache_key, parse_config, read_angles,
                              read_config, sha256_file, to_json, write_angles)
from tests import fixtures


class ConfigTest(unittest.TestCase):

    def test_parse(self) -> None:
        self.assertEqual(parse_config(fixtures.CONFIG.splitlines()),
                         {'n_sites': '4', 'jx': '1.0', 'jy': '0.0', 'boundary': 'open'})

    def test_key_normalization(self) -> None:
        self.assertEqual(parse_config(["N-Sites = 8", "Delta-List = 0.1,0.2"]),
                         {'n_sites': '8', 'delta_list': '0.1,0.2'})

    def test_read_resource(self) -> None:
        config = read_config(str(files('tests.resources').joinpath('chain.cfg')))
        self.assertEqual(config, {'n_sites': '4', 'jx': '1.0', 'jy': '0.0'})

    def test_errors(self) -> None:
        with self.assertRaises(ConfigException):
            parse_config(fixtures.MIXED_CONFIG.splitlines())
        with self.assertRaises(ConfigException):
            parse_config(["colour = blue"])
        with self.assertRaises(ConfigException):
            parse_config(["jx 1.0"])


class AnglesFileTest(unittest.TestCase):

    def test_round_trip(self) -> None:
        angles = AnsatzAngles.from_flat(4, 2, fixtures.random_angles(count_angles(4, 2), seed=4))
        buffer = io.StringIO()
        write_angles(buffer, angles, {'parity': 'odd'})
        buffer.seek(0)
        loaded, header = read_angles(buffer)
        np.testing.assert_array_equal(loaded.values, angles.values)
        self.assertEqual(header['parity'], 'odd')
        self.assertEqual(header['version'], '1.0')

    def test_resource(self) -> None:
        with files('tests.resources').joinpath('angles_v1.txt').open('r') as f:
            angles, header = read_angles(f)
        self.assertEqual((angles.n_sites, angles.layers), (4, 1))
        self.assertEqual(angles.bond(1, 2), (0.4, 0.5, 0.6))
        self.assertEqual(angles.site(1, 4), 0.13)
        self.assertEqual(header['parity'], 'even')

    def test_incompatible_version(self) -> None:
        with files('tests.resources').joinpath('angles_v2.txt').open('r') as f:
            with self.assertRaises(FormatVersionException):
                read_angles(f)

    def test_missing_angles(self) -> None:
        text = files('tests.resources').joinpath('angles_v1.txt').read_text()
        with self.assertRaises(InvalidArgumentException):
            read_angles(io.StringIO(text.replace("1 4 site 0.13\n", "")))

    def test_foreign_file(self) -> None:
        with self.assertRaises(FormatVersionException):
            read_angles(io.StringIO("format: something-else\nversion: 1.0\n"))


class JsonTest(unittest.TestCase):

    def test_encoder(self) -> None:
        data = json.loads(to_json({'z': 1 + 2j, 'x': np.float64(0.5), 'b': Boundary.PERIODIC, 'a': np.arange(3),
                                   'cs': fixtures.IDEAL}))
        self.assertEqual(data['z'], [1.0, 2.0])
        self.assertEqual(data['x'], 0.5)
        self.assertEqual(data['b'], 'periodic')
        self.assertEqual(data['a'], [0, 1, 2])
        self.assertEqual(data['cs']['jx'], 1.0)

    def test_output_is_sorted(self) -> None:
        self.assertEqual(to_json({'b': 1, 'a': 2}), '{\n  "a": 2,\n  "b": 1\n}\n')


class FileSystemResultStorageTest(unittest.TestCase):

    directory_name: str

    def setUp(self) -> None:
        self.directory_name = tempfile.mkdtemp()
        print("Created directory: " + self.directory_name)

    def tearDown(self) -> None:
        print("Removing directory: " + self.directory_name)
        shutil.rmtree(self.directory_name)

    def test_csv(self) -> None:
        fs = FileSystemResultStorage(self.directory_name)
        path = fs.write_csv('zk.csv', 'zk', 'winding-manifest.json', ['k', 're'], [(0.5, 1), (np.float64(0.25), 2)])
        with open(path) as f:
            self.assertEqual(f.read(), "# format: zk/1.0; manifest: winding-manifest.json\nk,re\n0.5,1\n0.25,2\n")
        self.assertEqual(fs.outputs(), {'zk.csv': sha256_file(path)})

    def test_manifests(self) -> None:
        fs = FileSystemResultStorage(self.directory_name)
        fs.write_json('tb.json', {'winding': -1})
        started = datetime(2024, 5, 1, 12, 0, 0, tzinfo=timezone.utc)
        fs.write_manifest(RunManifest(command='tb', config={'n_sites': 4}, version='0.1.0', started_at=started,
                                      elapsed_seconds=0.5, outputs=fs.outputs()))
        manifests = fs.list_manifests()
        self.assertEqual(len(manifests), 1)
        self.assertEqual(manifests[0].command, 'tb')
        self.assertEqual(manifests[0].started_at, started)
        self.assertEqual(list(manifests[0].outputs), ['tb.json'])
        self.assertTrue(os.path.isfile(os.path.join(self.directory_name, 'tb-manifest.json')))


class NpzEigenCacheTest(unittest.TestCase):

    directory_name: str

    def setUp(self) -> None:
        self.directory_name = tempfile.mkdtemp()
        print("Created directory: " + self.directory_name)

    def tearDown(self) -> None:
        print("Removing directory: " + self.directory_name)
        shutil.rmtree(self.directory_name)

    def test_diagonalize_uses_cache(self) -> None:
        cache = NpzEigenCache(self.directory_name)
        self.assertIsNone(cache.load(fixtures.GENERIC, 4, Boundary.OPEN, EVEN))
        first = diagonalize(fixtures.GENERIC, 4, cache=cache)
        self.assertEqual(len(os.listdir(self.directory_name)), 1)
        cached = cache.load(fixtures.GENERIC, 4, Boundary.OPEN, EVEN)
        self.assertIsNotNone(cached)
        np.testing.assert_array_equal(cached.energies, first.energies)
        np.testing.assert_array_equal(diagonalize(fixtures.GENERIC, 4, cache=cache).states, first.states)

    def test_key_depends_on_sector(self) -> None:
        self.assertNotEqual(cache_key(fixtures.GENERIC, 4, Boundary.OPEN, EVEN),
                            cache_key(fixtures.GENERIC, 4, Boundary.OPEN, -EVEN))
        self.assertEqual(cache_key(fixtures.GENERIC, 4, Boundary.OPEN, EVEN),
                         cache_key(fixtures.GENERIC.swap_xy().swap_xy(), 4, Boundary.OPEN, EVEN))

    def test_incompatible_version(self) -> None:
        cache = NpzEigenCache(self.directory_name)
        filename = os.path.join(self.directory_name, cache_key(fixtures.GENERIC, 4, Boundary.OPEN, EVEN) + '.npz')
        np.savez(filename, energies=np.zeros(1), states=np.zeros((16, 1)), parities=np.ones(1),
                 format_version=np.array('2.0'))
        with self.assertRaises(FormatVersionException):
            cache.load(fixtures.GENERIC, 4, Boundary.OPEN, EVEN)


if __name__ == '__main__':
    unittest.main()
