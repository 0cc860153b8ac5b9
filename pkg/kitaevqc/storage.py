import csv
import dataclasses
import hashlib
import json
import os
from abc import ABCMeta, abstractmethod
from datetime import datetime
from enum import Enum
from typing import Any, Dict, Iterable, List, Optional, Sequence, TextIO, Tuple

import click
import numpy as np
from packaging.version import InvalidVersion, Version, parse

from kitaevqc.models import (AnsatzAngles, Boundary, ConfigException, CouplingSet, EigenSolution,
                             FormatVersionException, InvalidArgumentException, RunManifest, count_angles)

ANGLES_FORMAT = 'kitaevqc-angles'
ANGLES_VERSION = '1.0'
CACHE_FORMAT_VERSION = '1.0'
CSV_FORMATS = {
    'vqe-trials': '1.0',
    'zk': '1.0',
    'winding-increments': '1.0',
    'mzm-profile': '1.0',
    'tb-dispersion': '1.0',
    'tb-svd': '1.0',
    'tb-spectrum': '1.0',
    'ed-levels': '1.0',
    'vqe-sweep': '1.0',
}

SPIN_KEYS = ('jx', 'jy', 'jz', 'hz')
FERMION_KEYS = ('t', 'delta', 'v', 'mu')
CONFIG_KEYS = SPIN_KEYS + FERMION_KEYS + ('boundary', 'n_sites', 'layers', 'parity', 'seed', 'trials', 'tdelta', 'dt',
                                          'delta_list', 'backend', 'gs', 'threads')


def _check_version(found: str, expected: str, what: str) -> None:
    try:
        version = parse(found)
    except InvalidVersion:
        raise FormatVersionException(f"{what}: unreadable format version '{found}'.")
    if version.major != Version(expected).major:
        raise FormatVersionException(f"{what}: format version {found} is not compatible with {expected}.")


def sha256_file(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, 'rb') as f:
        for chunk in iter(lambda: f.read(1 << 16), b''):
            digest.update(chunk)
    return digest.hexdigest()


def parse_config(lines: Iterable[str]) -> Dict[str, str]:
    """
    Parses ``key = value`` lines; blank lines and ``#`` comments are skipped.

    Parameters
    -------
    lines : iterable of str

    Returns
    -------
    config : dict
        Raw string values by key.

    Raises
    -------
    ConfigException: unknown keys, malformed lines, or spin and fermion
    couplings in the same file.
    """
    config: Dict[str, str] = {}
    for number, line in enumerate(lines, start=1):
        content = line.split('#', 1)[0].strip()
        if not content:
            continue
        if '=' not in content:
            raise ConfigException(f"Line {number}: expected 'key = value', got '{content}'.")
        key, value = content.split('=', 1)
        key = key.strip().lower().replace('-', '_')
        if key not in CONFIG_KEYS:
            raise ConfigException(f"Line {number}: unknown key '{key}'.")
        config[key] = value.strip()
    if any(k in config for k in SPIN_KEYS) and any(k in config for k in FERMION_KEYS):
        raise ConfigException("Config mixes spin (jx, jy, jz, hz) and fermion (t, delta, v, mu) couplings.")
    return config


def read_config(path: str) -> Dict[str, str]:
    with open(path) as f:
        return parse_config(f)


class EnhancedJSONEncoder(json.JSONEncoder):
    """
    JSON encoder for dataclasses, enums, datetimes and numpy values.
    Complex numbers are written as [re, im].
    """
    def default(self, o):  # type: ignore
        if dataclasses.is_dataclass(o) and not isinstance(o, type):
            return dataclasses.asdict(o, dict_factory=lambda x: {k: v for (k, v) in x if v is not None})
        if isinstance(o, Enum):
            return o.value
        if isinstance(o, datetime):
            return o.isoformat(timespec="seconds")
        if isinstance(o, np.ndarray):
            return o.tolist()
        if isinstance(o, np.generic):
            return o.item()
        if isinstance(o, complex):
            return [o.real, o.imag]
        return super().default(o)


def to_json(data: Any) -> str:
    return json.dumps(data, cls=EnhancedJSONEncoder, indent=2, sort_keys=True) + "\n"


class ManifestJsonMapper:
    """
    Converts RunManifest objects to JSON and back.
    """

    @staticmethod
    def to_json(manifest: RunManifest) -> str:
        data = {
            'command': manifest.command,
            'config': manifest.config,
            'version': manifest.version,
            'started_at': manifest.started_at.isoformat(timespec="seconds"),
            'elapsed_seconds': manifest.elapsed_seconds,
            'outputs': manifest.outputs,
        }
        return to_json(data)

    @staticmethod
    def from_json(data: Dict[str, Any]) -> RunManifest:
        return RunManifest(command=data['command'], config=data['config'], version=data['version'],
                           started_at=datetime.fromisoformat(data['started_at']),
                           elapsed_seconds=float(data['elapsed_seconds']), outputs=dict(data['outputs']))


def write_angles(f: TextIO, angles: AnsatzAngles, header: Optional[Dict[str, Any]] = None) -> None:
    f.write(f"format: {ANGLES_FORMAT}\n")
    f.write(f"version: {ANGLES_VERSION}\n")
    f.write(f"n_sites: {angles.n_sites}\n")
    f.write(f"layers: {angles.layers}\n")
    for key, value in sorted((header or {}).items()):
        f.write(f"{key}: {value}\n")
    f.write("m j kind angle\n")
    for (m, j, kind), value in zip(angles.labels(), angles.values):
        f.write(f"{m} {j} {kind} {float(value)!r}\n")


def read_angles(f: TextIO) -> Tuple[AnsatzAngles, Dict[str, str]]:
    """
    Reads an angles file written by ``write_angles``.

    Returns
    -------
    angles : AnsatzAngles
    header : dict
        Every header key, including format and version.
    """
    header: Dict[str, str] = {}
    lines = iter(f)
    for line in lines:
        content = line.strip()
        if content == "m j kind angle":
            break
        if not content or content.startswith('#'):
            continue
        key, _, value = content.partition(':')
        header[key.strip()] = value.strip()
    if header.get('format') != ANGLES_FORMAT:
        raise FormatVersionException(f"Not a {ANGLES_FORMAT} file (format: {header.get('format')}).")
    _check_version(header.get('version', ''), ANGLES_VERSION, ANGLES_FORMAT)
    try:
        n_sites, layers = int(header['n_sites']), int(header['layers'])
    except (KeyError, ValueError):
        raise InvalidArgumentException("Angles file lacks a valid n_sites/layers header.")

    values: Dict[Tuple[int, int, str], float] = {}
    for line in lines:
        fields = line.split()
        if not fields:
            continue
        if len(fields) != 4:
            raise InvalidArgumentException(f"Malformed angle line '{line.strip()}'.")
        values[(int(fields[0]), int(fields[1]), fields[2])] = float(fields[3])
    template = AnsatzAngles.zeros(n_sites, layers)
    if len(values) != count_angles(n_sites, layers):
        raise InvalidArgumentException(
            f"Angles file holds {len(values)} angles, N={n_sites}, M={layers} needs {count_angles(n_sites, layers)}.")
    try:
        flat = [values[label] for label in template.labels()]
    except KeyError as e:
        raise InvalidArgumentException(f"Angles file misses angle {e.args[0]}.")
    return AnsatzAngles.from_flat(n_sites, layers, flat), header


class ResultStorage(metaclass=ABCMeta):
    """
    Abstract base class for the place a command writes its results to.
    Every written file is remembered with its SHA-256 digest so that the
    manifest can list it.
    """

    @abstractmethod
    def write_json(self, name: str, data: Any) -> str:
        """
        Writes a JSON document and returns its path.
        """
        pass

    @abstractmethod
    def write_csv(self, name: str, format_name: str, manifest: str, columns: Sequence[str],
                  rows: Iterable[Sequence[Any]]) -> str:
        """
        Writes a versioned CSV table and returns its path.
        """
        pass

    @abstractmethod
    def write_angles(self, name: str, angles: AnsatzAngles, header: Optional[Dict[str, Any]] = None) -> str:
        pass

    @abstractmethod
    def write_manifest(self, manifest: RunManifest) -> str:
        pass

    @abstractmethod
    def list_manifests(self) -> List[RunManifest]:
        pass

    @abstractmethod
    def outputs(self) -> Dict[str, str]:
        """
        File name -> SHA-256 digest of everything written so far.
        """
        pass


class FileSystemResultStorage(ResultStorage):

    def __init__(self, path: str):
        if not os.path.isdir(path):
            os.makedirs(path)
        self.path: str = path
        self._outputs: Dict[str, str] = {}

    def _register(self, name: str) -> str:
        full_path = os.path.join(self.path, name)
        self._outputs[name] = sha256_file(full_path)
        click.echo("Generated '" + full_path + "' file.")
        return full_path

    def write_json(self, name: str, data: Any) -> str:
        with open(os.path.join(self.path, name), 'w') as f:
            f.write(to_json(data))
        return self._register(name)

    def write_csv(self, name: str, format_name: str, manifest: str, columns: Sequence[str],
                  rows: Iterable[Sequence[Any]]) -> str:
        with open(os.path.join(self.path, name), 'w', newline='') as f:
            f.write(f"# format: {format_name}/{CSV_FORMATS[format_name]}; manifest: {manifest}\n")
            writer = csv.writer(f, lineterminator='\n')
            writer.writerow(columns)
            for row in rows:
                writer.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in row])
        return self._register(name)

    def write_angles(self, name: str, angles: AnsatzAngles, header: Optional[Dict[str, Any]] = None) -> str:
        with open(os.path.join(self.path, name), 'w') as f:
            write_angles(f, angles, header)
        return self._register(name)

    def write_manifest(self, manifest: RunManifest) -> str:
        full_path = os.path.join(self.path, f"{manifest.command}-manifest.json")
        with open(full_path, 'w') as f:
            f.write(ManifestJsonMapper.to_json(manifest))
        click.echo("Generated '" + full_path + "' file.")
        return full_path

    def list_manifests(self) -> List[RunManifest]:
        manifests: List[RunManifest] = []
        for filename in sorted(os.listdir(self.path)):
            if filename.endswith('-manifest.json'):
                with open(os.path.join(self.path, filename)) as f:
                    manifests.append(ManifestJsonMapper.from_json(json.load(f)))
        return manifests

    def outputs(self) -> Dict[str, str]:
        return dict(self._outputs)


def cache_key(cs: CouplingSet, n_sites: int, boundary: Boundary, parity: int) -> str:
    payload = json.dumps({'couplings': cs.fermion_view(), 'n_sites': n_sites, 'boundary': boundary.value,
                          'parity': parity}, sort_keys=True)
    return hashlib.sha256(payload.encode('utf-8')).hexdigest()


class NpzEigenCache:
    """
    Parity-block eigen-decompositions stored as one ``.npz`` file per key.
    """

    def __init__(self, path: str):
        if not os.path.isdir(path):
            os.makedirs(path)
        self.path = path

    def _file(self, cs: CouplingSet, n_sites: int, boundary: Boundary, parity: int) -> str:
        return os.path.join(self.path, cache_key(cs, n_sites, boundary, parity) + '.npz')

    def load(self, cs: CouplingSet, n_sites: int, boundary: Boundary, parity: int) -> Optional[EigenSolution]:
        filename = self._file(cs, n_sites, boundary, parity)
        if not os.path.isfile(filename):
            return None
        with np.load(filename) as data:
            _check_version(str(data['format_version']), CACHE_FORMAT_VERSION, filename)
            return EigenSolution(energies=data['energies'], states=data['states'], parities=data['parities'])

    def save(self, cs: CouplingSet, n_sites: int, boundary: Boundary, parity: int, solution: EigenSolution) -> None:
        np.savez(self._file(cs, n_sites, boundary, parity), energies=solution.energies, states=solution.states,
                 parities=solution.parities, format_version=np.array(CACHE_FORMAT_VERSION))
