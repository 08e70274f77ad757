"""Scenario files (YAML), snapshot files and run manifests.

Scenario file layout (angles in degrees, powers in dB)::

    array:
      num_sensors: 5
      spacing_wavelengths: 0.5
    noise:
      snr_db: 20            # or power_db: -20
    signal_model: gaussian  # optional: gaussian | qpsk
    dst_correlation: 0.0    # optional
    sources:
      - {kind: SST, theta: 20, phi: 20, pols: [[50, 10]]}
      - {kind: DST, theta: 60, phi: 60, pols: [[20, 50], [70, -40]], power_db: 0}
    sweep:                  # optional defaults for the sweep subcommand
      snr_db: [0, 5, 10]
      trials: 200
      snapshots: 100
      grid_step: 0.1
      seed: 0

Snapshot files hold a 3N x K complex matrix in row-major order. ``.csv``:
one text line per array row, ``re_0,im_0,re_1,im_1,...`` with no header.
``.bin``: 8-byte magic ``MSTDOA1\\0``, rows and columns as little-endian
uint64, then ``rows*cols`` interleaved little-endian float64 (re, im) pairs.
"""
from __future__ import annotations

import csv
import hashlib
import json
import warnings
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from .array_manifold import ArrayGeometry, Dir, Pol
from .errors import ConfigurationError, DomainError, ScenarioFileError
from .synthesis import Scenario, SourceDescriptor, SourceKind

BIN_MAGIC = b"MSTDOA1\0"
PRESETS = {"paper-fig23": "paper_fig23.yaml"}


def _node_lines(node, path=(), out=None):
    out = {} if out is None else out
    out[path] = node.start_mark.line + 1
    if isinstance(node, yaml.MappingNode):
        for key, value in node.value:
            _node_lines(value, path + (key.value,), out)
            out[path + (key.value,)] = key.start_mark.line + 1
    elif isinstance(node, yaml.SequenceNode):
        for i, item in enumerate(node.value):
            _node_lines(item, path + (i,), out)
    return out


def _field_name(path):
    name = ""
    for p in path:
        name += f"[{p}]" if isinstance(p, int) else (f".{p}" if name else p)
    return name


class _Reader:
    """Typed access to the parsed document that reports field and line on error."""

    def __init__(self, data, lines):
        self.data = data
        self.lines = lines

    def fail(self, path, message):
        # fall back to the nearest enclosing node that has a line number
        p = tuple(path)
        while p not in self.lines and p:
            p = p[:-1]
        raise ScenarioFileError(message, field=_field_name(path), line=self.lines.get(p))

    def get(self, path, default=KeyError):
        cur = self.data
        for p in path:
            try:
                cur = cur[p]
            except (KeyError, IndexError, TypeError):
                if default is KeyError:
                    self.fail(path, "missing required value")
                return default
        return cur

    def number(self, path, default=KeyError, kind=float):
        v = self.get(path, default)
        if v is default and default is not KeyError:
            return v
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            self.fail(path, f"expected a number, got {v!r}")
        if kind is int and int(v) != v:
            self.fail(path, f"expected an integer, got {v!r}")
        return kind(v)


def _db_to_linear(db):
    return 10.0 ** (db / 10.0)


def parse_scenario(text, source_name="<scenario>"):
    """Parse scenario YAML text into ``(Scenario, sweep_defaults)``."""
    try:
        root = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ScenarioFileError(f"{source_name}: invalid YAML: {getattr(exc, 'problem', exc)}",
                                line=mark.line + 1 if mark else None) from None
    if root is None or not isinstance(root, yaml.MappingNode):
        raise ScenarioFileError(f"{source_name}: top level must be a mapping", line=1)
    data = yaml.SafeLoader(text).get_single_data()
    rd = _Reader(data, _node_lines(root))

    def guarded(path, build):
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("default")
                return build()
        except ScenarioFileError:
            raise
        except (DomainError, ConfigurationError, TypeError, ValueError) as exc:
            rd.fail(path, str(exc))

    n = rd.number(("array", "num_sensors"), kind=int)
    d = rd.number(("array", "spacing_wavelengths"), default=0.5)
    geom = guarded(("array",), lambda: ArrayGeometry(n, d))

    noise = rd.get(("noise",), default={})
    if not isinstance(noise, dict):
        rd.fail(("noise",), "expected a mapping")
    if "snr_db" in noise and "power_db" in noise:
        rd.fail(("noise",), "give either snr_db or power_db, not both")
    if "power_db" in noise:
        noise_power = _db_to_linear(rd.number(("noise", "power_db")))
    else:
        noise_power = _db_to_linear(-rd.number(("noise", "snr_db"), default=20.0))

    sources = []
    raw = rd.get(("sources",), default=[])
    if not isinstance(raw, list):
        rd.fail(("sources",), "expected a list of sources")
    for i, _ in enumerate(raw):
        base = ("sources", i)
        kind = rd.get(base + ("kind",))
        if not isinstance(kind, str) or kind.upper() not in ("SST", "DST"):
            rd.fail(base + ("kind",), f"kind must be SST or DST, got {kind!r}")
        kind = SourceKind(kind.upper())
        theta = rd.number(base + ("theta",))
        phi = rd.number(base + ("phi",))
        direction = guarded(base + ("theta",), lambda: Dir(theta, phi))
        pols_raw = rd.get(base + ("pols",))
        if not isinstance(pols_raw, list):
            rd.fail(base + ("pols",), "expected a list of [gamma, eta] pairs")
        pols = []
        for k, pr in enumerate(pols_raw):
            if not isinstance(pr, list) or len(pr) != 2:
                rd.fail(base + ("pols", k), "expected a [gamma, eta] pair")
            g = rd.number(base + ("pols", k, 0))
            e = rd.number(base + ("pols", k, 1))
            pols.append(guarded(base + ("pols", k), lambda: Pol(g, e)))
        power = _db_to_linear(rd.number(base + ("power_db",), default=0.0))
        sources.append(guarded(base + ("pols",),
                               lambda: SourceDescriptor(kind, direction, tuple(pols), power)))

    model = rd.get(("signal_model",), default="gaussian")
    rho = rd.number(("dst_correlation",), default=0.0)
    scenario = guarded(("sources",), lambda: Scenario(geom, tuple(sources), noise_power, rho, model))

    sweep = {}
    if rd.get(("sweep",), default=None) is not None:
        if rd.get(("sweep", "snr_db"), default=None) is not None:
            snrs = rd.get(("sweep", "snr_db"))
            if not isinstance(snrs, list):
                rd.fail(("sweep", "snr_db"), "expected a list of SNR values")
            sweep["snr_db"] = [rd.number(("sweep", "snr_db", i)) for i in range(len(snrs))]
        for key, kind_ in (("trials", int), ("snapshots", int), ("seed", int), ("grid_step", float)):
            v = rd.number(("sweep", key), default=None, kind=kind_)
            if v is not None:
                sweep[key] = v
    return scenario, sweep


def load_scenario(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioFileError(f"cannot read scenario file {path}: {exc.strerror}") from None
    return parse_scenario(text, str(path))


def load_preset(name):
    if name not in PRESETS:
        raise ConfigurationError(f"unknown preset '{name}'; available: {', '.join(PRESETS)}")
    text = resources.files("mstdoa.presets").joinpath(PRESETS[name]).read_text()
    return parse_scenario(text, f"preset:{name}")


def scenario_to_dict(scenario: Scenario):
    """Plain-data echo of a scenario in file units (degrees, dB)."""
    return {
        "array": {"num_sensors": scenario.geometry.num_sensors,
                  "spacing_wavelengths": scenario.geometry.spacing_wavelengths},
        "noise": {"power_db": float(10.0 * np.log10(scenario.noise_power))
                  if scenario.noise_power > 0 else float("-inf")},
        "signal_model": scenario.signal_model,
        "dst_correlation": complex(scenario.dst_correlation).real
        if complex(scenario.dst_correlation).imag == 0 else str(scenario.dst_correlation),
        "sources": [{"kind": s.kind.value, "theta": s.dir.theta, "phi": s.dir.phi,
                     "pols": [[p.gamma, p.eta] for p in s.pols],
                     "power_db": float(10.0 * np.log10(s.power))} for s in scenario.sources],
    }


def write_snapshots(path, y):
    """Write ``y`` as ``.csv`` or ``.bin`` (chosen by suffix)."""
    path = Path(path)
    y = np.ascontiguousarray(y, dtype=np.complex128)
    if path.suffix == ".bin":
        with open(path, "wb") as fh:
            fh.write(BIN_MAGIC)
            fh.write(np.array(y.shape, dtype="<u8").tobytes())
            fh.write(y.astype("<c16").tobytes())
        return
    if path.suffix != ".csv":
        raise ConfigurationError(f"snapshot file must end in .csv or .bin, got '{path.suffix}'")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for row in y:
            w.writerow([repr(float(v)) for z in row for v in (z.real, z.imag)])


def read_snapshots(path):
    path = Path(path)
    if path.suffix == ".bin":
        raw = path.read_bytes()
        if raw[:8] != BIN_MAGIC:
            raise ConfigurationError(f"{path}: not an mstdoa snapshot file")
        rows, cols = np.frombuffer(raw[8:24], dtype="<u8")
        data = np.frombuffer(raw[24:], dtype="<c16")
        if data.size != rows * cols:
            raise ConfigurationError(f"{path}: expected {rows * cols} samples, found {data.size}")
        return data.reshape(int(rows), int(cols)).astype(np.complex128)
    with open(path, newline="") as fh:
        rows = [[float(v) for v in row] for row in csv.reader(fh) if row]
    if not rows or any(len(r) != len(rows[0]) or len(r) % 2 for r in rows):
        raise ConfigurationError(f"{path}: ragged or odd-width snapshot rows")
    a = np.array(rows)
    return a[:, 0::2] + 1j * a[:, 1::2]


def file_digest(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")
