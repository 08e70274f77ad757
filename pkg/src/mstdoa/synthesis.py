"""Scenario description and snapshot synthesis for mixed SST/DST scenes."""
from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .array_manifold import (
    ArrayGeometry,
    Dir,
    Pol,
    joint_steering_matrix,
    joint_steering_vector,
)
from .errors import ConfigurationError, DomainError


class SourceKind(str, enum.Enum):
    SST = "SST"
    DST = "DST"


class LinearPolarizationWarning(UserWarning):
    """A source is exactly linearly polarized."""


@dataclass(frozen=True)
class SourceDescriptor:
    """One emitter. ``power`` is the linear variance of each (sub-)signal."""

    kind: SourceKind
    dir: Dir
    pols: tuple
    power: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", SourceKind(self.kind))
        object.__setattr__(self, "pols", tuple(self.pols))
        expected = 1 if self.kind is SourceKind.SST else 2
        if len(self.pols) != expected:
            raise ConfigurationError(
                f"{self.kind.value} source needs {expected} polarization(s), got {len(self.pols)}")
        if not self.power > 0:
            raise ConfigurationError(f"source power must be > 0, got {self.power}")
        if self.kind is SourceKind.DST:
            # validates linear independence of the two polarization vectors
            joint_steering_matrix(self.dir, self.pols[0], self.pols[1], ArrayGeometry(2, 0.5))
        for pol in self.pols:
            if pol.is_linear:
                warnings.warn(f"source at {self.dir} has linear polarization {pol}",
                              LinearPolarizationWarning, stacklevel=3)

    @classmethod
    def sst(cls, theta, phi, gamma, eta, power=1.0):
        return cls(SourceKind.SST, Dir(theta, phi), (Pol(gamma, eta),), power)

    @classmethod
    def dst(cls, theta, phi, pol1, pol2, power=1.0):
        return cls(SourceKind.DST, Dir(theta, phi), (Pol(*pol1), Pol(*pol2)), power)

    @property
    def num_subsignals(self):
        return len(self.pols)

    def response(self, geom):
        """3N x (1 or 2) joint steering matrix of this source."""
        if self.kind is SourceKind.SST:
            return joint_steering_vector(self.dir, self.pols[0], geom)[:, None]
        return joint_steering_matrix(self.dir, self.pols[0], self.pols[1], geom)


@dataclass(frozen=True)
class Scenario:
    """Array, sources and sensor noise.

    ``dst_correlation`` is the complex correlation coefficient between the two
    sub-signals of every DST source (0 by default). ``signal_model`` is
    ``"gaussian"`` or ``"qpsk"``.
    """

    geometry: ArrayGeometry = field(default_factory=ArrayGeometry)
    sources: tuple = ()
    noise_power: float = 1.0
    dst_correlation: complex = 0.0
    signal_model: str = "gaussian"

    def __post_init__(self):
        object.__setattr__(self, "sources", tuple(self.sources))
        if self.noise_power < 0:
            raise ConfigurationError(f"noise_power must be >= 0, got {self.noise_power}")
        if abs(self.dst_correlation) >= 1:
            raise ConfigurationError("dst_correlation must have modulus < 1")
        if self.signal_model not in ("gaussian", "qpsk"):
            raise ConfigurationError(f"unknown signal_model '{self.signal_model}'")
        if self.num_signal_dims >= self.geometry.dim:
            raise ConfigurationError(
                f"M1 + 2*M2 = {self.num_signal_dims} must be < 3N = {self.geometry.dim}")

    @property
    def sst_sources(self):
        return [s for s in self.sources if s.kind is SourceKind.SST]

    @property
    def dst_sources(self):
        return [s for s in self.sources if s.kind is SourceKind.DST]

    @property
    def num_sst(self):
        return len(self.sst_sources)

    @property
    def num_dst(self):
        return len(self.dst_sources)

    @property
    def num_signal_dims(self):
        return self.num_sst + 2 * self.num_dst

    def with_snr(self, snr_db, reference_power=1.0):
        """Copy with noise power set so ``reference_power / noise_power`` equals ``snr_db``."""
        return replace(self, noise_power=reference_power * 10.0 ** (-snr_db / 10.0))

    def response_matrix(self):
        """All joint steering columns, sources in declaration order."""
        if not self.sources:
            return np.zeros((self.geometry.dim, 0), dtype=complex)
        return np.hstack([s.response(self.geometry) for s in self.sources])

    def source_covariance(self):
        """Covariance of the stacked (sub-)signal vector."""
        blocks = []
        for s in self.sources:
            if s.kind is SourceKind.SST:
                blocks.append(np.array([[s.power]], dtype=complex))
            else:
                rho = self.dst_correlation
                blocks.append(s.power * np.array([[1.0, rho], [np.conj(rho), 1.0]], dtype=complex))
        dim = sum(b.shape[0] for b in blocks)
        out = np.zeros((dim, dim), dtype=complex)
        i = 0
        for b in blocks:
            k = b.shape[0]
            out[i:i + k, i:i + k] = b
            i += k
        return out


def reference_scenario(snr_db=20.0):
    """One SST at (20, 20; 50, 10) and one DST at (60, 60; (20, 50), (70, -40)), N=5, d=lambda/2."""
    sources = (
        SourceDescriptor.sst(20.0, 20.0, 50.0, 10.0),
        SourceDescriptor.dst(60.0, 60.0, (20.0, 50.0), (70.0, -40.0)),
    )
    return Scenario(ArrayGeometry(5, 0.5), sources).with_snr(snr_db)


def _unit_signals(rng, n, k, model):
    if model == "qpsk":
        re = rng.integers(0, 2, size=(n, k)) * 2 - 1
        im = rng.integers(0, 2, size=(n, k)) * 2 - 1
        return (re + 1j * im) / np.sqrt(2.0)
    return (rng.standard_normal((n, k)) + 1j * rng.standard_normal((n, k))) / np.sqrt(2.0)


def generate_snapshots(scenario: Scenario, snapshots: int, seed: int) -> np.ndarray:
    """Draw a 3N x K block of array output.

    Signals are drawn first, then noise, from one PCG64 stream seeded with
    ``seed``; the noise draw happens even when ``noise_power`` is zero so that
    the stream layout does not depend on the SNR.
    """
    if int(snapshots) != snapshots or snapshots < 1:
        raise DomainError(f"snapshot count must be a positive integer, got {snapshots}")
    rng = np.random.default_rng(seed)
    geom = scenario.geometry
    dims = scenario.num_signal_dims
    s = _unit_signals(rng, dims, snapshots, scenario.signal_model)
    noise = (rng.standard_normal((geom.dim, snapshots))
             + 1j * rng.standard_normal((geom.dim, snapshots))) / np.sqrt(2.0)
    y = np.sqrt(scenario.noise_power) * noise
    if dims:
        # colour the unit-variance signals to the requested source covariance
        mix = np.linalg.cholesky(scenario.source_covariance())
        y = y + scenario.response_matrix() @ (mix @ s)
    return y


def exact_covariance(scenario: Scenario) -> np.ndarray:
    """Asymptotic covariance ``A Rs A^H + noise_power I``."""
    a = scenario.response_matrix()
    r = a @ scenario.source_covariance() @ a.conj().T
    r = r + scenario.noise_power * np.eye(scenario.geometry.dim)
    return 0.5 * (r + r.conj().T)
