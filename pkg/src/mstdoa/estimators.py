"""Spectral estimators for mixed SST/DST scenes.

Three cost functions live here, all built on the 2x2 test matrix
``T(theta, phi) = B^H Un Un^H B`` with ``B = a(theta) kron Omega(theta, phi)``:

* ``sst_spectrum``: ``1 / det T``, peaks wherever ``T`` loses rank (SST
  directions, DST directions and the DST ambiguity ridge).
* ``dst_spectrum``: ``1 / ||T||``, peaks only where ``T`` vanishes (DST).
* ``music4d_slice``: classic joint-vector MUSIC at a fixed polarization.

The two-step pipeline runs the DST spectrum first and then picks SST peaks
away from the DST directions.
"""
from __future__ import annotations

import csv
import functools
import json
import math
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from . import _kernels
from .array_manifold import (
    ArrayGeometry,
    Dir,
    Pol,
    joint_steering_vector,
    manifold_basis,
)
from .errors import AmbiguousPolarizationError, ConfigurationError, DomainError
from .subspace import decompose, sample_covariance

# floors are relative to the flat-spectrum level (N^2 for det, N for norms)
FLOOR_REL = 1e-12
# sigma_max of the test matrix below RANK_TOL * N is treated as rank 0
RANK_TOL = 1e-8
# SST candidates whose joint response keeps less than this fraction of its
# norm outside a DST source's manifold plane sit on that source's ambiguity ridge
AMBIGUITY_TOL = 0.5
NORMS = ("spectral", "frobenius")


class PeakShortfallWarning(UserWarning):
    """Fewer peaks were found than requested."""


@dataclass(frozen=True)
class GridSpec:
    """Search grid. ``theta_range`` is closed, ``phi_range`` half-open, all in degrees."""

    theta_range: tuple = (0.0, 90.0)
    phi_range: tuple = (0.0, 180.0)
    step: float = 0.1

    def __post_init__(self):
        object.__setattr__(self, "theta_range", tuple(float(v) for v in self.theta_range))
        object.__setattr__(self, "phi_range", tuple(float(v) for v in self.phi_range))
        if not self.step > 0:
            raise DomainError(f"grid step must be > 0, got {self.step}")
        t0, t1 = self.theta_range
        p0, p1 = self.phi_range
        if not (0.0 <= t0 <= t1 <= 90.0):
            raise DomainError(f"theta_range {self.theta_range} not within [0, 90]")
        if not (0.0 <= p0 < p1 <= 180.0):
            raise DomainError(f"phi_range {self.phi_range} not within [0, 180)")

    @property
    def theta_axis(self):
        t0, t1 = self.theta_range
        n = int(math.floor((t1 - t0) / self.step + 1e-9)) + 1
        return np.round(t0 + self.step * np.arange(n), 9)

    @property
    def phi_axis(self):
        p0, p1 = self.phi_range
        n = int(math.ceil((p1 - p0) / self.step - 1e-9))
        return np.round(p0 + self.step * np.arange(n), 9)

    @property
    def phi_periodic(self):
        """True when the phi axis covers a full period of 180 degrees.

        The test matrix is unchanged by ``phi -> phi + 180`` (Omega flips sign),
        so the spectrum wraps around in azimuth.
        """
        n = 180.0 / self.step
        return self.phi_range == (0.0, 180.0) and abs(n - round(n)) < 1e-9


@functools.lru_cache(maxsize=16)
def _grid_trig(grid):
    t = np.deg2rad(grid.theta_axis)
    p = np.deg2rad(grid.phi_axis)
    return np.cos(t), np.sin(t), np.cos(p), np.sin(p)


@functools.lru_cache(maxsize=16)
def _grid_steering(grid, geom):
    t = np.deg2rad(grid.theta_axis)
    return np.exp(-1j * geom.tau * np.outer(np.sin(t), np.arange(geom.num_sensors)))


def _compressed(noise_basis, grid, geom):
    un = np.asarray(noise_basis)
    if un.shape[0] != geom.dim:
        raise ConfigurationError(f"noise basis has {un.shape[0]} rows, array needs {geom.dim}")
    projector = un @ un.conj().T
    return _kernels.compress_projector(projector, _grid_steering(grid, geom))


def grid_signatures(noise_basis, grid: GridSpec, geom: ArrayGeometry):
    """``(det, sigma_max, frobenius)`` of the test matrix at every grid cell."""
    c = _compressed(noise_basis, grid, geom)
    return _kernels.grid_signatures(c, *_grid_trig(grid))


def grid_entries(noise_basis, grid: GridSpec, geom: ArrayGeometry):
    """``(t11, t22, t12)`` of the test matrix at every grid cell."""
    c = _compressed(noise_basis, grid, geom)
    return _kernels.grid_entries(c, *_grid_trig(grid))


@dataclass
class SpectrumGrid:
    """A cost function sampled on a (theta, phi) grid; ``clamped`` marks floored cells."""

    theta: np.ndarray
    phi: np.ndarray
    values: np.ndarray
    clamped: np.ndarray
    kind: str
    phi_periodic: bool = False
    meta: dict = field(default_factory=dict)

    def dir_at(self, i, j):
        return Dir(float(self.theta[i]), float(self.phi[j]))

    def argmax_dirs(self):
        """All cells attaining the global maximum."""
        top = self.values.max()
        return [self.dir_at(i, j) for i, j in zip(*np.nonzero(self.values == top))]

    def value_at(self, direction):
        i = int(np.argmin(np.abs(self.theta - direction.theta)))
        j = int(np.argmin(np.abs(self.phi - direction.phi)))
        return float(self.values[i, j])

    def write_csv(self, fh):
        """Rows ``theta,phi,value`` with theta varying slowest."""
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["theta", "phi", "value"])
        for i, t in enumerate(self.theta):
            for j, p in enumerate(self.phi):
                writer.writerow([f"{t:.10g}", f"{p:.10g}", repr(float(self.values[i, j]))])


def _floored_reciprocal(x, floor):
    clamped = x < floor
    return 1.0 / np.where(clamped, floor, x), clamped


def _make_spectrum(grid, values, clamped, kind, **meta):
    return SpectrumGrid(grid.theta_axis, grid.phi_axis, values, clamped, kind,
                        grid.phi_periodic, dict(meta))


def test_matrix(direction: Dir, noise_basis, geom: ArrayGeometry) -> np.ndarray:
    """The 2x2 Hermitian PSD matrix ``B^H Un Un^H B`` at one direction."""
    b = manifold_basis(direction, geom)
    x = np.asarray(noise_basis).conj().T @ b
    t = x.conj().T @ x
    return 0.5 * (t + t.conj().T)


test_matrix.__test__ = False  # not a pytest test


def rank_signature(direction: Dir, noise_basis, geom: ArrayGeometry):
    """``(sigma_max, sigma_min)`` of the test matrix."""
    w = np.linalg.eigvalsh(test_matrix(direction, noise_basis, geom))
    return float(w[1]), float(w[0])


class Music4DValue(NamedTuple):
    value: float
    at_ambiguity: bool


def music4d_value(direction: Dir, pol: Pol, noise_basis, geom: ArrayGeometry) -> Music4DValue:
    """``1 / (q^H Un Un^H q)``; clamped and flagged when the denominator hits the floor."""
    q = joint_steering_vector(direction, pol, geom)
    r = np.asarray(noise_basis).conj().T @ q
    denom = float(np.vdot(r, r).real)
    floor = FLOOR_REL * geom.num_sensors
    if denom < floor:
        return Music4DValue(1.0 / floor, True)
    return Music4DValue(1.0 / denom, False)


def _quadratic_form(t11, t22, t12, gamma, eta):
    """``g^H T g`` for ``g = [sin(gamma) e^{j eta}, cos(gamma)]`` (radians)."""
    s, c = np.sin(gamma), np.cos(gamma)
    return s * s * t11 + c * c * t22 + 2.0 * s * c * np.real(np.exp(-1j * eta) * t12)


def music4d_slice(noise_basis, pol: Pol, grid: GridSpec, geom: ArrayGeometry) -> SpectrumGrid:
    """4-D MUSIC cost over (theta, phi) at a fixed polarization."""
    t11, t22, t12 = grid_entries(noise_basis, grid, geom)
    denom = _quadratic_form(t11, t22, t12, *pol.radians)
    values, clamped = _floored_reciprocal(denom, FLOOR_REL * geom.num_sensors)
    return _make_spectrum(grid, values, clamped, "music4d-slice", gamma=pol.gamma, eta=pol.eta)


def music4d_search(noise_basis, geom: ArrayGeometry, grid: GridSpec = None, pol_step=5.0):
    """Brute-force 4-D MUSIC on a coarse grid, for demonstration.

    Returns the (theta, phi) surface of the maximum over polarizations and the
    maximizing ``(gamma, eta)`` at each cell, both in degrees.
    """
    grid = grid or GridSpec(step=1.0)
    t11, t22, t12 = grid_entries(noise_basis, grid, geom)
    floor = FLOOR_REL * geom.num_sensors
    best = np.full(t11.shape, np.inf)
    best_gamma = np.zeros(t11.shape)
    best_eta = np.zeros(t11.shape)
    gammas = np.arange(0.0, 90.0 + 1e-9, pol_step)
    etas = np.arange(-180.0 + pol_step, 180.0 + 1e-9, pol_step)
    for g in gammas:
        for e in etas:
            d = _quadratic_form(t11, t22, t12, np.deg2rad(g), np.deg2rad(e))
            better = d < best
            best = np.where(better, d, best)
            best_gamma[better] = g
            best_eta[better] = e
    values, clamped = _floored_reciprocal(best, floor)
    spectrum = _make_spectrum(grid, values, clamped, "music4d-max", pol_step=pol_step)
    return spectrum, best_gamma, best_eta


def _sst_from_signatures(grid, geom, det):
    values, clamped = _floored_reciprocal(det, FLOOR_REL * geom.num_sensors ** 2)
    return _make_spectrum(grid, values, clamped, "sst")


def _dst_from_signatures(grid, geom, smax, frob, norm):
    if norm not in NORMS:
        raise ConfigurationError(f"norm must be one of {NORMS}, got '{norm}'")
    size = smax if norm == "spectral" else frob
    values, clamped = _floored_reciprocal(size, FLOOR_REL * geom.num_sensors)
    return _make_spectrum(grid, values, clamped, "dst", norm=norm)


def sst_spectrum(noise_basis, grid: GridSpec, geom: ArrayGeometry) -> SpectrumGrid:
    """Rank-reduction spectrum ``1 / det(T)``."""
    det, _, _ = grid_signatures(noise_basis, grid, geom)
    return _sst_from_signatures(grid, geom, det)


def dst_spectrum(noise_basis, grid: GridSpec, geom: ArrayGeometry, norm="spectral") -> SpectrumGrid:
    """``1 / ||T||`` with the spectral (default) or Frobenius norm."""
    _, smax, frob = grid_signatures(noise_basis, grid, geom)
    return _dst_from_signatures(grid, geom, smax, frob, norm)


def _pol_from_vector(g):
    """Map a polarization vector (any phase/scale) to ``Pol``; eta is 0 when undefined."""
    g1, g2 = complex(g[0]), complex(g[1])
    scale = math.hypot(abs(g1), abs(g2))
    # round-off sized components are zero: gamma lands exactly on 0 or 90
    if abs(g1) < 1e-12 * scale:
        g1 = 0j
    if abs(g2) < 1e-12 * scale:
        g2 = 0j
    gamma = math.degrees(math.atan2(abs(g1), abs(g2)))
    if g1 == 0 or g2 == 0:
        eta = 0.0
    else:
        eta = math.degrees(np.angle(g1 * g2.conjugate()))
    if eta <= -180.0:
        eta += 360.0
    return Pol(min(max(gamma, 0.0), 90.0), eta)


def sst_polarization(noise_basis, dir_hat: Dir, geom: ArrayGeometry, rank_tol=RANK_TOL) -> Pol:
    """Polarization minimizing ``||Un^H B g||`` at an SST direction.

    The minimizer is the eigenvector of the test matrix with the smallest
    eigenvalue.

    Raises:
        AmbiguousPolarizationError: the test matrix is (numerically) zero, as
            happens at a DST direction, so every polarization fits equally.
    """
    w, v = np.linalg.eigh(test_matrix(dir_hat, noise_basis, geom))
    if w[1] < rank_tol * geom.num_sensors:
        raise AmbiguousPolarizationError(
            f"test matrix at {dir_hat} has rank 0 (sigma_max={w[1]:.3g}); polarization is ambiguous")
    return _pol_from_vector(v[:, 0])


def sst_polarization_search(noise_basis, dir_hat: Dir, geom: ArrayGeometry, step=0.1) -> Pol:
    """Exhaustive (gamma, eta) search of ``g^H T g``; reference for ``sst_polarization``."""
    t = test_matrix(dir_hat, noise_basis, geom)
    gammas = np.round(np.arange(0.0, 90.0 + 1e-9, step), 9)
    etas = np.round(np.arange(-180.0 + step, 180.0 + 1e-9, step), 9)
    cost = _quadratic_form(t[0, 0].real, t[1, 1].real, t[0, 1],
                           np.deg2rad(gammas)[:, None], np.deg2rad(etas)[None, :])
    i, j = np.unravel_index(int(np.argmin(cost)), cost.shape)
    return Pol(float(gammas[i]), float(etas[j]))


def angular_distance(d1: Dir, d2: Dir, phi_period=180.0) -> float:
    """Euclidean distance in (theta, phi) degrees with phi wrapped modulo ``phi_period``."""
    dphi = abs(d1.phi - d2.phi) % phi_period
    dphi = min(dphi, phi_period - dphi)
    return math.hypot(d1.theta - d2.theta, dphi)


def _strict_local_maxima(values, periodic, rel_tol=1e-9):
    nt, nphi = values.shape
    padded = np.full((nt + 2, nphi + 2), -np.inf)
    padded[1:-1, 1:-1] = values
    if periodic:
        padded[1:-1, 0] = values[:, -1]
        padded[1:-1, -1] = values[:, 0]
    centre = padded[1:-1, 1:-1]
    # a cell must beat its neighbours by more than round-off
    margin = rel_tol * np.abs(centre)
    mask = np.ones(values.shape, dtype=bool)
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di == 0 and dj == 0:
                continue
            mask &= centre - margin > padded[1 + di:nt + 1 + di, 1 + dj:nphi + 1 + dj]
    return np.nonzero(mask)


def _parabolic_offset(lo, mid, hi):
    lo, mid, hi = np.log(lo), np.log(mid), np.log(hi)
    curv = lo - 2.0 * mid + hi
    if not np.isfinite(curv) or curv >= 0:
        return 0.0
    return float(np.clip(0.5 * (lo - hi) / curv, -0.5, 0.5))


def _refine(spectrum, i, j):
    v = spectrum.values
    nt, nphi = v.shape
    theta, phi = float(spectrum.theta[i]), float(spectrum.phi[j])
    if 0 < i < nt - 1:
        theta += _parabolic_offset(v[i - 1, j], v[i, j], v[i + 1, j]) * (spectrum.theta[1] - spectrum.theta[0])
    if nphi > 2 and (spectrum.phi_periodic or 0 < j < nphi - 1):
        dphi = spectrum.phi[1] - spectrum.phi[0]
        phi += _parabolic_offset(v[i, (j - 1) % nphi], v[i, j], v[i, (j + 1) % nphi]) * dphi
        phi %= 180.0
    return Dir(min(max(theta, 0.0), 90.0), phi)


def _select_peaks(spectrum, count, min_separation, exclude=(), exclusion_radius=0.0, reject=None):
    rows, cols = _strict_local_maxima(spectrum.values, spectrum.phi_periodic)
    vals = spectrum.values[rows, cols]
    # descending value, ties to lower (theta, phi)
    order = np.lexsort((cols, rows, -vals))
    chosen = []
    chosen_dirs = []
    for k in order:
        if len(chosen) == count:
            break
        d = spectrum.dir_at(rows[k], cols[k])
        if any(angular_distance(d, e) <= exclusion_radius for e in exclude):
            continue
        if any(angular_distance(d, c) < min_separation for c in chosen_dirs):
            continue
        if reject is not None and reject(d):
            continue
        chosen.append((int(rows[k]), int(cols[k])))
        chosen_dirs.append(d)
    if len(chosen) < count:
        warnings.warn(f"found {len(chosen)} of {count} requested peaks in the {spectrum.kind} spectrum",
                      PeakShortfallWarning, stacklevel=3)
    return chosen


def find_peaks(spectrum: SpectrumGrid, count: int, min_separation=2.0,
               exclude=(), exclusion_radius=0.0, refine=False, reject=None):
    """Greedy selection of the ``count`` largest strict 8-neighbour local maxima.

    Peaks closer than ``min_separation`` to an already chosen one, within
    ``exclusion_radius`` of any direction in ``exclude``, or for which
    ``reject(dir)`` is true are skipped. Emits ``PeakShortfallWarning`` and
    returns what exists when fewer are found.
    """
    if count < 1:
        raise ConfigurationError(f"peak count must be >= 1, got {count}")
    cells = _select_peaks(spectrum, count, min_separation, exclude, exclusion_radius, reject)
    if refine:
        return [_refine(spectrum, i, j) for i, j in cells]
    return [spectrum.dir_at(i, j) for i, j in cells]


def ambiguity_residual(direction: Dir, pol: Pol, dst_dir: Dir, geom: ArrayGeometry) -> float:
    """Fraction of ``q(direction, pol)`` lying outside the plane ``range(a kron Omega)`` of ``dst_dir``.

    Every direction at the elevation of a DST source carries a linearly
    polarized response inside that source's two-dimensional signal plane, so
    the rank-reduction spectrum vanishes along the whole elevation row. Those
    ghosts have a residual near 0; a genuine SST response has one near 1.
    """
    q = joint_steering_vector(direction, pol, geom)
    b = manifold_basis(dst_dir, geom)
    # columns of b are orthogonal with squared norm N
    inside = b @ (b.conj().T @ q) / geom.num_sensors
    return float(np.linalg.norm(q - inside) / np.linalg.norm(q))


@dataclass(frozen=True)
class Peak:
    dir: Dir
    value: float
    label: str
    sigma_max: float
    sigma_min: float
    pol: Optional[Pol] = None

    def to_record(self):
        rec = {"theta": self.dir.theta, "phi": self.dir.phi, "label": self.label}
        if self.pol is not None:
            rec["gamma"] = self.pol.gamma
            rec["eta"] = self.pol.eta
        rec.update(value=self.value, sigma_max=self.sigma_max, sigma_min=self.sigma_min)
        return rec


@dataclass
class PeakSet:
    peaks: list
    complete: bool = True

    def __post_init__(self):
        self.peaks = sorted(self.peaks, key=lambda p: -p.value)

    def __len__(self):
        return len(self.peaks)

    def __iter__(self):
        return iter(self.peaks)

    def by_label(self, label):
        return [p for p in self.peaks if p.label == label]

    def to_records(self):
        return [p.to_record() for p in self.peaks]

    def to_json(self, **kwargs):
        return json.dumps({"complete": self.complete, "peaks": self.to_records()}, **kwargs)

    def table(self):
        lines = [f"{'label':<5} {'theta':>8} {'phi':>8} {'gamma':>8} {'eta':>8} {'value':>12}"]
        for p in self.peaks:
            g = f"{p.pol.gamma:8.2f}" if p.pol else f"{'-':>8}"
            e = f"{p.pol.eta:8.2f}" if p.pol else f"{'-':>8}"
            lines.append(f"{p.label:<5} {p.dir.theta:8.2f} {p.dir.phi:8.2f} {g} {e} {p.value:12.5g}")
        return "\n".join(lines)


def two_step_from_covariance(r, num_sst: int, num_dst: int, grid: GridSpec = None,
                             geom: ArrayGeometry = None, *, exclusion_radius=2.0,
                             min_separation=2.0, norm="spectral", refine=False,
                             ambiguity_tol=AMBIGUITY_TOL) -> PeakSet:
    """Two-step SST/DST estimation from a covariance matrix.

    DST directions come from the peaks of ``1/||T||``. SST directions are the
    largest peaks of ``1/det T`` farther than ``exclusion_radius`` from every
    DST peak and off every DST ambiguity ridge (``ambiguity_residual`` below
    ``ambiguity_tol``); each gets its polarization from the test-matrix null
    vector. Pass ``ambiguity_tol=0`` to disable the ridge test.
    """
    grid = grid or GridSpec()
    geom = geom or ArrayGeometry()
    dims = num_sst + 2 * num_dst
    if num_sst < 0 or num_dst < 0:
        raise ConfigurationError("source counts must be non-negative")
    if dims >= geom.dim:
        raise ConfigurationError(f"M1 + 2*M2 = {dims} must be < 3N = {geom.dim}")
    if dims == 0:
        return PeakSet([], complete=True)
    un = decompose(r, dims).noise_basis
    det, smax, frob = grid_signatures(un, grid, geom)

    peaks = []
    complete = True
    dst_dirs = []
    if num_dst:
        spec = _dst_from_signatures(grid, geom, smax, frob, norm)
        found = find_peaks(spec, num_dst, min_separation, refine=refine)
        complete &= len(found) == num_dst
        for d in found:
            smx, smn = rank_signature(d, un, geom)
            peaks.append(Peak(d, spec.value_at(d), "DST", smx, smn))
        dst_dirs = found
    if num_sst:
        spec = _sst_from_signatures(grid, geom, det)

        def on_ridge(d):
            if not dst_dirs or ambiguity_tol <= 0:
                return False
            try:
                pol = sst_polarization(un, d, geom)
            except AmbiguousPolarizationError:
                return True
            return any(ambiguity_residual(d, pol, e, geom) < ambiguity_tol for e in dst_dirs)

        found = find_peaks(spec, num_sst, min_separation, exclude=dst_dirs,
                           exclusion_radius=exclusion_radius, refine=refine, reject=on_ridge)
        complete &= len(found) == num_sst
        for d in found:
            smx, smn = rank_signature(d, un, geom)
            try:
                pol = sst_polarization(un, d, geom)
            except AmbiguousPolarizationError:
                pol = None
            peaks.append(Peak(d, spec.value_at(d), "SST", smx, smn, pol))
    return PeakSet(peaks, complete)


def two_step_estimate(y, num_sst: int, num_dst: int, grid: GridSpec = None,
                      geom: ArrayGeometry = None, **kwargs) -> PeakSet:
    """Two-step estimation from a 3N x K snapshot matrix; see ``two_step_from_covariance``."""
    geom = geom or ArrayGeometry()
    y = np.asarray(y)
    if y.shape[0] != geom.dim:
        raise ConfigurationError(f"snapshot matrix has {y.shape[0]} rows, array needs {geom.dim}")
    dims = num_sst + 2 * num_dst
    if dims >= geom.dim:
        raise ConfigurationError(f"M1 + 2*M2 = {dims} must be < 3N = {geom.dim}")
    return two_step_from_covariance(sample_covariance(y), num_sst, num_dst, grid, geom, **kwargs)
