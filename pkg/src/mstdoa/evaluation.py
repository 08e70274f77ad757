"""Monte-Carlo RMSE sweeps and a numerical stochastic Cramer-Rao bound."""
from __future__ import annotations

import csv
import io
import logging
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .array_manifold import _angular_matrix_rad, _pol_vector_rad, _steering_rad
from .errors import NonIdentifiableError
from .estimators import GridSpec, PeakShortfallWarning, angular_distance, two_step_estimate
from .synthesis import Scenario, SourceKind, generate_snapshots
from .subspace import WeakEigengapWarning

log = logging.getLogger(__name__)

MATCH_RADIUS = 5.0
FD_STEP = 1e-4


@dataclass(frozen=True)
class SweepConfig:
    scenario: Scenario
    snr_list: tuple = (0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0)
    trials: int = 200
    snapshots: int = 100
    grid: GridSpec = field(default_factory=GridSpec)
    base_seed: int = 0
    norm: str = "spectral"
    exclusion_radius: float = 2.0
    match_radius: float = MATCH_RADIUS
    jobs: int = 1

    def __post_init__(self):
        object.__setattr__(self, "snr_list", tuple(float(s) for s in self.snr_list))
        if self.trials < 1 or self.snapshots < 1:
            raise ValueError("trials and snapshots must be >= 1")


def doa_param_names(scenario):
    names = []
    for k, _ in enumerate(scenario.sources, start=1):
        names += [f"theta{k}", f"phi{k}"]
    return names


def _wrap_phi(d):
    """Signed azimuth difference folded into (-90, 90]."""
    d = (d + 90.0) % 180.0 - 90.0
    return 90.0 if d == -90.0 else d


def match_estimates(scenario, peakset, radius=MATCH_RADIUS):
    """Per-source ``(d_theta, d_phi)`` errors in degrees, NaN where unmatched.

    Estimates are assigned to true sources of the same label by minimum total
    angular distance; an assignment farther than ``radius`` counts as a miss.
    """
    errors = np.full((len(scenario.sources), 2), np.nan)
    for kind in SourceKind:
        truth = [(i, s) for i, s in enumerate(scenario.sources) if s.kind is kind]
        est = peakset.by_label(kind.value)
        if not truth or not est:
            continue
        cost = np.array([[angular_distance(p.dir, s.dir) for p in est] for _, s in truth])
        rows, cols = linear_sum_assignment(cost)
        for r, c in zip(rows, cols):
            if cost[r, c] <= radius:
                i, s = truth[r]
                d = est[c].dir
                errors[i] = (d.theta - s.dir.theta, _wrap_phi(d.phi - s.dir.phi))
    return errors


def _run_trials(args):
    config, snr, trials = args
    scenario = config.scenario.with_snr(snr)
    m1, m2 = scenario.num_sst, scenario.num_dst
    out = np.full((len(trials), len(scenario.sources), 2), np.nan)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", PeakShortfallWarning)
        warnings.simplefilter("ignore", WeakEigengapWarning)
        for k, t in enumerate(trials):
            y = generate_snapshots(scenario, config.snapshots, config.base_seed + t)
            peaks = two_step_estimate(y, m1, m2, config.grid, scenario.geometry,
                                      norm=config.norm, exclusion_radius=config.exclusion_radius)
            out[k] = match_estimates(scenario, peaks, config.match_radius)
    return out


def _chunks(n, parts):
    size = max(1, math.ceil(n / parts))
    return [list(range(i, min(n, i + size))) for i in range(0, n, size)]


def iter_sweep(config: SweepConfig, executor=None):
    """Yield ``(snr_db, errors)`` per SNR; ``errors`` is (trials, sources, 2) in degrees.

    Trial ``t`` uses seed ``base_seed + t`` at every SNR.
    """
    parts = max(1, config.jobs) * 4 if executor is not None else 1
    for snr in config.snr_list:
        work = [(config, snr, c) for c in _chunks(config.trials, parts)]
        if executor is None:
            blocks = [_run_trials(w) for w in work]
        else:
            blocks = list(executor.map(_run_trials, work))
        yield snr, np.concatenate(blocks, axis=0)


@dataclass
class RmseTable:
    snr_list: list
    params: list
    rmse: np.ndarray          # (params, snr)
    failure_rate: np.ndarray  # (params, snr)
    trials: int

    @classmethod
    def from_errors(cls, scenario, results, trials):
        params = doa_param_names(scenario)
        snrs = [snr for snr, _ in results]
        rmse = np.full((len(params), len(snrs)), np.nan)
        fail = np.zeros_like(rmse)
        for j, (_, err) in enumerate(results):
            flat = err.reshape(err.shape[0], -1)  # theta1, phi1, theta2, ...
            for p in range(len(params)):
                col = flat[:, p]
                ok = ~np.isnan(col)
                fail[p, j] = 1.0 - ok.mean()
                if ok.any():
                    rmse[p, j] = math.sqrt(float(np.sum(col[ok] ** 2)) / int(ok.sum()))
        for p, name in enumerate(params):
            for j, snr in enumerate(snrs):
                if fail[p, j] > 0:
                    log.info("%s at %g dB: failure rate %.3f", name, snr, fail[p, j])
        return cls(snrs, params, rmse, fail, trials)

    def value(self, param, snr):
        return float(self.rmse[self.params.index(param), self.snr_list.index(snr)])

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["snr_db", "param", "rmse_deg", "failure_rate"])
        for j, snr in enumerate(self.snr_list):
            for p, name in enumerate(self.params):
                w.writerow([repr(float(snr)), name, repr(float(self.rmse[p, j])),
                            repr(float(self.failure_rate[p, j]))])
        return buf.getvalue()

    def to_gnuplot(self):
        return _gnuplot(self.snr_list, self.params, self.rmse, "rmse_deg")


@dataclass
class CrbTable:
    snr_list: list
    params: list
    crb: np.ndarray  # (params, snr), degrees

    def value(self, param, snr):
        return float(self.crb[self.params.index(param), self.snr_list.index(snr)])

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["snr_db", "param", "crb_deg"])
        for j, snr in enumerate(self.snr_list):
            for p, name in enumerate(self.params):
                w.writerow([repr(float(snr)), name, repr(float(self.crb[p, j]))])
        return buf.getvalue()

    def to_gnuplot(self):
        return _gnuplot(self.snr_list, self.params, self.crb, "crb_deg")


def _gnuplot(snrs, params, table, what):
    lines = [f"# {what}: one column per parameter", "# snr_db " + " ".join(params)]
    for j, snr in enumerate(snrs):
        lines.append(" ".join([repr(float(snr))] + [repr(float(v)) for v in table[:, j]]))
    return "\n".join(lines) + "\n"


def run_sweep(config: SweepConfig) -> RmseTable:
    """RMSE of every DOA parameter across ``config.snr_list``.

    Estimates farther than ``match_radius`` from their source are excluded from
    the RMSE and counted in ``failure_rate``.
    """
    if config.jobs > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as ex:
            results = list(iter_sweep(config, ex))
    else:
        results = list(iter_sweep(config))
    return RmseTable.from_errors(config.scenario, results, config.trials)


# --- Cramer-Rao bound -------------------------------------------------------

def crb_param_names(scenario):
    names = []
    for k, s in enumerate(scenario.sources, start=1):
        names += [f"theta{k}", f"phi{k}"]
        if s.kind is SourceKind.SST:
            names += [f"gamma{k}", f"eta{k}"]
    return names


def _true_params(scenario):
    vals = []
    for s in scenario.sources:
        vals += [math.radians(s.dir.theta), math.radians(s.dir.phi)]
        if s.kind is SourceKind.SST:
            vals += [math.radians(s.pols[0].gamma), math.radians(s.pols[0].eta)]
    return np.array(vals)


def model_covariance(scenario, psi):
    """Covariance at parameter vector ``psi`` (radians, ordered as ``crb_param_names``).

    DST polarizations, powers and the noise level are held at their scenario
    values.
    """
    geom = scenario.geometry
    cols = []
    k = 0
    for s in scenario.sources:
        theta, phi = psi[k], psi[k + 1]
        k += 2
        base = np.kron(_steering_rad(theta, geom.num_sensors, geom.tau)[:, None],
                       _angular_matrix_rad(theta, phi))
        if s.kind is SourceKind.SST:
            cols.append(base @ _pol_vector_rad(psi[k], psi[k + 1]))
            k += 2
        else:
            for pol in s.pols:
                cols.append(base @ _pol_vector_rad(*pol.radians))
    a = np.column_stack(cols)
    r = a @ scenario.source_covariance() @ a.conj().T + scenario.noise_power * np.eye(geom.dim)
    return 0.5 * (r + r.conj().T)


def covariance_derivatives(scenario, psi=None, step=FD_STEP):
    """Central-difference ``dR/dpsi_i`` for every parameter; shape (P, 3N, 3N)."""
    psi = _true_params(scenario) if psi is None else np.asarray(psi, dtype=float)
    out = []
    for i in range(psi.size):
        e = np.zeros_like(psi)
        e[i] = step
        out.append((model_covariance(scenario, psi + e) - model_covariance(scenario, psi - e)) / (2 * step))
    return np.array(out)


def fisher_information(scenario, snapshots, step=FD_STEP):
    """Stochastic-signal FIM ``K Re tr(R^-1 dR_i R^-1 dR_j)`` in radian units."""
    r = model_covariance(scenario, _true_params(scenario))
    rinv = np.linalg.inv(r)
    dr = covariance_derivatives(scenario, step=step)
    w = np.einsum("ab,pbc->pac", rinv, dr)
    fim = snapshots * np.einsum("pab,qba->pq", w, w).real
    return 0.5 * (fim + fim.T)


def numeric_crb(scenario: Scenario, snr_db, snapshots, step=FD_STEP, cond_limit=1e12):
    """CRB standard deviations in degrees, keyed by ``crb_param_names``.

    Raises:
        NonIdentifiableError: if the Fisher information is singular.
    """
    sc = scenario.with_snr(snr_db)
    fim = fisher_information(sc, snapshots, step)
    if not np.all(np.isfinite(fim)) or np.linalg.cond(fim) > cond_limit:
        raise NonIdentifiableError(f"Fisher information singular at {snr_db} dB")
    var = np.diag(np.linalg.inv(fim))
    if np.any(var <= 0):
        raise NonIdentifiableError(f"non-positive CRB variance at {snr_db} dB")
    return dict(zip(crb_param_names(sc), np.degrees(np.sqrt(var))))


def crb_table(scenario, snr_list, snapshots, step=FD_STEP) -> CrbTable:
    """CRB of the DOA parameters across ``snr_list``."""
    params = doa_param_names(scenario)
    cols = [numeric_crb(scenario, snr, snapshots, step) for snr in snr_list]
    crb = np.array([[col[p] for col in cols] for p in params])
    return CrbTable([float(s) for s in snr_list], params, crb)
