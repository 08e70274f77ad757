"""Command-line front end: ``mstdoa {simulate,estimate,sweep,spectrum,replay}``.

Exit codes: 0 success, 2 usage or configuration error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from ._accel import backend
from .array_manifold import ArrayGeometry, Pol
from .errors import ConfigurationError, DomainError, MstDoaError, NumericalError
from .estimators import GridSpec, dst_spectrum, music4d_slice, sst_spectrum, two_step_from_covariance
from .evaluation import RmseTable, SweepConfig, crb_table, iter_sweep
from .scenario_io import (
    file_digest,
    load_preset,
    load_scenario,
    read_snapshots,
    scenario_to_dict,
    write_json,
    write_snapshots,
)
from .subspace import decompose, sample_covariance
from .synthesis import exact_covariance, generate_snapshots

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 2, 3

log = logging.getLogger("mstdoa")


def _positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got '{text}'") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _nonneg_int(text):
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {v}")
    return v


def _positive_float(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got '{text}'") from None
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be > 0, got {v}")
    return v


def _now():
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


class Run:
    """Collects outputs and writes ``<command>.manifest.json`` next to them."""

    def __init__(self, args, argv):
        self.command = args.command
        self.out_dir = Path(args.out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.manifest = {
            "tool": "mstdoa",
            "version": __version__,
            "backend": backend(),
            "command": args.command,
            "argv": list(argv),
            "seed": getattr(args, "seed", None),
            "started": _now(),
            "config": {},
            "outputs": {},
            "complete": False,
        }

    @property
    def path(self):
        return self.out_dir / f"{self.command}.manifest.json"

    def output(self, name):
        return self.out_dir / name

    def record(self, path):
        # keyed relative to the output directory so the manifest can move with it
        self.manifest["outputs"][Path(path).relative_to(self.out_dir).as_posix()] = file_digest(path)

    def finish(self, complete=True, **extra):
        self.manifest.update(extra)
        self.manifest["complete"] = complete
        self.manifest["finished"] = _now()
        write_json(self.path, self.manifest)


def _resolve_scenario(args):
    """Scenario and sweep defaults from ``--scenario`` / ``--preset``, or ``(None, {})``."""
    if getattr(args, "scenario", None) and getattr(args, "preset", None):
        raise ConfigurationError("give --scenario or --preset, not both")
    if getattr(args, "preset", None):
        scenario, sweep = load_preset(args.preset)
    elif getattr(args, "scenario", None):
        scenario, sweep = load_scenario(args.scenario)
    else:
        return None, {}
    snr = getattr(args, "snr", None)
    if snr:
        if len(snr) != 1 and args.command != "sweep":
            raise ConfigurationError(f"{args.command} takes a single --snr")
        if args.command != "sweep":
            scenario = scenario.with_snr(snr[0])
    return scenario, sweep


def _grid(args, default_step=0.1):
    step = args.grid_step if args.grid_step is not None else default_step
    return GridSpec(tuple(args.theta_range), tuple(args.phi_range), step)


def _data_source(args, scenario):
    """Return ``(covariance, geometry, description)`` for estimate/spectrum."""
    if args.snapshot_file:
        y = read_snapshots(args.snapshot_file)
        if scenario is not None:
            geom = scenario.geometry
        else:
            if y.shape[0] % 3:
                raise ConfigurationError(f"snapshot file has {y.shape[0]} rows, not a multiple of 3")
            geom = ArrayGeometry(y.shape[0] // 3, args.spacing)
        if y.shape[0] != geom.dim:
            raise ConfigurationError(f"snapshot file has {y.shape[0]} rows, array needs {geom.dim}")
        return sample_covariance(y), geom, {"snapshot_file": str(args.snapshot_file)}
    if scenario is None:
        raise ConfigurationError("need --snapshot-file, --scenario or --preset")
    if args.oracle:
        return exact_covariance(scenario), scenario.geometry, {"oracle": True}
    if args.seed is None:
        raise ConfigurationError("--seed is required when simulating from a scenario")
    y = generate_snapshots(scenario, args.snapshots, args.seed)
    return sample_covariance(y), scenario.geometry, {"simulated": True, "snapshots": args.snapshots}


def cmd_simulate(args, run):
    scenario, _ = _resolve_scenario(args)
    if scenario is None:
        raise ConfigurationError("simulate needs --scenario or --preset")
    y = generate_snapshots(scenario, args.snapshots, args.seed)
    out = run.output(args.out)
    write_snapshots(out, y)
    run.record(out)
    run.manifest["config"] = {"scenario": scenario_to_dict(scenario), "snapshots": args.snapshots,
                              "shape": list(y.shape)}
    print(f"wrote {y.shape[0]}x{y.shape[1]} snapshot matrix to {out}")
    run.finish()
    return EXIT_OK


def cmd_estimate(args, run):
    scenario, _ = _resolve_scenario(args)
    m1 = args.m1 if args.m1 is not None else (scenario.num_sst if scenario else None)
    m2 = args.m2 if args.m2 is not None else (scenario.num_dst if scenario else None)
    if m1 is None or m2 is None:
        raise ConfigurationError("--m1 and --m2 are required without a scenario")
    grid = _grid(args)
    dim = scenario.geometry.dim if scenario else None
    if dim is not None and m1 + 2 * m2 >= dim:
        raise ConfigurationError(f"M1 + 2*M2 = {m1 + 2 * m2} must be < 3N = {dim}")
    r, geom, source = _data_source(args, scenario)
    if m1 + 2 * m2 >= geom.dim:
        raise ConfigurationError(f"M1 + 2*M2 = {m1 + 2 * m2} must be < 3N = {geom.dim}")
    if m1 == 0 and m2 == 0:
        print("mstdoa: warning: M1 = M2 = 0, nothing to estimate", file=sys.stderr)
    peaks = two_step_from_covariance(r, m1, m2, grid, geom, norm=args.norm,
                                     exclusion_radius=args.exclusion_radius, refine=args.refine)
    out = run.output(args.out)
    out.write_text(peaks.to_json(indent=2) + "\n")
    run.record(out)
    print(peaks.table())
    run.manifest["config"] = {
        "scenario": scenario_to_dict(scenario) if scenario else None, "m1": m1, "m2": m2,
        "grid": {"theta_range": list(grid.theta_range), "phi_range": list(grid.phi_range),
                 "step": grid.step},
        "norm": args.norm, "exclusion_radius": args.exclusion_radius, "data": source}
    run.finish()
    return EXIT_OK if peaks.complete else EXIT_NUMERIC


def cmd_spectrum(args, run):
    scenario, _ = _resolve_scenario(args)
    grid = _grid(args)
    r, geom, source = _data_source(args, scenario)
    dims = args.signal_dims
    if dims is None:
        if scenario is None:
            raise ConfigurationError("--signal-dims is required without a scenario")
        dims = scenario.num_signal_dims
    un = decompose(r, dims).noise_basis
    config = {"which": args.which, "signal_dims": dims, "data": source,
              "grid": {"theta_range": list(grid.theta_range), "phi_range": list(grid.phi_range),
                       "step": grid.step}}
    if args.which == "sst":
        spec = sst_spectrum(un, grid, geom)
    elif args.which == "dst":
        spec = dst_spectrum(un, grid, geom, args.norm)
        config["norm"] = args.norm
    else:
        pol = Pol(args.gamma, args.eta)
        spec = music4d_slice(un, pol, grid, geom)
        config["polarization"] = {"gamma": pol.gamma, "eta": pol.eta}
    out = run.output(args.out or f"spectrum_{args.which}.csv")
    with open(out, "w", newline="") as fh:
        spec.write_csv(fh)
    run.record(out)
    top = spec.argmax_dirs()
    print(f"{args.which} spectrum: max {spec.values.max():.6g} at "
          + ", ".join(f"({d.theta:g}, {d.phi:g})" for d in top[:8])
          + (" ..." if len(top) > 8 else ""))
    run.manifest["config"] = config
    run.finish()
    return EXIT_OK


def cmd_sweep(args, run):
    scenario, defaults = _resolve_scenario(args)
    if scenario is None:
        raise ConfigurationError("sweep needs --scenario or --preset")
    snrs = args.snr or defaults.get("snr_db") or [0, 5, 10, 15, 20, 25, 30]
    trials = args.trials or defaults.get("trials", 200)
    snapshots = args.snapshots or defaults.get("snapshots", 100)
    seed = args.seed if args.seed is not None else defaults.get("seed", 0)
    step = args.grid_step if args.grid_step is not None else defaults.get("grid_step", 0.1)
    grid = GridSpec(tuple(args.theta_range), tuple(args.phi_range), step)
    jobs = args.jobs or os.cpu_count() or 1
    config = SweepConfig(scenario, tuple(snrs), trials, snapshots, grid, seed, args.norm,
                         args.exclusion_radius, jobs=jobs)
    run.manifest["seed"] = seed
    run.manifest["config"] = {
        "scenario": scenario_to_dict(scenario), "snr_db": list(config.snr_list), "trials": trials,
        "snapshots": snapshots, "grid_step": step, "norm": args.norm, "jobs": jobs}

    crb = crb_table(scenario, config.snr_list, snapshots)
    crb_path = run.output("crb.csv")
    crb_path.write_text(crb.to_csv())
    run.record(crb_path)

    results = []
    complete = True
    executor = ProcessPoolExecutor(max_workers=jobs) if jobs > 1 else None
    try:
        for snr, errors in iter_sweep(config, executor):
            results.append((snr, errors))
            log.info("finished %g dB", snr)
    except KeyboardInterrupt:
        complete = False
        print("interrupted; writing partial results", file=sys.stderr)
    finally:
        if executor is not None:
            executor.shutdown(cancel_futures=True)

    table = RmseTable.from_errors(scenario, results, trials)
    rmse_path = run.output("rmse.csv")
    rmse_path.write_text(table.to_csv())
    run.record(rmse_path)
    if args.gnuplot:
        for name, body in (("rmse.dat", table.to_gnuplot()), ("crb.dat", crb.to_gnuplot())):
            p = run.output(name)
            p.write_text(body)
            run.record(p)
    print(table.to_gnuplot(), end="")
    run.finish(complete, completed_snr_db=[s for s, _ in results])
    return EXIT_OK if complete else 130


def cmd_replay(args, argv):
    manifest = json.loads(Path(args.manifest).read_text())
    recorded = manifest.get("argv")
    if not recorded:
        raise ConfigurationError(f"{args.manifest}: no recorded argv")
    if args.out_dir:
        recorded = [a for a in recorded] + ["--out-dir", args.out_dir]
    return main(recorded)


def _add_common(p, scenario=True):
    if scenario:
        p.add_argument("--scenario", type=Path, help="scenario YAML file")
        p.add_argument("--preset", choices=["paper-fig23"], help="built-in scenario")
    p.add_argument("--out-dir", default=".", help="directory for outputs and manifest")
    p.add_argument("-v", "--verbose", action="store_true")


def _add_grid(p):
    p.add_argument("--grid-step", type=_positive_float, default=None, help="degrees (default 0.1)")
    p.add_argument("--theta-range", type=float, nargs=2, default=[0.0, 90.0], metavar=("LO", "HI"))
    p.add_argument("--phi-range", type=float, nargs=2, default=[0.0, 180.0], metavar=("LO", "HI"))
    p.add_argument("--norm", choices=["spectral", "frobenius"], default="spectral")


def _add_data(p):
    p.add_argument("--snapshot-file", type=Path, help=".csv or .bin snapshot matrix")
    p.add_argument("--spacing", type=_positive_float, default=0.5,
                   help="d/lambda when only a snapshot file is given")
    p.add_argument("--oracle", action="store_true", help="use the exact scenario covariance")
    p.add_argument("--seed", type=int)
    p.add_argument("--snapshots", "-K", type=_positive_int, default=100)
    p.add_argument("--snr", type=float, action="append", help="override scenario SNR (dB)")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="mstdoa", description="Direction finding for mixed SST/DST polarized sources.",
        epilog="exit codes: 0 success, 2 usage or configuration error, 3 numerical failure")
    parser.add_argument("--version", action="version", version=f"mstdoa {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a snapshot matrix")
    _add_common(p)
    p.add_argument("--snapshots", "-K", type=_positive_int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--snr", type=float, action="append", help="override scenario SNR (dB)")
    p.add_argument("--out", default="snapshots.csv", help="file name inside --out-dir (.csv or .bin)")

    p = sub.add_parser("estimate", help="two-step SST/DST direction estimation")
    _add_common(p)
    _add_data(p)
    _add_grid(p)
    p.add_argument("--m1", type=_nonneg_int, help="number of SST sources")
    p.add_argument("--m2", type=_nonneg_int, help="number of DST sources")
    p.add_argument("--exclusion-radius", type=float, default=2.0)
    p.add_argument("--refine", action="store_true", help="parabolic sub-grid refinement")
    p.add_argument("--out", default="peaks.json")

    p = sub.add_parser("sweep", help="Monte-Carlo RMSE and CRB versus SNR")
    _add_common(p)
    _add_grid(p)
    p.add_argument("--snr", type=float, action="append", help="SNR in dB (repeatable)")
    p.add_argument("--trials", type=_positive_int)
    p.add_argument("--snapshots", "-K", type=_positive_int)
    p.add_argument("--seed", type=int)
    p.add_argument("--jobs", type=_positive_int, help="worker processes (default: all CPUs)")
    p.add_argument("--exclusion-radius", type=float, default=2.0)
    p.add_argument("--gnuplot", action="store_true", help="also write whitespace .dat tables")

    p = sub.add_parser("spectrum", help="export a spectrum surface as CSV")
    _add_common(p)
    _add_data(p)
    _add_grid(p)
    p.add_argument("--which", choices=["sst", "dst", "music4d-slice"], required=True)
    p.add_argument("--gamma", type=float, default=40.0, help="music4d-slice polarization angle")
    p.add_argument("--eta", type=float, default=25.0, help="music4d-slice phase difference")
    p.add_argument("--signal-dims", type=_nonneg_int, help="M1 + 2*M2 (default from scenario)")
    p.add_argument("--out", help="file name inside --out-dir")

    p = sub.add_parser("replay", help="re-run the command recorded in a manifest")
    p.add_argument("manifest", type=Path)
    p.add_argument("--out-dir", help="write to this directory instead")
    return parser


COMMANDS = {"simulate": cmd_simulate, "estimate": cmd_estimate, "sweep": cmd_sweep,
            "spectrum": cmd_spectrum}


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "replay":
            return cmd_replay(args, argv)
        run = Run(args, argv)
        return COMMANDS[args.command](args, run)
    except (ConfigurationError, DomainError) as exc:
        print(f"mstdoa: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as exc:
        print(f"mstdoa: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except MstDoaError as exc:
        print(f"mstdoa: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
