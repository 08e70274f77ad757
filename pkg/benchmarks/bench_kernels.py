"""Time the grid-signature kernel under numba and the numpy fallback.

Usage: python3 benchmarks/bench_kernels.py [--step DEG] [--repeat N]
"""
import argparse
import statistics
import time

import numpy as np

from mstdoa import _kernels
from mstdoa.array_manifold import ArrayGeometry
from mstdoa.estimators import GridSpec, _compressed, _grid_trig
from mstdoa.subspace import decompose
from mstdoa.synthesis import exact_covariance, reference_scenario


def _time(fn, args, repeat):
    runs = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        runs.append(time.perf_counter() - t0)
    return statistics.median(runs), min(runs)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--step", type=float, default=0.1)
    ap.add_argument("--repeat", type=int, default=5)
    opts = ap.parse_args()

    geom = ArrayGeometry()
    un = decompose(exact_covariance(reference_scenario()), 3).noise_basis
    grid = GridSpec(step=opts.step)
    args = (_compressed(un, grid, geom),) + tuple(_grid_trig(grid))
    cells = grid.theta_axis.size * grid.phi_axis.size
    print(f"grid {grid.theta_axis.size} x {grid.phi_axis.size} = {cells} cells, step {opts.step} deg")

    backends = [("numpy", _kernels.grid_signatures_numpy)]
    if _kernels.grid_signatures_numba is not None:
        t0 = time.perf_counter()
        _kernels.grid_signatures_numba(*args)
        print(f"numba first call (compile or cache load): {time.perf_counter() - t0:.3f} s")
        backends.insert(0, ("numba", _kernels.grid_signatures_numba))
    else:
        print("numba unavailable or disabled; timing numpy only")

    results = {}
    for name, fn in backends:
        med, best = _time(fn, args, opts.repeat)
        results[name] = fn(*args)
        print(f"{name:6s} median {med * 1e3:8.1f} ms  best {best * 1e3:8.1f} ms  "
              f"{cells / med / 1e6:6.1f} Mcells/s")
    if len(results) == 2:
        diff = max(float(np.max(np.abs(a - b))) for a, b in zip(results["numba"], results["numpy"]))
        print(f"max abs difference between backends: {diff:.2e}")


if __name__ == "__main__":
    main()
