import os
import subprocess
import sys

import numpy as np
import pytest

from mstdoa import _kernels
from mstdoa._accel import HAVE_NUMBA
from mstdoa.array_manifold import ArrayGeometry
from mstdoa.estimators import GridSpec, _compressed, _grid_trig

needs_numba = pytest.mark.skipif(not HAVE_NUMBA, reason="numba disabled or missing")


def _inputs(rng, step=2.0):
    geom = ArrayGeometry(5, 0.5)
    x = rng.standard_normal((15, 10)) + 1j * rng.standard_normal((15, 10))
    un = np.linalg.qr(x)[0]
    grid = GridSpec(step=step)
    return (_compressed(un, grid, geom),) + tuple(_grid_trig(grid))


@needs_numba
def test_signature_backends_agree(rng):
    args = _inputs(rng)
    for a, b in zip(_kernels.grid_signatures_numba(*args), _kernels.grid_signatures_numpy(*args)):
        np.testing.assert_allclose(a, b, rtol=1e-10, atol=1e-13)


@needs_numba
def test_entry_backends_agree(rng):
    args = _inputs(rng, 3.7)
    for a, b in zip(_kernels.grid_entries_numba(*args), _kernels.grid_entries_numpy(*args)):
        np.testing.assert_allclose(a, b, rtol=1e-10, atol=1e-13)


def test_signatures_consistent_with_entries(rng):
    args = _inputs(rng)
    t11, t22, t12 = _kernels.grid_entries_numpy(*args)
    det, smax, frob = _kernels.grid_signatures(*args)
    np.testing.assert_allclose(det, t11 * t22 - np.abs(t12) ** 2, atol=1e-12)
    smin = det / smax
    np.testing.assert_allclose(smax + smin, t11 + t22, atol=1e-12)


def test_env_flag_selects_numpy():
    env = dict(os.environ, MSTDOA_DISABLE_NUMBA="1")
    code = ("from mstdoa import _kernels, _accel; "
            "assert not _accel.HAVE_NUMBA; "
            "assert _kernels.grid_signatures is _kernels.grid_signatures_numpy; "
            "assert _kernels.grid_signatures_numba is None; "
            "print(_accel.backend())")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True)
    assert out.returncode == 0, out.stderr
    assert out.stdout.strip() == "numpy"
