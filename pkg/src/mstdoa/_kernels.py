"""Grid kernels for the 2x2 test matrix ``T = B^H P B`` with ``B = a(theta) kron Omega(theta, phi)``.

With the noise projector ``P`` cut into N x N blocks of size 3x3, the test
matrix factors as ``T = Omega^T C(theta) Omega`` where
``C(theta) = sum_nm conj(a_n) a_m P_nm`` is a 3x3 Hermitian matrix that depends
on elevation only. The per-cell work is then a handful of real 3-vector
contractions, which is what the kernels below evaluate.

Each kernel has a vectorized numpy implementation and a loop implementation
compiled with numba; the exported names pick numba unless it is unavailable
or disabled through ``MSTDOA_DISABLE_NUMBA``.
"""
import numpy as np

from ._accel import HAVE_NUMBA, jit


def compress_projector(projector, steering):
    """Per-elevation 3x3 matrices ``C[t] = sum_nm conj(A[t, n]) A[t, m] P_nm``.

    Args:
        projector: 3N x 3N Hermitian noise projector.
        steering: (n_theta, N) steering vectors, one row per elevation.
    """
    n = steering.shape[1]
    blocks = projector.reshape(n, 3, n, 3)
    return np.einsum("tn,nimj,tm->tij", steering.conj(), blocks, steering, optimize=True)


def grid_entries_numpy(c, cos_t, sin_t, cos_p, sin_p):
    """Return ``(t11, t22, t12)`` on the (theta, phi) grid."""
    ct, st = cos_t[:, None], sin_t[:, None]
    cp, sp = cos_p[None, :], sin_p[None, :]
    cxx, cyy, czz = c[:, 0, 0].real[:, None], c[:, 1, 1].real[:, None], c[:, 2, 2].real[:, None]
    cxy, cxz, cyz = c[:, 0, 1][:, None], c[:, 0, 2][:, None], c[:, 1, 2][:, None]
    cyx, czx, czy = c[:, 1, 0][:, None], c[:, 2, 0][:, None], c[:, 2, 1][:, None]

    cp2, sp2, csp = cp * cp, sp * sp, cp * sp
    # transverse (x, y) quadratic form along (cos phi, sin phi)
    radial = cp2 * cxx + 2.0 * csp * cxy.real + sp2 * cyy
    t11 = ct * ct * radial - 2.0 * ct * st * (cp * cxz.real + sp * cyz.real) + st * st * czz
    t22 = sp2 * cxx - 2.0 * csp * cxy.real + cp2 * cyy
    t12 = ct * (csp * (cyy - cxx) + cp2 * cxy - sp2 * cyx) - st * (cp * czy - sp * czx)
    return t11, t22, t12


def signatures_from_entries(t11, t22, t12):
    """Return ``(det, sigma_max, frobenius)`` of the 2x2 Hermitian matrices."""
    a12 = np.abs(t12) ** 2
    det = t11 * t22 - a12
    half = 0.5 * (t11 + t22)
    disc = np.sqrt((0.5 * (t11 - t22)) ** 2 + a12)
    smax = half + disc
    frob = np.sqrt(t11 * t11 + t22 * t22 + 2.0 * a12)
    return det, smax, frob


def grid_signatures_numpy(c, cos_t, sin_t, cos_p, sin_p):
    return signatures_from_entries(*grid_entries_numpy(c, cos_t, sin_t, cos_p, sin_p))


def _grid_entries_loop(c, cos_t, sin_t, cos_p, sin_p):
    nt = cos_t.shape[0]
    nphi = cos_p.shape[0]
    t11 = np.empty((nt, nphi))
    t22 = np.empty((nt, nphi))
    t12 = np.empty((nt, nphi), dtype=np.complex128)
    for i in range(nt):
        ct = cos_t[i]
        st = sin_t[i]
        c00 = c[i, 0, 0]
        c01 = c[i, 0, 1]
        c02 = c[i, 0, 2]
        c10 = c[i, 1, 0]
        c11 = c[i, 1, 1]
        c12 = c[i, 1, 2]
        c20 = c[i, 2, 0]
        c21 = c[i, 2, 1]
        c22 = c[i, 2, 2]
        for j in range(nphi):
            cp = cos_p[j]
            sp = sin_p[j]
            w1x = ct * cp
            w1y = ct * sp
            w1z = -st
            w2x = -sp
            w2y = cp
            u0 = c00 * w1x + c01 * w1y + c02 * w1z
            u1 = c10 * w1x + c11 * w1y + c12 * w1z
            u2 = c20 * w1x + c21 * w1y + c22 * w1z
            v0 = c00 * w2x + c01 * w2y
            v1 = c10 * w2x + c11 * w2y
            v2 = c20 * w2x + c21 * w2y
            t11[i, j] = (w1x * u0 + w1y * u1 + w1z * u2).real
            t22[i, j] = (w2x * v0 + w2y * v1).real
            t12[i, j] = w1x * v0 + w1y * v1 + w1z * v2
    return t11, t22, t12


def _grid_signatures_loop(c, cos_t, sin_t, cos_p, sin_p):
    nt = cos_t.shape[0]
    nphi = cos_p.shape[0]
    det = np.empty((nt, nphi))
    smax = np.empty((nt, nphi))
    frob = np.empty((nt, nphi))
    for i in range(nt):
        ct = cos_t[i]
        st = sin_t[i]
        c00 = c[i, 0, 0]
        c01 = c[i, 0, 1]
        c02 = c[i, 0, 2]
        c10 = c[i, 1, 0]
        c11 = c[i, 1, 1]
        c12 = c[i, 1, 2]
        c20 = c[i, 2, 0]
        c21 = c[i, 2, 1]
        c22 = c[i, 2, 2]
        for j in range(nphi):
            cp = cos_p[j]
            sp = sin_p[j]
            w1x = ct * cp
            w1y = ct * sp
            w1z = -st
            w2x = -sp
            w2y = cp
            u0 = c00 * w1x + c01 * w1y + c02 * w1z
            u1 = c10 * w1x + c11 * w1y + c12 * w1z
            u2 = c20 * w1x + c21 * w1y + c22 * w1z
            v0 = c00 * w2x + c01 * w2y
            v1 = c10 * w2x + c11 * w2y
            v2 = c20 * w2x + c21 * w2y
            a = (w1x * u0 + w1y * u1 + w1z * u2).real
            b = (w2x * v0 + w2y * v1).real
            off = w1x * v0 + w1y * v1 + w1z * v2
            a12 = off.real * off.real + off.imag * off.imag
            half_diff = 0.5 * (a - b)
            det[i, j] = a * b - a12
            smax[i, j] = 0.5 * (a + b) + np.sqrt(half_diff * half_diff + a12)
            frob[i, j] = np.sqrt(a * a + b * b + 2.0 * a12)
    return det, smax, frob


if HAVE_NUMBA:
    grid_entries_numba = jit(_grid_entries_loop)
    grid_signatures_numba = jit(_grid_signatures_loop)
    grid_entries = grid_entries_numba
    grid_signatures = grid_signatures_numba
else:
    grid_entries_numba = grid_signatures_numba = None
    grid_entries = grid_entries_numpy
    grid_signatures = grid_signatures_numpy
