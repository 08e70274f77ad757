"""Sample covariance and signal/noise subspace split."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DomainError

WEAK_GAP_RATIO = 1.5


class WeakEigengapWarning(UserWarning):
    """The eigenvalues on either side of the signal/noise split are close."""


@dataclass(frozen=True)
class SubspacePair:
    signal_basis: np.ndarray
    noise_basis: np.ndarray
    eigenvalues: np.ndarray

    @property
    def noise_projector(self):
        un = self.noise_basis
        return un @ un.conj().T


def sample_covariance(y: np.ndarray) -> np.ndarray:
    """``(1/K) Y Y^H``, symmetrized so the result is exactly Hermitian."""
    y = np.asarray(y)
    if y.ndim != 2 or y.shape[1] == 0:
        raise DomainError("snapshot matrix must be 2-D with at least one column")
    r = y @ y.conj().T / y.shape[1]
    return 0.5 * (r + r.conj().T)


def decompose(r: np.ndarray, num_signal_dims: int, hermitian_tol: float = 1e-10) -> SubspacePair:
    """Eigen-decompose ``r`` and split after the ``num_signal_dims`` largest eigenvalues.

    Eigenvector phases are left as LAPACK returns them; callers should only
    rely on projectors.
    """
    r = np.asarray(r)
    n = r.shape[0]
    if r.ndim != 2 or r.shape[1] != n:
        raise DomainError("covariance must be square")
    scale = max(np.linalg.norm(r), 1.0)
    if np.linalg.norm(r - r.conj().T) > hermitian_tol * scale:
        raise ConfigurationError("covariance is not Hermitian")
    if not (0 <= num_signal_dims < n):
        raise ConfigurationError(f"num_signal_dims={num_signal_dims} must lie in [0, {n})")
    w, v = np.linalg.eigh(0.5 * (r + r.conj().T))
    # eigh is ascending; a stable descending order keeps ties in LAPACK order
    order = np.argsort(-w, kind="stable")
    w, v = w[order], v[:, order]
    if num_signal_dims > 0:
        hi, lo = w[num_signal_dims - 1], w[num_signal_dims]
        # lo <= 0 happens for noise-free data and means an unbounded gap
        if hi <= 0 or (lo > 0 and hi / lo < WEAK_GAP_RATIO):
            warnings.warn(f"weak eigengap at split {num_signal_dims}", WeakEigengapWarning,
                          stacklevel=2)
    return SubspacePair(v[:, :num_signal_dims], v[:, num_signal_dims:], w)
