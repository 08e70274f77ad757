"""Array manifold of a uniform linear tripole array.

Every public function takes angles in degrees. Internally they are converted
to radians exactly once.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateDSTError, DomainError

# |det G| below this means the two DST polarization vectors are parallel.
_PARALLEL_TOL = 1e-9


@dataclass(frozen=True)
class Dir:
    """Direction of arrival: elevation ``theta`` and azimuth ``phi`` in degrees."""

    theta: float
    phi: float

    def __post_init__(self):
        if not (0.0 <= self.theta <= 90.0):
            raise DomainError(f"theta={self.theta} outside [0, 90]")
        if not (0.0 <= self.phi < 180.0):
            raise DomainError(f"phi={self.phi} outside [0, 180)")

    @property
    def radians(self):
        return np.deg2rad(self.theta), np.deg2rad(self.phi)


@dataclass(frozen=True)
class Pol:
    """Polarization: auxiliary angle ``gamma`` and phase difference ``eta`` in degrees."""

    gamma: float
    eta: float

    def __post_init__(self):
        if not (0.0 <= self.gamma <= 90.0):
            raise DomainError(f"gamma={self.gamma} outside [0, 90]")
        if not (-180.0 < self.eta <= 180.0):
            raise DomainError(f"eta={self.eta} outside (-180, 180]")

    @property
    def radians(self):
        return np.deg2rad(self.gamma), np.deg2rad(self.eta)

    @property
    def is_linear(self):
        return self.gamma in (0.0, 90.0) or self.eta in (0.0, 180.0)


@dataclass(frozen=True)
class ArrayGeometry:
    """Tripole ULA with ``num_sensors`` elements spaced ``spacing_wavelengths`` apart."""

    num_sensors: int = 5
    spacing_wavelengths: float = 0.5

    def __post_init__(self):
        if int(self.num_sensors) != self.num_sensors or self.num_sensors < 2:
            raise DomainError(f"num_sensors={self.num_sensors} must be an integer >= 2")
        if not self.spacing_wavelengths > 0:
            raise DomainError(f"spacing_wavelengths={self.spacing_wavelengths} must be > 0")

    @property
    def tau(self):
        """Inter-sensor phase shift 2*pi*d/lambda."""
        return 2.0 * np.pi * self.spacing_wavelengths

    @property
    def dim(self):
        """Length of a joint steering vector, 3N."""
        return 3 * self.num_sensors


def _pol_vector_rad(gamma, eta):
    return np.array([np.sin(gamma) * np.exp(1j * eta), np.cos(gamma)], dtype=complex)


def _angular_matrix_rad(theta, phi):
    ct, st = np.cos(theta), np.sin(theta)
    cp, sp = np.cos(phi), np.sin(phi)
    return np.array([[ct * cp, -sp], [ct * sp, cp], [-st, 0.0]])


def _steering_rad(theta, num_sensors, tau):
    return np.exp(-1j * tau * np.sin(theta) * np.arange(num_sensors))


def polarization_vector(pol: Pol) -> np.ndarray:
    """Unit polarization vector ``[sin(gamma) e^{j eta}, cos(gamma)]``."""
    return _pol_vector_rad(*pol.radians)


def angular_matrix(direction: Dir) -> np.ndarray:
    """Real 3x2 matrix whose orthonormal columns span the transverse plane."""
    return _angular_matrix_rad(*direction.radians)


def angular_polarization_vector(direction: Dir, pol: Pol) -> np.ndarray:
    """Field vector seen by one tripole, ``Omega(dir) @ g(pol)``."""
    return angular_matrix(direction) @ polarization_vector(pol)


def steering_vector(direction: Dir, geom: ArrayGeometry) -> np.ndarray:
    """Spatial phase progression ``exp(-j n tau sin(theta))``; independent of phi."""
    return _steering_rad(np.deg2rad(direction.theta), geom.num_sensors, geom.tau)


def manifold_basis(direction: Dir, geom: ArrayGeometry) -> np.ndarray:
    """The 3N x 2 matrix ``B = a kron Omega`` used by both two-step estimators."""
    return np.kron(steering_vector(direction, geom)[:, None], angular_matrix(direction))


def joint_steering_vector(direction: Dir, pol: Pol, geom: ArrayGeometry) -> np.ndarray:
    """Joint direction-polarization response ``a kron p`` (length 3N, norm sqrt(N))."""
    return np.kron(steering_vector(direction, geom), angular_polarization_vector(direction, pol))


def joint_steering_matrix(direction: Dir, pol1: Pol, pol2: Pol, geom: ArrayGeometry) -> np.ndarray:
    """3N x 2 response of a DST source, one column per sub-signal.

    Raises:
        DegenerateDSTError: if the two polarization vectors are parallel.
    """
    g = np.column_stack([polarization_vector(pol1), polarization_vector(pol2)])
    if abs(np.linalg.det(g)) < _PARALLEL_TOL:
        raise DegenerateDSTError(f"polarizations {pol1} and {pol2} are parallel")
    return np.column_stack([
        joint_steering_vector(direction, pol1, geom),
        joint_steering_vector(direction, pol2, geom),
    ])
