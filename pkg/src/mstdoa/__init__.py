"""Direction finding for mixtures of single- and dual-transmission polarized sources."""

__version__ = "0.1.0"

from .array_manifold import (
    ArrayGeometry,
    Dir,
    Pol,
    angular_matrix,
    angular_polarization_vector,
    joint_steering_matrix,
    joint_steering_vector,
    manifold_basis,
    polarization_vector,
    steering_vector,
)
from .estimators import (
    GridSpec,
    PeakSet,
    SpectrumGrid,
    dst_spectrum,
    find_peaks,
    music4d_slice,
    music4d_value,
    sst_polarization,
    sst_spectrum,
    test_matrix,
    two_step_estimate,
    two_step_from_covariance,
)
from .evaluation import SweepConfig, crb_table, numeric_crb, run_sweep
from .subspace import SubspacePair, decompose, sample_covariance
from .synthesis import (
    Scenario,
    SourceDescriptor,
    SourceKind,
    exact_covariance,
    generate_snapshots,
    reference_scenario,
)
