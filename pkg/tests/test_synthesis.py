import warnings

import numpy as np
import pytest

from mstdoa.array_manifold import ArrayGeometry, Dir, Pol, joint_steering_vector
from mstdoa.errors import ConfigurationError, DegenerateDSTError, DomainError
from mstdoa.subspace import sample_covariance
from mstdoa.synthesis import (
    LinearPolarizationWarning,
    Scenario,
    SourceDescriptor,
    SourceKind,
    exact_covariance,
    generate_snapshots,
)

SST = SourceDescriptor.sst(20.0, 20.0, 50.0, 10.0)
DST = SourceDescriptor.dst(60.0, 60.0, (20.0, 50.0), (70.0, -40.0))


def test_source_validation():
    with pytest.raises(ConfigurationError):
        SourceDescriptor(SourceKind.SST, Dir(1, 1), (Pol(1, 1), Pol(2, 2)))
    with pytest.raises(ConfigurationError):
        SourceDescriptor(SourceKind.DST, Dir(1, 1), (Pol(1, 1),))
    with pytest.raises(ConfigurationError):
        SourceDescriptor.sst(1, 1, 1, 1, power=0.0)
    with pytest.raises(DegenerateDSTError):
        SourceDescriptor.dst(60, 60, (20, 50), (20, 50))


def test_linear_polarization_warns():
    with pytest.warns(LinearPolarizationWarning):
        SourceDescriptor.sst(20, 20, 0.0, 10.0)
    with pytest.warns(LinearPolarizationWarning):
        SourceDescriptor.sst(20, 20, 30.0, 180.0)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        SourceDescriptor.sst(20, 20, 50.0, 10.0)


def test_identifiability_enforced():
    geom = ArrayGeometry(2, 0.5)  # 3N = 6
    Scenario(geom, (SST, DST, DST))  # 5 < 6
    with pytest.raises(ConfigurationError):
        Scenario(geom, (SST, SST, DST, DST))


def test_snapshot_count_validated():
    with pytest.raises(DomainError):
        generate_snapshots(Scenario(sources=(SST,)), 0, 1)


def test_noise_free_sst_is_rank_one():
    sc = Scenario(ArrayGeometry(), (SST,), noise_power=0.0)
    y = generate_snapshots(sc, 50, 3)
    q = joint_steering_vector(SST.dir, SST.pols[0], sc.geometry)
    coef = q.conj() @ y / (q.conj() @ q)
    np.testing.assert_allclose(y, np.outer(q, coef), atol=1e-12)


def test_pure_noise_converges_to_identity():
    sc = Scenario(ArrayGeometry(), (), noise_power=2.0)
    r = sample_covariance(generate_snapshots(sc, 20000, 5))
    np.testing.assert_allclose(r, 2.0 * np.eye(15), atol=0.1)


def test_reference_scenario_three_dominant_eigenvalues(scenario):
    r = sample_covariance(generate_snapshots(scenario, 100, 0))
    w = np.sort(np.linalg.eigvalsh(r))[::-1]
    assert w[2] > 10 * w[3]


def test_dst_block_rank_two():
    sc = Scenario(ArrayGeometry(), (DST,), noise_power=0.0)
    s = np.linalg.svd(generate_snapshots(sc, 500, 11), compute_uv=False)
    assert s[1] > 1e-3 * s[0]
    assert s[2] < 1e-10 * s[0]


def test_reproducible_bitwise(scenario):
    a = generate_snapshots(scenario, 100, 42)
    b = generate_snapshots(scenario, 100, 42)
    assert a.tobytes() == b.tobytes()
    assert not np.array_equal(a, generate_snapshots(scenario, 100, 43))


def test_sample_covariance_converges(scenario):
    exact = exact_covariance(scenario)
    errs = []
    for k in (100, 10000):
        trials = [np.linalg.norm(sample_covariance(generate_snapshots(scenario, k, s)) - exact)
                  for s in range(5)]
        errs.append(np.mean(trials))
    # Frobenius error scales like 1/sqrt(K)
    assert errs[1] < errs[0] / 5


def test_qpsk_and_correlated_options(scenario):
    from dataclasses import replace
    sc = replace(scenario, signal_model="qpsk", dst_correlation=0.5)
    y = generate_snapshots(sc, 20000, 9)
    np.testing.assert_allclose(sample_covariance(y), exact_covariance(sc), atol=0.25)


class TestExactCovariance:
    def test_no_sources(self):
        np.testing.assert_array_equal(exact_covariance(Scenario(noise_power=0.3)), 0.3 * np.eye(15))

    def test_single_sst_eigenvalues(self):
        w = np.linalg.eigvalsh(exact_covariance(Scenario(sources=(SST,), noise_power=1.0)))
        np.testing.assert_allclose(w, [1.0] * 14 + [6.0], atol=1e-12)

    def test_reference_scenario_rank(self, oracle_cov, scenario):
        w = np.linalg.eigvalsh(oracle_cov)
        above = w > scenario.noise_power * (1 + 1e-9)
        assert above.sum() == 3
        np.testing.assert_allclose(oracle_cov, oracle_cov.conj().T, atol=0)
        assert w.min() > 0
