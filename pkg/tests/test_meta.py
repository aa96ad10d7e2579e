import numpy as np
import pytest
from hypothesis import given, strategies as st

from poolmatch.meta import (MetaSpec, make_domains, meta_covariance, meta_mean, outlier_indices,
                            outlier_sequence_means, sample_domain, sample_domain_means)


def test_two_point_degenerate_probability():
    spec = MetaSpec("two_point", dim=3, offset=(1.0, 2.0, 3.0), prob=0.0)
    M = sample_domain_means(spec, 10, seed=4)
    assert np.array_equal(M, np.zeros((10, 3)))


def test_two_point_at_least_one_outlier():
    spec = MetaSpec("two_point", dim=2, offset=(3.0, 0.0), prob=0.5)
    hits = [np.any(np.any(sample_domain_means(spec, 2, s) != 0, axis=1)) for s in range(10_000)]
    assert abs(np.mean(hits) - (1 - (1 - 0.5) ** 2)) <= 0.02


def test_symmetric_mean_of_means():
    spec = MetaSpec("symmetric", dim=2, spread=1.5)
    K = 10_000
    M = sample_domain_means(spec, K, seed=11)
    assert np.all(np.abs(M.mean(axis=0)) <= 4 * 1.5 / np.sqrt(K))


def test_symmetric_first_and_third_moments():
    # x and -x share a law iff odd moments vanish; compare both orientations
    spec = MetaSpec("symmetric", dim=2, spread=1.5)
    X = sample_domain_means(spec, 100_000, seed=3) - spec.target
    n = X.shape[0]
    for p in (1, 3):
        diff = np.mean(X**p, axis=0) - np.mean((-X) ** p, axis=0)
        se = 2 * np.std(X**p, axis=0) / np.sqrt(n)
        assert np.all(np.abs(diff) <= 4 * se)


def test_sample_domain_zero_sigma():
    dom = sample_domain([1.5, -2.0], 0.0, 37, seed=9)
    assert np.array_equal(dom.samples, np.tile([1.5, -2.0], (37, 1)))


def test_sample_domain_mean_tolerance_over_seeds():
    mean = np.array([0.3, -0.7])
    for seed in range(10):
        dom = sample_domain(mean, 0.8, 150, seed)
        assert np.all(np.abs(dom.empirical_mean - mean) <= 3 * 0.8 / np.sqrt(150))


def test_sample_domain_covariance():
    dom = sample_domain(np.zeros(2), 1.0, 10_000, seed=5)
    assert np.linalg.norm(np.cov(dom.samples, rowvar=False) - np.eye(2)) < 0.1


def test_sample_domain_errors():
    with pytest.raises(ValueError):
        sample_domain([0.0], 1.0, 0, seed=0)
    with pytest.raises(ValueError):
        sample_domain([0.0], -1.0, 5, seed=0)


def test_outlier_sequence_examples():
    base = MetaSpec("symmetric", dim=2, spread=0.3)
    M = outlier_sequence_means(base, 2.5, 3, 6, seed=1)
    norms = [np.linalg.norm(m) for m in M]
    assert [k for k in range(1, 7) if norms[k - 1] == 2.5] == [3, 6]
    assert outlier_indices(3, 6) == [3, 6]
    assert all(np.linalg.norm(m) == 2.5 for m in outlier_sequence_means(base, 2.5, 1, 8, seed=2))
    assert len(outlier_indices(3, 30)) == 10


@given(st.integers(0, 10**6), st.integers(1, 7), st.floats(0.1, 50.0))
def test_outlier_distance_is_exact(seed, dim, dist):
    base = MetaSpec("symmetric", dim=dim, spread=0.2)
    M = outlier_sequence_means(base, dist, 2, 8, seed)
    for k in outlier_indices(2, 8):
        assert np.linalg.norm(M[k - 1]) == dist


def test_outlier_distance_with_offset_target():
    # with mu_star != 0 the final subtraction can round, so allow a few ulps
    base = MetaSpec("symmetric", dim=3, mu_star=(1.0, -2.0, 0.5), spread=0.2)
    M = outlier_sequence_means(base, 2.5, 3, 30, seed=6)
    for k in outlier_indices(3, 30):
        assert np.linalg.norm(M[k - 1] - np.array(base.mu_star)) == pytest.approx(2.5, abs=1e-14)


@given(st.sampled_from(["symmetric", "asymmetric", "two_point"]), st.integers(0, 2**31),
       st.integers(1, 12))
def test_determinism_and_prefix_stability(kind, seed, K):
    spec = MetaSpec(kind, dim=2, prob=0.4)
    A = sample_domain_means(spec, K, seed)
    assert A.tobytes() == sample_domain_means(spec, K, seed).tobytes()
    # row k depends only on (seed, k), so a longer draw extends a shorter one
    assert np.array_equal(sample_domain_means(spec, K + 3, seed)[:K], A)


def test_make_domains_deterministic():
    spec = MetaSpec("asymmetric", dim=2)
    a = make_domains(spec, 5, 0.8, 20, seed=3)
    b = make_domains(spec, 5, 0.8, 20, seed=3)
    assert all(x.samples.tobytes() == y.samples.tobytes() for x, y in zip(a, b))
    assert [d.k for d in a] == [1, 2, 3, 4, 5]
    assert [d.n for d in make_domains(spec, 3, 0.8, [4, 5, 6], seed=0)] == [4, 5, 6]


def test_asymmetric_moments_match_closed_form():
    spec = MetaSpec("asymmetric", dim=2)
    X = sample_domain_means(spec, 50_000, seed=8)
    mu = meta_mean(spec)
    assert np.linalg.norm(mu) > 0.5          # the mean is pulled off target
    assert np.allclose(X.mean(axis=0), mu, atol=0.03)
    assert np.allclose(np.cov(X, rowvar=False), meta_covariance(spec), atol=0.05)


def test_two_point_covariance_closed_form():
    spec = MetaSpec("two_point", dim=2, offset=(2.0, 1.0), prob=0.3)
    X = sample_domain_means(spec, 40_000, seed=2)
    assert np.allclose(np.cov(X, rowvar=False), meta_covariance(spec), atol=0.03)


def test_outlier_sequence_covariance_oracle():
    spec = MetaSpec("outlier_sequence", dim=2, base=MetaSpec("symmetric", dim=2, spread=0.4))
    C = meta_covariance(spec)
    # mixture: 1/3 on the 2.5-circle (isotropic, 2.5^2/2 per axis), 2/3 from the base
    expected = (1 / 3) * 2.5**2 / 2 + (2 / 3) * 0.4**2
    assert np.allclose(C, expected * np.eye(2), atol=0.01)
    assert meta_covariance(spec) is not C and np.array_equal(meta_covariance(spec), C)


def test_spec_validation_names_fields():
    cases = [(dict(kind="symmetric", spread=0), "meta.spread"),
             (dict(kind="asymmetric", mass=1.5), "meta.mass"),
             (dict(kind="two_point", prob=-0.1), "meta.prob"),
             (dict(kind="asymmetric", direction=(0.0, 0.0)), "direction"),
             (dict(kind="symmetric", mu_star=(0.0,)), "meta.mu_star"),
             (dict(kind="outlier_sequence"), "meta.base"),
             (dict(kind="bogus"), "meta.kind")]
    for kwargs, name in cases:
        with pytest.raises(ValueError, match=name):
            MetaSpec(**kwargs)


def test_dict_roundtrip():
    specs = [MetaSpec("symmetric", dim=3, spread=0.7),
             MetaSpec("asymmetric", dim=2, direction=(1.0, 0.0), mass=0.2),
             MetaSpec("two_point", dim=2, offset=(1.0, 1.0), prob=0.5),
             MetaSpec("outlier_sequence", dim=2, base=MetaSpec("asymmetric", dim=2), every=4)]
    for spec in specs:
        again = MetaSpec.from_dict(spec.to_dict())
        assert again.to_dict() == spec.to_dict()
        assert np.array_equal(sample_domain_means(again, 6, 1), sample_domain_means(spec, 6, 1))
    with pytest.raises(ValueError, match="meta.colour"):
        MetaSpec.from_dict({"kind": "symmetric", "colour": 1})
