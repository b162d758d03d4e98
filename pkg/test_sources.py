# test_sources.py

import numpy as np
import pytest

from sources import (
    GaussianMixture,
    SampleBatch,
    ScalarGaussian,
    ScalarLaplacian,
    SourceSpec,
    VectorGaussian,
    haar_orthogonal,
    make_ring_gmm,
    make_vector_gaussian,
    sample,
)


def test_scalar_gaussian_moments():
    batch = sample(ScalarGaussian(0.0, 1.0), 100_000, seed=1)
    assert batch.points.shape == (100_000, 1)
    assert abs(batch.points.mean()) <= 0.02
    assert abs(batch.points.var() - 1.0) <= 0.03


def test_scalar_laplacian_variance():
    batch = sample(ScalarLaplacian(1.0), 100_000, seed=2)
    assert abs(batch.points.var() - 2.0) <= 0.1
    assert abs(batch.points.mean()) <= 0.03


@pytest.mark.parametrize("spec", [ScalarGaussian(), ScalarLaplacian(), make_vector_gaussian(3), make_ring_gmm()])
def test_sampling_is_deterministic(spec):
    a = sample(spec, 5, seed=123)
    b = sample(spec, 5, seed=123)
    assert a.points.tobytes() == b.points.tobytes()
    assert a.seed == 123
    assert not np.array_equal(a.points, sample(spec, 5, seed=124).points)


def test_invalid_specs_rejected():
    with pytest.raises(ValueError):
        ScalarGaussian(std=0.0)
    with pytest.raises(ValueError):
        ScalarLaplacian(scale=-1.0)
    with pytest.raises(ValueError):
        VectorGaussian(dim=2, eigen_stds=(1.0, 0.0))
    with pytest.raises(ValueError):
        VectorGaussian(dim=3, eigen_stds=(1.0, 1.0))
    with pytest.raises(ValueError):
        GaussianMixture(means=((0.0, 0.0), (1.0, 1.0)), component_std=1.0, weights=(0.5, 0.6))
    with pytest.raises(ValueError):
        GaussianMixture(means=((0.0, 0.0),), component_std=0.0, weights=(1.0,))
    with pytest.raises(ValueError):
        sample(ScalarGaussian(), 0, seed=0)


def test_vector_gaussian_two_dim_eigen_variances():
    spec = make_vector_gaussian(2, basis_seed=0)
    np.testing.assert_allclose(spec.eigen_variances, [2 ** -0.2, 2 ** -0.4], rtol=1e-15)
    np.testing.assert_allclose(spec.eigen_variances, [0.87055, 0.75786], atol=1e-5)


@pytest.mark.parametrize("d", [1, 2, 5, 10, 32])
def test_basis_is_orthogonal(d):
    u = make_vector_gaussian(d, basis_seed=d).basis
    assert np.max(np.abs(u.T @ u - np.eye(d))) <= 1e-10


def test_vector_gaussian_trace_ten_dims():
    spec = make_vector_gaussian(10)
    expected = sum(2 ** (-i / 5) for i in range(1, 11))
    assert spec.total_variance == pytest.approx(expected, rel=1e-12)
    assert spec.total_variance == pytest.approx(3.24206, abs=1e-5)
    assert np.trace(spec.covariance()) == pytest.approx(expected, rel=1e-10)


def test_vector_gaussian_empirical_covariance():
    spec = make_vector_gaussian(3, basis_seed=4)
    n = 200_000
    points = sample(spec, n, seed=9).points
    sigma = spec.covariance()
    empirical = points.T @ points / n
    # se of a product moment: sqrt((s_ii s_jj + s_ij^2) / n)
    se = np.sqrt((np.outer(np.diag(sigma), np.diag(sigma)) + sigma ** 2) / n)
    assert np.all(np.abs(empirical - sigma) <= 5 * se)


def test_basis_depends_on_seed_only():
    a = make_vector_gaussian(4, basis_seed=7)
    b = make_vector_gaussian(4, basis_seed=7)
    c = make_vector_gaussian(4, basis_seed=8)
    np.testing.assert_array_equal(a.basis, b.basis)
    assert not np.allclose(a.basis, c.basis)


def test_haar_orthogonal_signs_are_uniform():
    # first-column first-entry sign should be balanced under Haar measure
    rng = np.random.default_rng(0)
    signs = [np.sign(haar_orthogonal(3, rng)[0, 0]) for _ in range(2000)]
    assert abs(np.mean(signs)) < 0.1


def test_ring_gmm_geometry():
    gmm = make_ring_gmm()
    means = np.asarray(gmm.means)
    np.testing.assert_allclose(means, [[6.0, 0.0], [-3.0, 3.0 * np.sqrt(3)], [-3.0, -3.0 * np.sqrt(3)]],
                               atol=1e-12)
    assert gmm.weights == pytest.approx((1 / 3, 1 / 3, 1 / 3))
    assert gmm.component_std == 1.0
    for i in range(3):
        for j in range(i + 1, 3):
            assert np.linalg.norm(means[i] - means[j]) == pytest.approx(6 * np.sqrt(3), rel=1e-12)


def test_ring_gmm_component_counts():
    gmm = make_ring_gmm()
    n = 5000
    _, labels = gmm.draw_with_components(np.random.default_rng(31), n)
    counts = np.bincount(labels, minlength=3)
    sd = np.sqrt(n * (1 / 3) * (2 / 3))
    assert np.all(np.abs(counts - n / 3) <= 3 * sd)


def test_gmm_density_integrates_to_one():
    gmm = make_ring_gmm()
    axis = np.linspace(-14.0, 14.0, 561)
    step = axis[1] - axis[0]
    gx, gy = np.meshgrid(axis, axis, indexing="ij")
    density = gmm.density(np.column_stack([gx.ravel(), gy.ravel()]))
    assert abs(density.sum() * step * step - 1.0) <= 1e-3


def test_scalar_densities_integrate_to_one():
    grid = np.linspace(-30, 30, 60001)
    step = grid[1] - grid[0]
    for spec in (ScalarGaussian(0.5, 2.0), ScalarLaplacian(1.5)):
        assert spec.density(grid).sum() * step == pytest.approx(1.0, abs=1e-6)


def test_from_dict_round_trip():
    for spec in (ScalarGaussian(1.0, 2.0), ScalarLaplacian(0.5), make_vector_gaussian(3, 5), make_ring_gmm()):
        rebuilt = SourceSpec.from_dict(spec.to_dict())
        assert rebuilt == spec


def test_from_dict_requires_kind():
    with pytest.raises(KeyError):
        SourceSpec.from_dict({"std": 1.0})
    with pytest.raises(ValueError):
        SourceSpec.from_dict({"kind": "cauchy"})


def test_sample_batch_rejects_non_finite():
    with pytest.raises(ValueError):
        SampleBatch(points=np.array([[0.0], [np.nan]]))
    assert len(SampleBatch(points=np.zeros((0, 2)))) == 0
