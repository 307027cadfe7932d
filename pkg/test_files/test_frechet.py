#!/usr/bin/env python3
"""
Test Gaussian fits, the Frechet distance and the activation providers
"""

import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from cloud_io import write_activations
from cloud_model import CloudSample, DegenerateSample, DimensionMismatch, ParticleCloud, ProviderMismatch
from frechet import (
    EfpSurrogate,
    ExternalActivations,
    GaussianSummary,
    fit_gaussian,
    fpnd,
    frechet_distance,
    sqrtm_psd,
)
from toygen import ToyConfig, generate


def gaussian(mean, cov, n=100):
    return GaussianSummary(np.atleast_1d(np.asarray(mean, float)), np.atleast_2d(np.asarray(cov, float)), n)


def test_constant_rows():
    fit = fit_gaussian(np.tile([1.0, 2.0, 3.0], (5, 1)))
    assert fit.mean.tolist() == [1.0, 2.0, 3.0]
    assert np.all(fit.cov == 0.0)


def test_unbiased_covariance():
    fit = fit_gaussian(np.array([[0.0], [2.0]]))
    assert fit.mean.tolist() == [1.0]
    assert fit.cov.tolist() == [[2.0]]


def test_monte_carlo_fit():
    draws = np.random.default_rng(0).standard_normal((100_000, 3))
    fit = fit_gaussian(draws)
    assert np.all(np.abs(fit.mean) < 0.02)
    assert np.all(np.abs(fit.cov - np.eye(3)) < 0.05)


def test_too_few_rows():
    with pytest.raises(DegenerateSample):
        fit_gaussian(np.ones((1, 3)))


def test_same_gaussian_is_zero():
    a = fit_gaussian(np.random.default_rng(1).normal(size=(50, 4)))
    assert frechet_distance(a, a) == pytest.approx(0.0, abs=1e-9)


def test_one_dimensional_closed_form():
    rng = np.random.default_rng(2)
    assert frechet_distance(gaussian(0, 1), gaussian(1, 1)) == pytest.approx(1.0, abs=1e-9)
    for _ in range(100):
        m1, m2 = rng.normal(size=2)
        s1, s2 = rng.uniform(0.1, 3.0, size=2)
        expected = (m1 - m2) ** 2 + (s1 - s2) ** 2
        assert frechet_distance(gaussian(m1, s1 ** 2), gaussian(m2, s2 ** 2)) == pytest.approx(expected, abs=1e-9)


def test_diagonal_closed_form():
    rng = np.random.default_rng(3)
    for _ in range(100):
        a, b = rng.uniform(0.1, 2.0, size=3), rng.uniform(0.1, 2.0, size=3)
        expected = np.sum((np.sqrt(a) - np.sqrt(b)) ** 2)
        value = frechet_distance(gaussian(np.zeros(3), np.diag(a)), gaussian(np.zeros(3), np.diag(b)))
        assert value == pytest.approx(expected, abs=1e-9)


def test_symmetry():
    rng = np.random.default_rng(4)
    a = fit_gaussian(rng.normal(size=(40, 3)))
    b = fit_gaussian(rng.normal(1.0, 2.0, size=(40, 3)))
    assert frechet_distance(a, b) == pytest.approx(frechet_distance(b, a), rel=1e-9)


def test_rotation_invariance():
    rng = np.random.default_rng(6)
    for dim in (2, 5, 9):
        acts_a = rng.normal(size=(200, dim))
        acts_b = rng.normal(0.5, 1.5, size=(150, dim)) @ rng.normal(size=(dim, dim))
        q, _ = np.linalg.qr(rng.normal(size=(dim, dim)))
        before = frechet_distance(fit_gaussian(acts_a), fit_gaussian(acts_b))
        after = frechet_distance(fit_gaussian(acts_a @ q), fit_gaussian(acts_b @ q))
        assert after == pytest.approx(before, abs=1e-8 * max(1.0, before))


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        frechet_distance(gaussian([0, 0], np.eye(2)), gaussian([0], [[1]]))


def test_sqrtm_of_singular_matrix():
    m = np.array([[1.0, 1.0], [1.0, 1.0]])
    root = sqrtm_psd(m)
    assert np.allclose(root @ root, m, atol=1e-12)


@pytest.fixture(scope="module")
def toy():
    return generate(ToyConfig(n_jets=300, prongs=2, rng_seed=1))


def test_surrogate_self_comparison(toy):
    result = fpnd(toy, toy, EfpSurrogate(), n=300)
    assert result.value == pytest.approx(0.0, abs=1e-9)
    assert result.metric_name == "frechet_surrogate"
    assert result.dimension == 7


def test_n_is_clamped_with_warning(toy):
    result = fpnd(toy, toy, EfpSurrogate(), n=5000)
    assert result.n == 300
    assert result.warnings


def test_surrogate_grows_with_angular_scaling(toy):
    values = []
    for delta in (0.01, 0.02, 0.04):
        stretched = []
        for c in toy.clouds:
            rows = c.particles.copy()
            rows[:, :2] *= 1.0 + delta
            stretched.append(ParticleCloud(rows, c.capacity))
        values.append(fpnd(toy, CloudSample(tuple(stretched)), EfpSurrogate(), n=300).value)
    assert values[0] < values[1] < values[2]


def test_external_activations_equal_on_both_sides(toy, tmp_path):
    acts = np.random.default_rng(5).normal(size=(len(toy), 6))
    write_activations(acts, str(tmp_path / "real.jact"))
    write_activations(acts, str(tmp_path / "gen.jact"))
    provider = ExternalActivations.from_files(str(tmp_path / "real.jact"), str(tmp_path / "gen.jact"))
    result = fpnd(toy, toy, provider, n=200)
    assert result.metric_name == "fpnd"
    assert result.value == pytest.approx(0.0, abs=1e-9)


def test_external_activations_need_one_row_per_cloud(toy):
    provider = ExternalActivations(np.zeros((10, 4)), np.zeros((10, 4)))
    with pytest.raises(ProviderMismatch):
        fpnd(toy, toy, provider, n=5)


def test_extra_activation_rows_are_rejected(toy):
    extra = np.random.default_rng(9).normal(size=(len(toy) + 1, 4))
    provider = ExternalActivations(extra[:len(toy)], extra)
    with pytest.raises(ProviderMismatch, match="gen activations have 301 rows"):
        fpnd(toy, toy, provider, n=50)


def test_external_activation_widths_must_agree():
    with pytest.raises(ProviderMismatch):
        ExternalActivations(np.zeros((3, 4)), np.zeros((3, 5)))


if __name__ == "__main__":
    pytest.main([__file__])
