#!/usr/bin/env python3
"""
Test the 1-D Wasserstein scores and the batch protocol
"""

import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from cloud_model import CloudSample, ConfigInvalid, EmptySeries, JetLabel, ParticleCloud
from efp import EfpConfig
from toygen import ToyConfig, generate
from w1 import (
    JETNET_BASELINES,
    W1Protocol,
    baseline,
    jet_masses,
    reference_baseline,
    w1_1d,
    w1_batched,
    w1efp,
    w1m,
    w1p,
)


@pytest.fixture(scope="module")
def toy():
    return generate(ToyConfig(n_jets=400, prongs=2, rng_seed=3))


def quantile_oracle(x, y, grid=200_001):
    """Integral of |F_x^-1 - F_y^-1| on a dense quantile grid."""
    q = (np.arange(grid) + 0.5) / grid
    return float(np.mean(np.abs(np.quantile(x, q, method="inverted_cdf") - np.quantile(y, q, method="inverted_cdf"))))


def test_identical_series():
    assert w1_1d([0.1, 0.5, 0.3], [0.3, 0.1, 0.5]) == 0.0


def test_point_masses():
    assert w1_1d([0.0], [1.0]) == 1.0


def test_sorted_pairing():
    assert w1_1d([0.0, 1.0], [0.5, 1.5]) == pytest.approx(0.5)
    assert quantile_oracle([0.0, 1.0], [0.5, 1.5]) == pytest.approx(0.5, abs=1e-6)


def test_unequal_sizes_match_quantile_oracle():
    rng = np.random.default_rng(4)
    x, y = rng.normal(size=30), rng.normal(0.3, 1.2, size=45)
    assert w1_1d(x, y) == pytest.approx(quantile_oracle(x, y), abs=1e-4)


def test_symmetric_and_shift_law():
    rng = np.random.default_rng(1)
    x = rng.normal(size=100)
    assert w1_1d(x, x + 0.25) == pytest.approx(0.25, rel=1e-12)
    y = rng.normal(size=100)
    assert w1_1d(x, y) == w1_1d(y, x)


def test_triangle_inequality():
    rng = np.random.default_rng(2)
    for _ in range(200):
        sizes = rng.integers(1, 40, size=3)
        x, y, z = (rng.normal(rng.normal(), rng.uniform(0.1, 2.0), size=s) for s in sizes)
        assert w1_1d(x, z) <= w1_1d(x, y) + w1_1d(y, z) + 1e-12


def test_zero_only_for_equal_multisets():
    x = np.array([0.3, -1.0, 2.5, 0.3])
    assert w1_1d(x, x[::-1]) == 0.0
    assert w1_1d(x, np.array([0.3, -1.0, 2.5, 0.30001])) > 0.0
    assert w1_1d(x, np.array([0.3, -1.0, 2.5])) > 0.0


@pytest.mark.parametrize("k", [2, 3, 7])
def test_replication_invariance(k):
    rng = np.random.default_rng(k)
    x, y = rng.normal(size=25), rng.normal(0.2, 1.3, size=25)
    assert w1_1d(np.tile(x, k), np.repeat(y, k)) == pytest.approx(w1_1d(x, y), abs=1e-12)


def test_unequal_sizes_agree_with_replicated_equal_sizes():
    rng = np.random.default_rng(12)
    for n, m in ((3, 5), (4, 6), (10, 15)):
        x, y = rng.normal(size=n), rng.exponential(size=m)
        # scipy's integral path versus the sorted-pair path on lcm-sized copies
        lcm = np.lcm(n, m)
        equal = w1_1d(np.tile(x, lcm // n), np.tile(y, lcm // m))
        assert w1_1d(x, y) == pytest.approx(equal, abs=1e-12)


def test_empty_series():
    with pytest.raises(EmptySeries):
        w1_1d([], [1.0])


def test_non_finite_series():
    with pytest.raises(ValueError):
        w1_1d([np.nan], [1.0])


def test_protocol_validation():
    with pytest.raises(ConfigInvalid):
        W1Protocol(batch_size=1).validate()
    with pytest.raises(ConfigInvalid):
        W1Protocol(n_batches=0).validate()


def test_self_comparison_is_zero(toy):
    proto = W1Protocol(batch_size=200, n_batches=3, rng_seed=9)
    for score in (w1m(toy, toy, proto), w1p(toy, toy, proto), w1efp(toy, toy, proto)):
        assert score.mean == 0.0
        assert score.stderr == 0.0
        assert len(score.batches) == 3


def test_batches_and_stderr(toy):
    other = generate(ToyConfig(n_jets=400, prongs=1, rng_seed=5))
    score = w1m(toy, other, W1Protocol(batch_size=100, n_batches=4, rng_seed=1))
    assert score.mean == pytest.approx(np.mean(score.batches))
    assert score.stderr == pytest.approx(np.std(score.batches, ddof=0))
    assert score.mean > 0


def test_w1p_components(toy):
    other = generate(ToyConfig(n_jets=400, prongs=3, rng_seed=6))
    score = w1p(toy, other, W1Protocol(batch_size=100, n_batches=2))
    assert len(score.components) == 3
    assert score.mean == pytest.approx(np.mean(score.components))


def test_w1efp_has_five_components(toy):
    other = generate(ToyConfig(n_jets=400, prongs=3, rng_seed=6))
    assert len(w1efp(toy, other, W1Protocol(batch_size=100, n_batches=2)).components) == 5


@pytest.mark.parametrize("delta", [1e-3, 1e-2])
def test_mass_shift_law(delta):
    sample = generate(ToyConfig(n_jets=10_000, prongs=2, rng_seed=12))
    masses = jet_masses(sample)
    score = w1_batched(masses, masses + delta, W1Protocol(batch_size=2000, n_batches=5, rng_seed=3))
    assert abs(score.mean - delta) <= max(2 * score.stderr, 1e-12)


def test_phi_shift_moves_w1p_by_a_third(toy):
    delta = 0.01
    shifted = []
    for c in toy.clouds:
        rows = c.particles.copy()
        rows[rows[:, 3] == 1, 1] += delta
        shifted.append(ParticleCloud(rows, c.capacity))
    gen = CloudSample(tuple(shifted), toy.label)
    score = w1p(toy, gen, W1Protocol(batch_size=200, n_batches=3))
    assert score.mean == pytest.approx(delta / 3, rel=1e-6)
    assert score.components[0] == 0.0
    assert score.components[2] == 0.0


def test_batch_size_is_clamped_with_warning(toy):
    score = w1m(toy, toy, W1Protocol(batch_size=1000, n_batches=2))
    assert score.warnings
    assert "clamped" in score.warnings[0]


def test_results_do_not_depend_on_threads(toy):
    other = generate(ToyConfig(n_jets=400, prongs=3, rng_seed=6))
    proto = W1Protocol(batch_size=150, n_batches=4, rng_seed=2)
    assert w1p(toy, other, proto, threads=1) == w1p(toy, other, proto, threads=4)


def test_verify_reruns_batches(toy):
    proto = W1Protocol(batch_size=100, n_batches=2, verify=True)
    assert w1m(toy, toy, proto).mean == 0.0


def test_baseline_of_constant_sample():
    c = ParticleCloud.from_rows([(0.0, 0.1, 0.5, 1), (0.0, -0.1, 0.5, 1)])
    sample = CloudSample((c,) * 20)
    scores = baseline(sample, W1Protocol(batch_size=10, n_batches=2))
    assert [s.mean for s in scores] == [0.0, 0.0, 0.0]


def test_baseline_is_positive_and_reproducible(toy):
    proto = W1Protocol(batch_size=100, n_batches=3, rng_seed=4)
    first = baseline(toy, proto, EfpConfig())
    second = baseline(toy, proto, EfpConfig())
    assert first == second
    assert all(s.mean > 0 for s in first)


def test_baseline_seed_stability(toy):
    a = baseline(toy, W1Protocol(batch_size=150, n_batches=5, rng_seed=1))
    b = baseline(toy, W1Protocol(batch_size=150, n_batches=5, rng_seed=2))
    for x, y in zip(a, b):
        spread = 3 * (x.stderr + y.stderr) + 0.5 * max(x.mean, y.mean)
        assert abs(x.mean - y.mean) <= spread


def test_disjoint_halves_within_bootstrap_baseline():
    sample = generate(ToyConfig(n_jets=800, prongs=3, rng_seed=8))
    first, second = sample.subset(range(400)), sample.subset(range(400, 800))
    proto = W1Protocol(batch_size=200, n_batches=5, rng_seed=0)
    reference = baseline(sample, proto)[2]
    halves = w1efp(first, second, proto)
    assert halves.mean <= 3 * (reference.mean + reference.stderr)


def test_reference_baseline():
    gluon = reference_baseline(JetLabel.GLUON)
    assert gluon["w1m"]["mean"] == pytest.approx(0.7e-3)
    assert gluon["w1efp"]["spread"] == pytest.approx(0.07e-5)
    assert reference_baseline(JetLabel.TOY) is None
    assert set(JETNET_BASELINES) == {JetLabel.GLUON, JetLabel.LIGHT_QUARK, JetLabel.TOP_QUARK}


if __name__ == "__main__":
    pytest.main([__file__])
