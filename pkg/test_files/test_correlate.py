#!/usr/bin/env python3
"""
Test the metric correlation study
"""

import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from cloud_model import ConfigInvalid
from correlate import METRICS, metric_correlations, summarize
from frechet import EfpSurrogate, fit_gaussian, frechet_distance
from runtime import Stream, substream
from toygen import ToyConfig, generate
from w1 import jet_masses, w1_1d


@pytest.fixture(scope="module")
def samples():
    real = generate(ToyConfig(n_jets=120, prongs=3, rng_seed=1))
    gen = generate(ToyConfig(n_jets=120, prongs=2, rng_seed=2))
    return real, gen


def test_study_shape(samples):
    real, gen = samples
    study = metric_correlations(real, gen, n_batches=4, batch_size=30, cov_subsample=6, seed=3)
    assert study.table.shape == (4, len(METRICS))
    assert study.correlation.shape == (len(METRICS), len(METRICS))
    assert np.all(np.abs(study.correlation) <= 1.0 + 1e-12)
    assert np.all(study.table[:, METRICS.index("cov")] <= 1.0)


def test_study_is_seeded(samples):
    real, gen = samples
    a = metric_correlations(real, gen, n_batches=3, batch_size=30, cov_subsample=5, seed=4)
    b = metric_correlations(real, gen, n_batches=3, batch_size=30, cov_subsample=5, seed=4, threads=3)
    assert np.array_equal(a.table, b.table)


def test_summary_pairs(samples):
    real, gen = samples
    study = metric_correlations(real, gen, n_batches=3, batch_size=20, cov_subsample=4, seed=5)
    pairs = summarize(study)
    assert len(pairs) == len(METRICS) * (len(METRICS) - 1) // 2
    assert "w1m~w1efp" in pairs
    assert study.to_dict()["metrics"] == list(METRICS)


def test_scores_follow_the_surrogate_provider(samples):
    real, gen = samples
    study = metric_correlations(real, gen, n_batches=2, batch_size=40, cov_subsample=3, seed=6)
    r = substream(6, Stream.CORRELATE_REAL, 1).choice(len(real), size=40, replace=False)
    g = substream(6, Stream.CORRELATE_GEN).permutation(len(gen))[40:80]

    surrogate = EfpSurrogate()
    real_acts = surrogate.activations(real, r, "real")
    gen_acts = surrogate.activations(gen, g, "gen")
    row = dict(zip(METRICS, study.table[1]))
    assert row["frechet_surrogate"] == frechet_distance(fit_gaussian(real_acts), fit_gaussian(gen_acts))
    assert row["w1m"] == w1_1d(real_acts[:, surrogate.mass_column], gen_acts[:, surrogate.mass_column])
    assert row["w1m"] == w1_1d(jet_masses(real.subset(r)), jet_masses(gen.subset(g)))


def test_too_many_batches(samples):
    real, gen = samples
    with pytest.raises(ConfigInvalid):
        metric_correlations(real, gen, n_batches=10, batch_size=30)
    with pytest.raises(ConfigInvalid):
        metric_correlations(real, gen, n_batches=1, batch_size=30)


if __name__ == "__main__":
    pytest.main([__file__])
