#!/usr/bin/env python3
"""
Test coverage and minimum matching distance
"""

import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from cloud_model import CloudSample, ConfigInvalid
from covmmd import CovMmdProtocol, cov_mmd, cov_mmd_from_matrix
from emd import EmdConfig, emd_matrix
from toygen import ToyConfig, generate


@pytest.fixture(scope="module")
def toy():
    return generate(ToyConfig(n_jets=40, prongs=2, rng_seed=10))


def test_matrix_hand_values():
    distances = np.array([
        [0.1, 0.5, 0.2],
        [0.3, 0.4, 0.9],
    ])
    # y0 -> x0 (0.1), y1 -> x1 (0.4), y2 -> x0 (0.2)
    cov, mmd = cov_mmd_from_matrix(distances)
    assert cov == 1.0
    assert mmd == pytest.approx((0.1 + 0.4 + 0.2) / 3)


def test_ties_go_to_lowest_index():
    cov, mmd = cov_mmd_from_matrix(np.zeros((3, 3)))
    assert cov == pytest.approx(1 / 3)
    assert mmd == 0.0


def test_self_comparison(toy):
    result = cov_mmd(toy, toy, CovMmdProtocol(subsample=10, n_batches=2, rng_seed=1))
    assert result.cov == 1.0
    assert result.mmd == pytest.approx(0.0, abs=1e-12)
    assert len(result.cov_batches) == 2


def test_copies_of_one_cloud(toy):
    x = toy.subset(range(10))
    y = CloudSample((x[0],) * 10, x.label)
    result = cov_mmd(x, y, CovMmdProtocol(subsample=10, n_batches=1))
    assert result.cov == pytest.approx(1 / 10)
    assert result.mmd == pytest.approx(0.0, abs=1e-12)


def test_three_by_three_matches_full_matrix(toy):
    x, y = toy.subset(range(3)), toy.subset(range(3, 6))
    result = cov_mmd(x, y, CovMmdProtocol(subsample=3, n_batches=1))
    distances = emd_matrix(x, y)
    matched = distances.argmin(axis=0)
    assert result.cov == len(set(matched.tolist())) / 3
    assert result.mmd == pytest.approx(distances.min(axis=0).mean(), rel=1e-12)


def test_direction_is_recorded(toy):
    result = cov_mmd(toy, toy, CovMmdProtocol(subsample=5, n_batches=1))
    assert "generated" in result.direction


def test_subsample_is_clamped(toy):
    result = cov_mmd(toy.subset(range(8)), toy.subset(range(8, 20)), CovMmdProtocol(subsample=50, n_batches=1))
    assert result.warnings
    assert 0.0 < result.cov <= 1.0


def test_thread_count_does_not_change_result(toy):
    other = generate(ToyConfig(n_jets=40, prongs=3, rng_seed=11))
    proto = CovMmdProtocol(subsample=8, n_batches=2, rng_seed=5)
    assert cov_mmd(toy, other, proto, threads=1) == cov_mmd(toy, other, proto, threads=4)


def test_bad_protocol(toy):
    with pytest.raises(ConfigInvalid):
        cov_mmd(toy, toy, CovMmdProtocol(subsample=0))
    with pytest.raises(ConfigInvalid):
        cov_mmd(toy, toy, CovMmdProtocol(), EmdConfig(radius=-1.0))


if __name__ == "__main__":
    pytest.main([__file__])
