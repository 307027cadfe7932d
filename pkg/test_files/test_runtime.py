#!/usr/bin/env python3
"""
Test runtime settings, random substreams and the thread pool helper
"""

import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from cloud_model import ConfigInvalid
from covmmd import draw_indices
from runtime import DEFAULT_ENUM_LIMIT, Stream, load_settings, parallel_map, substream, warn
from w1 import _draw as w1_draw


def test_defaults(monkeypatch):
    monkeypatch.delenv("CLOUDJUDGE_THREADS", raising=False)
    monkeypatch.delenv("CLOUDJUDGE_ENUM_LIMIT", raising=False)
    settings = load_settings()
    assert settings.threads == (os.cpu_count() or 1)
    assert settings.enum_limit == DEFAULT_ENUM_LIMIT


def test_env_overrides(monkeypatch):
    monkeypatch.setenv("CLOUDJUDGE_THREADS", "3")
    monkeypatch.setenv("CLOUDJUDGE_ENUM_LIMIT", "42")
    settings = load_settings()
    assert settings.threads == 3
    assert settings.enum_limit == 42


@pytest.mark.parametrize("value", ["zero", "0", "-2", "1.5"])
def test_bad_thread_cap(monkeypatch, value):
    monkeypatch.setenv("CLOUDJUDGE_THREADS", value)
    with pytest.raises(ConfigInvalid):
        load_settings()


def test_substream_is_reproducible():
    assert np.array_equal(substream(7, 3).random(5), substream(7, 3).random(5))


def test_substreams_differ():
    assert not np.array_equal(substream(7, 3).random(5), substream(7, 4).random(5))
    assert not np.array_equal(substream(7).random(5), substream(8).random(5))


def test_substream_accepts_negative_seed():
    assert substream(-1).random() == substream(-1).random()


def test_purpose_streams_are_independent():
    draws = {purpose: tuple(substream(5, purpose, 0).random(4)) for purpose in Stream}
    assert len(set(draws.values())) == len(Stream)
    assert draws[Stream.W1] != tuple(substream(5, 0).random(4))


def test_batch_draws_differ_between_metrics():
    w1_rows = w1_draw(1000, 50, seed=3, batch=0)
    cov_rows = draw_indices(1000, 50, seed=3, batch=0)
    assert not np.array_equal(w1_rows, cov_rows)


def test_parallel_map_preserves_order():
    items = list(range(50))
    assert parallel_map(lambda x: x * x, items, threads=8) == [x * x for x in items]
    assert parallel_map(lambda x: x + 1, items, threads=1) == [x + 1 for x in items]


def test_warn_returns_message(capsys):
    assert warn("clamped") == "clamped"
    assert "⚠ clamped" in capsys.readouterr().err


if __name__ == "__main__":
    pytest.main([__file__])
