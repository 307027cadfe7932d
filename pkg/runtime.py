#!/usr/bin/env python3
"""
Runtime settings for the cloudjudge tools.

Reads the environment (a local .env is picked up by load_dotenv() in the
entry script), caps worker threads, and hands out seeded random substreams
keyed by (seed, Stream purpose, index).

Environment:
    CLOUDJUDGE_THREADS      max worker threads (default: number of CPUs)
    CLOUDJUDGE_ENUM_LIMIT   max isomorphism classes enumerate_multigraphs may return
"""

import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import IntEnum
from typing import Callable, Iterable, List, TypeVar

import numpy as np

from cloud_model import ConfigInvalid

T = TypeVar("T")
R = TypeVar("R")

DEFAULT_ENUM_LIMIT = 10_000
_SEED_MASK = (1 << 64) - 1


class Stream(IntEnum):
    """Purpose key, the first key after the seed in every substream."""

    TOY = 1
    W1 = 2
    W1_BASELINE = 3
    COV_MMD = 4
    FRECHET = 5
    FEATURE_MAP = 6
    CORRELATE_REAL = 7
    CORRELATE_GEN = 8


@dataclass(frozen=True)
class Settings:
    """Process-wide knobs read from the environment."""

    threads: int
    enum_limit: int = DEFAULT_ENUM_LIMIT


def _positive_int_env(name: str, default: int) -> int:
    raw = os.getenv(name)
    if raw is None or raw.strip() == "":
        return default
    try:
        value = int(raw)
    except ValueError:
        raise ConfigInvalid(f"{name} must be a positive integer, got {raw!r}")
    if value < 1:
        raise ConfigInvalid(f"{name} must be a positive integer, got {raw!r}")
    return value


def load_settings() -> Settings:
    """Build Settings from CLOUDJUDGE_* environment variables."""
    return Settings(
        threads=_positive_int_env("CLOUDJUDGE_THREADS", os.cpu_count() or 1),
        enum_limit=_positive_int_env("CLOUDJUDGE_ENUM_LIMIT", DEFAULT_ENUM_LIMIT),
    )


def substream(seed: int, *keys: int) -> np.random.Generator:
    """
    Counter-based random stream for one (seed, keys...) coordinate.

    Philox keyed through SeedSequence, so stream k never depends on how many
    draws other streams made. Callers pass a Stream member as the first key.
    """
    entropy = [int(seed) & _SEED_MASK] + [int(k) & _SEED_MASK for k in keys]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


def parallel_map(fn: Callable[[T], R], items: Iterable[T], threads: int = 1) -> List[R]:
    """Order-preserving map, threaded when threads > 1."""
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=min(threads, len(items))) as pool:
        return list(pool.map(fn, items))


def status(message: str) -> None:
    """Diagnostic line on stderr (stdout is reserved for JSON)."""
    print(message, file=sys.stderr)


def warn(message: str) -> str:
    """Print a ⚠ line and hand the message back for the caller's warnings list."""
    status(f"⚠ {message}")
    return message
