#!/usr/bin/env python3
"""
Coverage (COV) and minimum matching distance (MMD) under the EMD.

For each cloud y in the Y draw, find its nearest cloud x in the X draw
(lowest index wins ties). COV is the fraction of distinct x that were
matched; MMD is the mean matched distance. X is the real sample, Y the
generated one, so COV measures the diversity of Y relative to X.
"""

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from cloud_model import CloudSample, ConfigInvalid
from emd import EmdConfig, emd_matrix
from runtime import Stream, substream, warn

DIRECTION = "for each y in Y (generated) the nearest x in X (real); cov = distinct matched x / |X|"


@dataclass(frozen=True)
class CovMmdProtocol:
    subsample: int = 100
    n_batches: int = 10
    rng_seed: int = 0

    def validate(self) -> None:
        if self.subsample < 1:
            raise ConfigInvalid(f"cov/mmd subsample must be >= 1, got {self.subsample}")
        if self.n_batches < 1:
            raise ConfigInvalid(f"cov/mmd n_batches must be >= 1, got {self.n_batches}")

    def to_dict(self) -> dict:
        return {"subsample": self.subsample, "n_batches": self.n_batches, "rng_seed": self.rng_seed}


@dataclass(frozen=True)
class CovMmdResult:
    cov: float
    mmd: float
    cov_batches: Tuple[float, ...]
    mmd_batches: Tuple[float, ...]
    direction: str = DIRECTION
    warnings: Tuple[str, ...] = ()


def cov_mmd_from_matrix(distances: np.ndarray) -> Tuple[float, float]:
    """COV and MMD from an |X| x |Y| distance matrix."""
    distances = np.asarray(distances)
    matched = np.argmin(distances, axis=0)
    cov = len(np.unique(matched)) / distances.shape[0]
    mmd = float(np.mean(distances[matched, np.arange(distances.shape[1])]))
    return cov, mmd


def draw_indices(n_available: int, size: int, seed: int, batch: int) -> np.ndarray:
    # same stream for both sides: a sample scored against itself matches one-to-one
    return substream(seed, Stream.COV_MMD, batch).choice(n_available, size=size, replace=False)


def cov_mmd(x: CloudSample, y: CloudSample, proto: CovMmdProtocol = CovMmdProtocol(),
            cfg: EmdConfig = EmdConfig(), threads: int = 1) -> CovMmdResult:
    proto.validate()
    cfg.validate()
    size = proto.subsample
    warnings = []
    available = min(len(x), len(y))
    if available < size:
        warnings.append(warn(f"cov/mmd: only {available} jets available, subsample clamped from {size}"))
        size = available

    covs, mmds = [], []
    for b in range(proto.n_batches):
        xs = x.subset(draw_indices(len(x), size, proto.rng_seed, b))
        ys = y.subset(draw_indices(len(y), size, proto.rng_seed, b))
        cov, mmd = cov_mmd_from_matrix(emd_matrix(xs, ys, cfg, threads))
        covs.append(cov)
        mmds.append(mmd)

    return CovMmdResult(
        cov=float(np.mean(covs)),
        mmd=float(np.mean(mmds)),
        cov_batches=tuple(covs),
        mmd_batches=tuple(mmds),
        warnings=tuple(warnings),
    )
