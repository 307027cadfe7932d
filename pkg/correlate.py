#!/usr/bin/env python3
"""
Metric correlation study.

Scores n_batches disjoint batches of generated jets against a fresh real
draw each, with every metric, and returns the Pearson correlation matrix
between metrics. Jet-level W1 scores (mass, EFPs) are expected to move
together; W1P, the Frechet score and COV/MMD carry more independent
information.
"""

from dataclasses import dataclass
from typing import Dict, List, Tuple

import numpy as np

from cloud_model import FEATURE_NAMES, CloudSample, ConfigInvalid
from covmmd import cov_mmd_from_matrix
from efp import EfpConfig
from emd import EmdConfig, emd_matrix
from frechet import EfpSurrogate, fit_gaussian, frechet_distance
from runtime import Stream, substream
from w1 import w1_1d

METRICS = ("w1m", "w1p", "w1efp", "frechet_surrogate", "cov", "mmd")


@dataclass(frozen=True)
class CorrelationStudy:
    metrics: Tuple[str, ...]
    table: np.ndarray
    correlation: np.ndarray

    def to_dict(self) -> dict:
        return {
            "metrics": list(self.metrics),
            "batches": [dict(zip(self.metrics, map(float, row))) for row in self.table],
            "correlation": [[float(v) for v in row] for row in self.correlation],
        }


def metric_correlations(real: CloudSample, gen: CloudSample, n_batches: int = 20, batch_size: int = 1000,
                        cov_subsample: int = 50, efp_cfg: EfpConfig = EfpConfig(),
                        emd_cfg: EmdConfig = EmdConfig(), seed: int = 0, threads: int = 1) -> CorrelationStudy:
    if n_batches < 2:
        raise ConfigInvalid(f"a correlation study needs >= 2 batches, got {n_batches}")
    if batch_size < 2 or n_batches * batch_size > len(gen):
        raise ConfigInvalid(
            f"need n_batches x batch_size <= {len(gen)} generated jets, got {n_batches} x {batch_size}"
        )
    if batch_size > len(real):
        raise ConfigInvalid(f"batch_size {batch_size} exceeds the {len(real)} real jets")
    cov_subsample = min(cov_subsample, batch_size)

    # one surrogate row per jet feeds W1M, W1EFP and the Frechet score alike
    surrogate = EfpSurrogate(efp_cfg, threads)
    real_feats, gen_feats = surrogate.features(real.clouds), surrogate.features(gen.clouds)
    n_efps = surrogate.mass_column  # EFP columns come first
    real_rows = [c.unmasked_sorted() for c in real.clouds]
    gen_rows = [c.unmasked_sorted() for c in gen.clouds]

    gen_order = substream(seed, Stream.CORRELATE_GEN).permutation(len(gen))
    table: List[List[float]] = []
    for b in range(n_batches):
        r = substream(seed, Stream.CORRELATE_REAL, b).choice(len(real), size=batch_size, replace=False)
        g = gen_order[b * batch_size:(b + 1) * batch_size]

        real_acts, gen_acts = real_feats[r], gen_feats[g]
        mass = w1_1d(real_acts[:, surrogate.mass_column], gen_acts[:, surrogate.mass_column])
        rp = np.concatenate([real_rows[i] for i in r])
        gp = np.concatenate([gen_rows[i] for i in g])
        particles = np.mean([w1_1d(rp[:, k], gp[:, k]) for k in range(len(FEATURE_NAMES))])
        efps = np.mean([w1_1d(real_acts[:, k], gen_acts[:, k]) for k in range(n_efps)])
        frechet = frechet_distance(fit_gaussian(real_acts), fit_gaussian(gen_acts))

        distances = emd_matrix(real.subset(r[:cov_subsample]), gen.subset(g[:cov_subsample]), emd_cfg, threads)
        cov, mmd = cov_mmd_from_matrix(distances)
        table.append([mass, particles, efps, frechet, cov, mmd])

    values = np.asarray(table)
    with np.errstate(invalid="ignore", divide="ignore"):
        correlation = np.corrcoef(values, rowvar=False)
    # constant columns (e.g. saturated coverage) have no defined correlation
    correlation = np.nan_to_num(correlation, nan=0.0)
    return CorrelationStudy(METRICS, values, correlation)


def summarize(study: CorrelationStudy) -> Dict[str, float]:
    """Off-diagonal pairs as 'a~b' -> r."""
    out = {}
    for i, a in enumerate(study.metrics):
        for j in range(i + 1, len(study.metrics)):
            out[f"{a}~{study.metrics[j]}"] = float(study.correlation[i, j])
    return out
