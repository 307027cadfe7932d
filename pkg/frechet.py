#!/usr/bin/env python3
"""
Frechet distance between Gaussians fitted to per-jet activations.

    d^2 = |mu_a - mu_b|^2 + Tr(S_a + S_b - 2 (S_a^1/2 S_b S_a^1/2)^1/2)

Matrix square roots go through symmetric eigendecompositions (scipy.linalg.eigh)
with eigenvalues clamped at zero.

Activations come from an ActivationProvider:
    ExternalActivations  JACT files, one row per cloud of the matching cloud
                         file (e.g. a classifier's first dense layer); the score
                         is FPND.
    EfpSurrogate         5 evaluation EFPs + jet mass + cardinality (D = 7);
                         reported as "frechet_surrogate", not comparable to FPND.
"""

from dataclasses import dataclass
from enum import Enum
from typing import Sequence, Tuple

import numpy as np
import scipy.linalg

from cloud_io import read_activations
from cloud_model import (
    CloudSample,
    DegenerateSample,
    DimensionMismatch,
    NumericalFailure,
    ParticleCloud,
    ProviderMismatch,
    ValidationFailure,
)
from efp import EfpConfig, efp_matrix, evaluation_graphs
from kinematics import cardinality, jet_mass
from runtime import Stream, parallel_map, substream, warn

DEFAULT_FPND_N = 50_000
EIGEN_RESIDUAL_TOLERANCE = 1e-6


class ProviderKind(Enum):
    EXTERNAL_FILE = "external_file"
    EFP_SURROGATE = "efp_surrogate"


@dataclass(frozen=True)
class GaussianSummary:
    mean: np.ndarray
    cov: np.ndarray
    n: int

    @property
    def dimension(self) -> int:
        return self.mean.shape[0]


@dataclass(frozen=True)
class FrechetResult:
    value: float
    metric_name: str
    n: int
    dimension: int
    warnings: Tuple[str, ...] = ()


def fit_gaussian(acts: np.ndarray) -> GaussianSummary:
    """Column means and unbiased (N - 1) covariance of an N x D activation matrix."""
    acts = np.asarray(acts, dtype=np.float64)
    if acts.ndim == 1:
        acts = acts[:, None]
    if acts.shape[0] < 2:
        raise DegenerateSample(f"need at least 2 rows to fit a Gaussian, got {acts.shape[0]}")
    if not np.all(np.isfinite(acts)):
        raise ValidationFailure("activations contain NaN or Inf")
    cov = np.atleast_2d(np.cov(acts, rowvar=False, ddof=1))
    return GaussianSummary(mean=acts.mean(axis=0), cov=cov, n=acts.shape[0])


def _symmetric(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.T)


def _eigh_checked(m: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    sym = _symmetric(m)
    w, v = scipy.linalg.eigh(sym)
    residual = np.linalg.norm(v @ np.diag(w) @ v.T - sym)
    scale = max(np.linalg.norm(sym), np.finfo(float).tiny)
    if residual > EIGEN_RESIDUAL_TOLERANCE * scale:
        raise NumericalFailure(f"eigendecomposition residual {residual:.3e} exceeds {EIGEN_RESIDUAL_TOLERANCE} x |S|")
    return w, v


def sqrtm_psd(m: np.ndarray) -> np.ndarray:
    """Square root of a symmetric PSD matrix, negative round-off eigenvalues set to 0."""
    w, v = _eigh_checked(m)
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.T


def frechet_distance(a: GaussianSummary, b: GaussianSummary) -> float:
    if a.dimension != b.dimension:
        raise DimensionMismatch(f"Gaussian dimensions differ: {a.dimension} vs {b.dimension}")
    # Tr (S_a^1/2 S_b S_a^1/2)^1/2 is the nuclear norm of S_a^1/2 S_b^1/2
    cross = float(np.sum(scipy.linalg.svdvals(sqrtm_psd(a.cov) @ sqrtm_psd(b.cov))))
    diff = a.mean - b.mean
    value = float(diff @ diff) + float(np.trace(a.cov) + np.trace(b.cov)) - 2.0 * cross
    return max(value, 0.0)


class ExternalActivations:
    """Activations read from JACT files, row i belonging to cloud i."""

    kind = ProviderKind.EXTERNAL_FILE
    metric_name = "fpnd"

    def __init__(self, real_acts: np.ndarray, gen_acts: np.ndarray):
        real_acts, gen_acts = np.asarray(real_acts, dtype=np.float64), np.asarray(gen_acts, dtype=np.float64)
        if real_acts.ndim != 2 or gen_acts.ndim != 2:
            raise ProviderMismatch("activation matrices must be 2-D")
        if real_acts.shape[1] != gen_acts.shape[1]:
            raise ProviderMismatch(f"activation widths differ: {real_acts.shape[1]} vs {gen_acts.shape[1]}")
        self.acts = {"real": real_acts, "gen": gen_acts}
        self.dimension = real_acts.shape[1]

    @classmethod
    def from_files(cls, real_path: str, gen_path: str) -> "ExternalActivations":
        return cls(read_activations(real_path), read_activations(gen_path))

    def activations(self, sample: CloudSample, indices: np.ndarray, side: str) -> np.ndarray:
        acts = self.acts[side]
        if acts.shape[0] != len(sample):
            raise ProviderMismatch(
                f"{side} activations have {acts.shape[0]} rows but the cloud file has {len(sample)} jets"
            )
        return acts[indices]


class EfpSurrogate:
    """Physics features standing in for classifier activations."""

    kind = ProviderKind.EFP_SURROGATE
    metric_name = "frechet_surrogate"
    dimension = 7
    mass_column = 5
    cardinality_column = 6

    def __init__(self, cfg: EfpConfig = EfpConfig(), threads: int = 1):
        self.cfg = cfg
        self.threads = threads

    def activations(self, sample: CloudSample, indices: np.ndarray, side: str) -> np.ndarray:
        return self.features([sample.clouds[int(i)] for i in indices])

    def features(self, clouds: Sequence[ParticleCloud]) -> np.ndarray:
        """(n, 7): the evaluation EFPs, then jet mass, then cardinality."""
        efps = efp_matrix(clouds, evaluation_graphs(), self.cfg, self.threads)
        masses = np.asarray(parallel_map(jet_mass, clouds, self.threads))
        counts = np.asarray([cardinality(c) for c in clouds], dtype=np.float64)
        return np.column_stack([efps, masses, counts])


def fpnd(real: CloudSample, gen: CloudSample, provider, n: int = DEFAULT_FPND_N,
         seed: int = 0) -> FrechetResult:
    """Frechet distance between provider activations of n seeded draws per side."""
    available = min(len(real), len(gen))
    warnings = []
    if available < n:
        warnings.append(warn(f"{provider.metric_name}: only {available} jets available, n clamped from {n}"))
        n = available

    real_idx = substream(seed, Stream.FRECHET).choice(len(real), size=n, replace=False)
    gen_idx = substream(seed, Stream.FRECHET).choice(len(gen), size=n, replace=False)
    real_fit = fit_gaussian(provider.activations(real, real_idx, "real"))
    gen_fit = fit_gaussian(provider.activations(gen, gen_idx, "gen"))
    value = frechet_distance(real_fit, gen_fit)
    return FrechetResult(value=value, metric_name=provider.metric_name, n=n,
                         dimension=real_fit.dimension, warnings=tuple(warnings))
