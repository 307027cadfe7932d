#!/usr/bin/env python3
"""
1-D Wasserstein scores between real and generated jets.

    W1M    jet mass
    W1P    eta_rel, phi_rel, pt_rel of all unmasked particles (pooled per
           batch), averaged over the three features
    W1EFP  the 5 evaluation EFPs, averaged

Each score is computed on n_batches batches of batch_size jets drawn without
replacement, and reported as mean +- standard deviation over batches
(population std, ddof = 0). Batch b draws from substream (seed, Stream.W1, b); both
sides use the same draw, so scoring a sample against itself gives 0.

The baseline compares two disjoint draws of the real sample with each other.
"""

from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.stats import wasserstein_distance

from cloud_model import (
    FEATURE_NAMES,
    CloudSample,
    ConfigInvalid,
    DeterminismViolation,
    EmptySeries,
    FeatureSeries,
    JetLabel,
)
from efp import EfpConfig, efp_matrix, evaluation_graphs
from kinematics import jet_mass
from runtime import Stream, parallel_map, substream, warn

STDERR_DEFINITION = "population standard deviation across batches (ddof=0)"

# real-vs-real reference triples: (W1M x1e-3, W1P x1e-3, W1EFP x1e-5), each (mean, spread)
JETNET_BASELINES = {
    JetLabel.GLUON: ((0.7, 0.2), (0.44, 0.09), (0.62, 0.07)),
    JetLabel.LIGHT_QUARK: ((0.5, 0.1), (0.5, 0.1), (0.46, 0.04)),
    JetLabel.TOP_QUARK: ((0.51, 0.07), (0.55, 0.07), (1.1, 0.1)),
}
BASELINE_SCALES = (1e-3, 1e-3, 1e-5)

ArrayLike = Union[FeatureSeries, Sequence[float], np.ndarray]


@dataclass(frozen=True)
class W1Protocol:
    batch_size: int = 10_000
    n_batches: int = 5
    rng_seed: int = 0
    verify: bool = False

    def validate(self) -> None:
        if self.batch_size < 2:
            raise ConfigInvalid(f"W1 batch_size must be >= 2, got {self.batch_size}")
        if self.n_batches < 1:
            raise ConfigInvalid(f"W1 n_batches must be >= 1, got {self.n_batches}")

    def to_dict(self) -> dict:
        return {"batch_size": self.batch_size, "n_batches": self.n_batches, "rng_seed": self.rng_seed}


@dataclass(frozen=True)
class W1Score:
    mean: float
    stderr: float
    batches: Tuple[float, ...] = ()
    components: Tuple[float, ...] = ()
    warnings: Tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {"mean": self.mean, "stderr": self.stderr, "batches": list(self.batches),
                "components": list(self.components)}


def _values(x: ArrayLike) -> np.ndarray:
    if isinstance(x, FeatureSeries):
        return x.values
    return FeatureSeries(np.asarray(x, dtype=np.float64)).values


def w1_1d(x: ArrayLike, y: ArrayLike) -> float:
    """
    Wasserstein-1 distance between two empirical distributions.

    Equal sizes: mean |x_(i) - y_(i)| over sorted values. Otherwise the exact
    integral of |F_x - F_y| (scipy).
    """
    xv, yv = _values(x), _values(y)
    if xv.size == 0 or yv.size == 0:
        raise EmptySeries("W1 needs two non-empty series")
    if xv.size == yv.size:
        return float(np.mean(np.abs(np.sort(xv) - np.sort(yv))))
    return float(wasserstein_distance(xv, yv))


def _score(per_batch: List[np.ndarray], warnings: Sequence[str]) -> W1Score:
    """per_batch: one array of component distances per batch."""
    table = np.asarray(per_batch, dtype=np.float64)
    batch_means = table.mean(axis=1)
    return W1Score(
        mean=float(batch_means.mean()),
        stderr=float(batch_means.std()) if len(batch_means) > 1 else 0.0,
        batches=tuple(float(v) for v in batch_means),
        components=tuple(float(v) for v in table.mean(axis=0)),
        warnings=tuple(warnings),
    )


def _clamp(requested: int, available: int, what: str) -> Tuple[int, List[str]]:
    if available >= requested:
        return requested, []
    return available, [warn(f"{what}: only {available} jets available, batch size clamped from {requested}")]


def _draw(n_available: int, size: int, seed: int, batch: int) -> np.ndarray:
    return substream(seed, Stream.W1, batch).choice(n_available, size=size, replace=False)


def _run_batches(proto: W1Protocol, batch_fn: Callable[[int], np.ndarray], threads: int) -> List[np.ndarray]:
    results = parallel_map(batch_fn, range(proto.n_batches), threads)
    if proto.verify:
        again = parallel_map(batch_fn, range(proto.n_batches), 1)
        for b, (first, second) in enumerate(zip(results, again)):
            if not np.array_equal(first, second):
                raise DeterminismViolation(f"batch {b} differs between two runs with seed {proto.rng_seed}")
    return results


def w1_batched(real_values: np.ndarray, gen_values: np.ndarray, proto: W1Protocol,
               threads: int = 1, what: str = "W1") -> W1Score:
    """
    The batch protocol over precomputed per-jet observables.

    real_values / gen_values: (n_jets,) or (n_jets, n_components) arrays.
    """
    proto.validate()
    real_values = np.asarray(real_values, dtype=np.float64)
    gen_values = np.asarray(gen_values, dtype=np.float64)
    if real_values.ndim == 1:
        real_values, gen_values = real_values[:, None], gen_values[:, None]

    size, warnings = _clamp(proto.batch_size, min(len(real_values), len(gen_values)), what)

    def batch(b: int) -> np.ndarray:
        r = real_values[_draw(len(real_values), size, proto.rng_seed, b)]
        g = gen_values[_draw(len(gen_values), size, proto.rng_seed, b)]
        return np.array([w1_1d(r[:, k], g[:, k]) for k in range(r.shape[1])])

    return _score(_run_batches(proto, batch, threads), warnings)


def jet_masses(sample: CloudSample, threads: int = 1) -> np.ndarray:
    return np.asarray(parallel_map(jet_mass, sample.clouds, threads), dtype=np.float64)


def _particle_rows(sample: CloudSample) -> List[np.ndarray]:
    return [c.unmasked_sorted() for c in sample.clouds]


def _pooled(rows: List[np.ndarray], indices: np.ndarray) -> np.ndarray:
    return np.concatenate([rows[i] for i in indices], axis=0)


def w1m(real: CloudSample, gen: CloudSample, proto: W1Protocol = W1Protocol(), threads: int = 1) -> W1Score:
    return w1_batched(jet_masses(real, threads), jet_masses(gen, threads), proto, threads, "W1M")


def w1p(real: CloudSample, gen: CloudSample, proto: W1Protocol = W1Protocol(), threads: int = 1) -> W1Score:
    proto.validate()
    real_rows, gen_rows = _particle_rows(real), _particle_rows(gen)
    size, warnings = _clamp(proto.batch_size, min(len(real), len(gen)), "W1P")

    def batch(b: int) -> np.ndarray:
        r = _pooled(real_rows, _draw(len(real), size, proto.rng_seed, b))
        g = _pooled(gen_rows, _draw(len(gen), size, proto.rng_seed, b))
        return np.array([w1_1d(r[:, k], g[:, k]) for k in range(len(FEATURE_NAMES))])

    return _score(_run_batches(proto, batch, threads), warnings)


def w1efp(real: CloudSample, gen: CloudSample, proto: W1Protocol = W1Protocol(),
          cfg: EfpConfig = EfpConfig(), threads: int = 1) -> W1Score:
    graphs = evaluation_graphs()
    real_efps = efp_matrix(real.clouds, graphs, cfg, threads)
    gen_efps = real_efps if gen is real else efp_matrix(gen.clouds, graphs, cfg, threads)
    return w1_batched(real_efps, gen_efps, proto, threads, "W1EFP")


def baseline(real: CloudSample, proto: W1Protocol = W1Protocol(), cfg: EfpConfig = EfpConfig(),
             threads: int = 1) -> Tuple[W1Score, W1Score, W1Score]:
    """
    (W1M, W1P, W1EFP) between two disjoint random halves of the real sample,
    redrawn per batch.
    """
    proto.validate()
    n = len(real)
    size, warnings = _clamp(proto.batch_size, n // 2, "baseline")
    if size < 1:
        raise ConfigInvalid(f"baseline needs at least 2 jets, got {n}")

    masses = jet_masses(real, threads)
    rows = _particle_rows(real)
    efps = efp_matrix(real.clouds, evaluation_graphs(), cfg, threads)

    def halves(b: int) -> Tuple[np.ndarray, np.ndarray]:
        order = substream(proto.rng_seed, Stream.W1_BASELINE, b).permutation(n)
        return order[:size], order[size:2 * size]

    def batch(b: int) -> np.ndarray:
        first, second = halves(b)
        mass = w1_1d(masses[first], masses[second])
        pa, pb = _pooled(rows, first), _pooled(rows, second)
        particles = [w1_1d(pa[:, k], pb[:, k]) for k in range(len(FEATURE_NAMES))]
        efp_terms = [w1_1d(efps[first, k], efps[second, k]) for k in range(efps.shape[1])]
        return np.array([mass] + particles + efp_terms)

    table = _run_batches(proto, batch, threads)
    n_p = len(FEATURE_NAMES)
    return (
        _score([t[:1] for t in table], warnings),
        _score([t[1:1 + n_p] for t in table], warnings),
        _score([t[1 + n_p:] for t in table], warnings),
    )


def reference_baseline(label: JetLabel) -> Optional[dict]:
    """Published real-vs-real triple for a JetNet class, in natural units."""
    ref = JETNET_BASELINES.get(label)
    if ref is None:
        return None
    names = ("w1m", "w1p", "w1efp")
    return {name: {"mean": m * s, "spread": d * s}
            for name, (m, d), s in zip(names, ref, BASELINE_SCALES)}
