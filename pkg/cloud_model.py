#!/usr/bin/env python3
"""
Particle cloud model - JetNet feature schema

A jet is stored as a fixed number of particle slots, each with
(eta_rel, phi_rel, pt_rel, mask). Slots with mask = 0 are zero-padding and
are ignored by every observable and metric.

Also home of the package's exception classes, grouped by CLI exit code:
    CloudError      -> 2 (input, validation, config)
    NumericalError  -> 3 (solver / numerical)
    IoFailure       -> 4 (filesystem)
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

DEFAULT_CAPACITY = 30
N_FEATURES = 4
FEATURE_NAMES = ("eta_rel", "phi_rel", "pt_rel")
ETA, PHI, PT, MASK = 0, 1, 2, 3

TWO_PI = 2.0 * math.pi


# ---------------------------------------------------------------------------
# Errors
# ---------------------------------------------------------------------------

class CloudError(ValueError):
    """Bad input: validation, configuration or file format."""


class ValidationFailure(CloudError):
    pass


class EmptyCloud(CloudError):
    pass


class EmptySeries(CloudError):
    pass


class DegenerateMomentum(CloudError):
    pass


class DegenerateSample(CloudError):
    pass


class DimensionMismatch(CloudError):
    pass


class ProviderMismatch(CloudError):
    pass


class ResourceLimit(CloudError):
    pass


class ConfigInvalid(CloudError):
    pass


class InputNotFound(CloudError):
    pass


class IndexOutOfRange(CloudError):
    pass


class BadMagic(CloudError):
    pass


class BadVersion(CloudError):
    pass


class CorruptPayload(CloudError):
    """Binary payload problem at a byte offset."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class ParseFailure(CloudError):
    """CSV problem at a 1-based line number."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class NumericalError(RuntimeError):
    """Solver or numerical certificate failure."""


class SolverFailure(NumericalError):
    pass


class NumericalFailure(NumericalError):
    pass


class DeterminismViolation(NumericalError):
    pass


class InternalConsistencyError(NumericalError):
    pass


class IoFailure(OSError):
    pass


# ---------------------------------------------------------------------------
# Types
# ---------------------------------------------------------------------------

class JetLabel(Enum):
    """Sample provenance; values are the on-disk label codes."""

    GLUON = 0
    LIGHT_QUARK = 1
    TOP_QUARK = 2
    TOY = 3
    OTHER = 4

    @classmethod
    def parse(cls, text: str) -> "JetLabel":
        key = text.strip().upper().replace("-", "_")
        aliases = {"G": "GLUON", "Q": "LIGHT_QUARK", "T": "TOP_QUARK", "TOP": "TOP_QUARK"}
        key = aliases.get(key, key)
        try:
            return cls[key]
        except KeyError:
            raise ConfigInvalid(f"unknown jet label {text!r}")


def wrap_phi(phi):
    """Wrap angles into (-pi, pi]. Works on scalars and arrays."""
    phi = np.asarray(phi, dtype=np.float64)
    out = phi - TWO_PI * np.ceil((phi - math.pi) / TWO_PI)
    # round-off can push either end just outside the interval
    out = np.where(out <= -math.pi, out + TWO_PI, out)
    out = np.where(out > math.pi, out - TWO_PI, out)
    # values already in range pass through untouched
    out = np.where((phi > -math.pi) & (phi <= math.pi), phi, out)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class ParticleCloud:
    """
    One jet: an (n_slots, 4) array of (eta_rel, phi_rel, pt_rel, mask).

    The array is copied and frozen on construction.
    """

    particles: np.ndarray
    capacity: int = DEFAULT_CAPACITY

    def __post_init__(self):
        arr = np.array(self.particles, dtype=np.float64, copy=True)
        if arr.size == 0:
            arr = arr.reshape(0, N_FEATURES)
        if arr.ndim != 2 or arr.shape[1] != N_FEATURES:
            raise ValidationFailure(
                f"particles must have shape (n_slots, {N_FEATURES}), got {arr.shape}"
            )
        if int(self.capacity) < 1:
            raise ValidationFailure(f"capacity must be positive, got {self.capacity}")
        arr.setflags(write=False)
        object.__setattr__(self, "particles", arr)
        object.__setattr__(self, "capacity", int(self.capacity))

    @classmethod
    def from_rows(cls, rows: Iterable[Sequence[float]], capacity: int = DEFAULT_CAPACITY) -> "ParticleCloud":
        return cls(np.asarray(list(rows), dtype=np.float64), capacity)

    @property
    def n_slots(self) -> int:
        return self.particles.shape[0]

    @property
    def mask(self) -> np.ndarray:
        return self.particles[:, MASK]

    @property
    def unmasked(self) -> np.ndarray:
        """(N, 3) features of genuine particles in slot order."""
        return self.particles[self.mask == 1, :MASK]

    def unmasked_sorted(self) -> np.ndarray:
        """
        Unmasked (eta, phi, pt) rows in lexicographic order.

        All sums over particles run in this order, so results are identical
        for any permutation of slots.
        """
        rows = self.unmasked
        if rows.shape[0] <= 1:
            return rows
        order = np.lexsort((rows[:, PT], rows[:, PHI], rows[:, ETA]))
        return rows[order]

    def padded(self, capacity: Optional[int] = None) -> np.ndarray:
        """(capacity, 4) array, extra slots zero-filled."""
        capacity = self.capacity if capacity is None else capacity
        out = np.zeros((capacity, N_FEATURES), dtype=np.float64)
        n = min(capacity, self.n_slots)
        out[:n] = self.particles[:n]
        return out

    def permuted(self, order: Sequence[int]) -> "ParticleCloud":
        return ParticleCloud(self.particles[np.asarray(order)], self.capacity)

    def __eq__(self, other):
        if not isinstance(other, ParticleCloud):
            return NotImplemented
        return self.capacity == other.capacity and np.array_equal(self.particles, other.particles)

    def __hash__(self):
        return hash((self.capacity, self.particles.tobytes()))


@dataclass(frozen=True)
class CloudSample:
    """Ordered collection of clouds sharing one capacity."""

    clouds: Tuple[ParticleCloud, ...]
    label: JetLabel = JetLabel.OTHER
    seed: Optional[int] = None

    def __post_init__(self):
        clouds = tuple(self.clouds)
        if not clouds:
            raise ValidationFailure("a cloud sample must contain at least one cloud")
        capacities = {c.capacity for c in clouds}
        if len(capacities) != 1:
            raise ValidationFailure(f"clouds in a sample must share one capacity, found {sorted(capacities)}")
        object.__setattr__(self, "clouds", clouds)

    @property
    def capacity(self) -> int:
        return self.clouds[0].capacity

    def __len__(self) -> int:
        return len(self.clouds)

    def __getitem__(self, index: int) -> ParticleCloud:
        return self.clouds[index]

    def __iter__(self):
        return iter(self.clouds)

    def subset(self, indices: Sequence[int]) -> "CloudSample":
        return CloudSample(tuple(self.clouds[int(i)] for i in indices), self.label, self.seed)

    def to_array(self) -> np.ndarray:
        """(n_jets, capacity, 4) array."""
        return np.stack([c.padded(self.capacity) for c in self.clouds])

    @classmethod
    def from_array(cls, data: np.ndarray, label: JetLabel = JetLabel.OTHER,
                   seed: Optional[int] = None) -> "CloudSample":
        data = np.asarray(data, dtype=np.float64)
        if data.ndim != 3 or data.shape[2] != N_FEATURES:
            raise ValidationFailure(f"expected (n_jets, capacity, {N_FEATURES}) array, got {data.shape}")
        capacity = data.shape[1]
        return cls(tuple(ParticleCloud(jet, capacity) for jet in data), label, seed)


@dataclass(frozen=True)
class FeatureSeries:
    """Named 1-D distribution of a per-jet or per-particle feature."""

    values: np.ndarray
    name: str = "feature"

    def __post_init__(self):
        arr = np.array(self.values, dtype=np.float64, copy=True).ravel()
        if not np.all(np.isfinite(arr)):
            raise ValidationFailure(f"feature series {self.name!r} contains NaN or Inf")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    def __len__(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class MetricReport:
    """Scores of one real-vs-generated evaluation."""

    w1m: Tuple[float, float]
    w1p: Tuple[float, float]
    w1efp: Tuple[float, float]
    fpnd: Optional[float]
    cov: float
    mmd: float
    config: dict
    fpnd_metric: str = "fpnd"
    components: dict = field(default_factory=dict)
    conventions: dict = field(default_factory=dict)
    warnings: Tuple[str, ...] = ()

    def __post_init__(self):
        if not 0.0 <= self.cov <= 1.0:
            raise InternalConsistencyError(f"coverage {self.cov} outside [0, 1]")
        for name in ("mmd",):
            if getattr(self, name) < 0:
                raise InternalConsistencyError(f"{name} is negative")
        for name in ("w1m", "w1p", "w1efp"):
            if getattr(self, name)[0] < 0:
                raise InternalConsistencyError(f"{name} is negative")

    def to_dict(self) -> dict:
        scores = {
            "w1m": {"mean": self.w1m[0], "stderr": self.w1m[1]},
            "w1p": {"mean": self.w1p[0], "stderr": self.w1p[1]},
            "w1efp": {"mean": self.w1efp[0], "stderr": self.w1efp[1]},
            self.fpnd_metric: self.fpnd,
            "cov": self.cov,
            "mmd": self.mmd,
        }
        return {
            "scores": scores,
            "components": self.components,
            "conventions": self.conventions,
            "config": self.config,
            "warnings": list(self.warnings),
        }


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------

def validate(cloud: ParticleCloud) -> List[str]:
    """
    Check the ParticleCloud invariants.

    Returns one message per violation ("<rule> at slot <i>" for slot rules);
    an empty list means the cloud is valid. Never raises.
    """
    violations = []
    data = cloud.particles

    if cloud.n_slots > cloud.capacity:
        violations.append(f"slot count {cloud.n_slots} exceeds capacity {cloud.capacity}")

    for i, (eta, phi, pt, mask) in enumerate(data):
        if not (math.isfinite(eta) and math.isfinite(phi) and math.isfinite(pt) and math.isfinite(mask)):
            violations.append(f"non-finite feature at slot {i}")
            continue
        if mask not in (0.0, 1.0):
            violations.append(f"non-binary mask at slot {i}")
            continue
        if mask == 1.0:
            if pt < 0:
                violations.append(f"negative pt_rel at slot {i}")
            if not (-math.pi < phi <= math.pi):
                violations.append(f"phi_rel outside (-pi, pi] at slot {i}")

    if not np.any(data[:, MASK] == 1.0):
        violations.append("no unmasked particles")

    return violations


def rule_name(violation: str) -> str:
    """Strip the slot suffix from a violation message."""
    return violation.split(" at slot ")[0]


def validate_sample(sample: CloudSample) -> List[Tuple[int, str]]:
    return [(i, v) for i, cloud in enumerate(sample.clouds) for v in validate(cloud)]


def canonicalize(cloud: ParticleCloud) -> ParticleCloud:
    """Wrap phi_rel into (-pi, pi] and zero every masked slot; slot order is kept."""
    data = np.array(cloud.particles, copy=True)
    data[:, PHI] = wrap_phi(data[:, PHI]) if data.shape[0] else data[:, PHI]
    masked = data[:, MASK] == 0
    data[masked] = 0.0
    return ParticleCloud(data, cloud.capacity)


def canonicalize_sample(sample: CloudSample) -> CloudSample:
    return CloudSample(tuple(canonicalize(c) for c in sample.clouds), sample.label, sample.seed)
