#!/usr/bin/env python3
"""
Message-passing forward pass over a fully connected particle graph.

One iteration:
    m_ij = f_e(h_i (+) h_j)                  for unmasked i, j (j = i included by default)
    h'_i = f_n(h_i (+) sum_j m_ij)

Masked particles neither send nor receive messages and their rows stay zero.
f_e and f_n are small dense networks with LeakyReLU(0.2) on hidden layers.

Forward pass only; there is no training here.
"""

from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from cloud_model import ConfigInvalid, DimensionMismatch, EmptyCloud
from runtime import Stream, substream

NEGATIVE_SLOPE = 0.2
ACTIVATIONS = ("identity", "leaky_relu")


def leaky_relu(x: np.ndarray, slope: float = NEGATIVE_SLOPE) -> np.ndarray:
    # branch on the real part so complex-step derivatives pass straight through
    return np.where(np.real(x) > 0, x, slope * x)


@dataclass(frozen=True)
class FeatureMap:
    """Dense network: weights[k] has shape (dims[k+1], dims[k])."""

    weights: Tuple[np.ndarray, ...]
    biases: Tuple[np.ndarray, ...]
    final_activation: str = "identity"

    def __post_init__(self):
        weights = tuple(np.asarray(w, dtype=np.float64) for w in self.weights)
        biases = tuple(np.asarray(b, dtype=np.float64).ravel() for b in self.biases)
        if not weights or len(weights) != len(biases):
            raise DimensionMismatch("a feature map needs one bias vector per weight matrix")
        for k, (w, b) in enumerate(zip(weights, biases)):
            if w.ndim != 2 or b.shape[0] != w.shape[0]:
                raise DimensionMismatch(f"layer {k}: weight {w.shape} and bias {b.shape} do not fit")
            if k and w.shape[1] != weights[k - 1].shape[0]:
                raise DimensionMismatch(f"layer {k} expects {w.shape[1]} inputs, previous layer gives {weights[k - 1].shape[0]}")
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise ConfigInvalid(f"layer {k} has non-finite weights")
        if self.final_activation not in ACTIVATIONS:
            raise ConfigInvalid(f"final activation must be one of {ACTIVATIONS}, got {self.final_activation!r}")
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "biases", biases)

    @property
    def dims(self) -> List[int]:
        return [self.weights[0].shape[1]] + [w.shape[0] for w in self.weights]

    @property
    def in_dim(self) -> int:
        return self.dims[0]

    @property
    def out_dim(self) -> int:
        return self.dims[-1]

    def __call__(self, x: np.ndarray) -> np.ndarray:
        last = len(self.weights) - 1
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            # row-wise reduction instead of BLAS: each row's result must not depend on its position
            x = np.sum(x[..., None, :] * w, axis=-1) + b
            if k < last or self.final_activation == "leaky_relu":
                x = leaky_relu(x)
        return x


@dataclass(frozen=True)
class MpState:
    features: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        features = np.asarray(self.features)
        mask = np.asarray(self.mask, dtype=np.float64).ravel()
        if features.ndim != 2 or features.shape[0] != mask.shape[0]:
            raise DimensionMismatch(f"features {features.shape} and mask {mask.shape} disagree")
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "mask", mask)

    @property
    def hidden(self) -> int:
        return self.features.shape[1]


def init_feature_map(dims: Sequence[int], seed: int, final_activation: str = "identity") -> FeatureMap:
    """Weights and biases ~ U(-sqrt(1/fan_in), +sqrt(1/fan_in)) from a seeded stream."""
    dims = [int(d) for d in dims]
    if len(dims) < 2 or min(dims) < 1:
        raise ConfigInvalid(f"feature map dims must list >= 2 positive sizes, got {dims}")
    rng = substream(seed, Stream.FEATURE_MAP)
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        bound = np.sqrt(1.0 / fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        biases.append(rng.uniform(-bound, bound, size=fan_out))
    return FeatureMap(tuple(weights), tuple(biases), final_activation)


def _canonical_order(rows: np.ndarray) -> np.ndarray:
    """Row order by content, so sums do not depend on how rows were permuted."""
    if rows.shape[0] <= 1:
        return np.arange(rows.shape[0])
    keys = np.real(rows).T[::-1]
    return np.lexsort(keys)


def mp_forward(state: MpState, f_e: FeatureMap, f_n: FeatureMap, self_messages: bool = True) -> MpState:
    h_dim = state.hidden
    if f_e.in_dim != 2 * h_dim:
        raise DimensionMismatch(f"f_e expects {f_e.in_dim} inputs, state gives 2 x {h_dim}")
    if f_n.in_dim != h_dim + f_e.out_dim:
        raise DimensionMismatch(f"f_n expects {f_n.in_dim} inputs, need {h_dim} + {f_e.out_dim}")

    live = np.flatnonzero(state.mask == 1)
    out = np.zeros((state.features.shape[0], f_n.out_dim), dtype=np.result_type(state.features, float))
    if live.size == 0:
        return MpState(out, state.mask)

    h = state.features[live]
    n = h.shape[0]
    # senders in content order so the message sum is permutation independent
    order = _canonical_order(h)
    senders = h[order]
    pairs = np.concatenate([
        np.repeat(h[:, None, :], n, axis=1),
        np.repeat(senders[None, :, :], n, axis=0),
    ], axis=2)
    messages = f_e(pairs.reshape(n * n, 2 * h_dim)).reshape(n, n, f_e.out_dim)
    if not self_messages:
        is_self = live[:, None] == live[order][None, :]
        messages = np.where(is_self[:, :, None], 0.0, messages)
    aggregated = messages.sum(axis=1)

    out[live] = f_n(np.concatenate([h, aggregated], axis=1))
    return MpState(out, state.mask)


def mp_pool(state: MpState) -> np.ndarray:
    """Feature-wise mean over unmasked rows."""
    live = state.features[state.mask == 1]
    if live.shape[0] == 0:
        raise EmptyCloud("cannot pool a state with no unmasked rows")
    return live[_canonical_order(live)].mean(axis=0)
