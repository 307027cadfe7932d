#!/usr/bin/env python3
"""
Energy mover's distance between two particle clouds.

    EMD(a, b) = min_f  sum_ij f_ij * theta_ij / R  +  |sum_i pt_i - sum_j pt_j|

subject to f >= 0, row sums <= pt of a, column sums <= pt of b, and total
flow = min(sum pt_a, sum pt_b). The lighter side gets a zero-cost sink
holding the pt difference, which turns the problem into a balanced
transportation problem solved exactly by network simplex (POT's ot.emd).

The solver's dual potentials are checked against the plan (dual
feasibility, complementary slackness, strong duality); a failed check
raises SolverFailure.
"""

from dataclasses import dataclass
from typing import Tuple

import numpy as np
import ot

from cloud_model import (
    PT,
    CloudError,
    CloudSample,
    ConfigInvalid,
    EmptyCloud,
    NumericalError,
    ParticleCloud,
    SolverFailure,
)
from kinematics import cross_delta_r
from runtime import parallel_map

DEFAULT_RADIUS = 0.8
CERTIFICATE_TOLERANCE = 1e-7
MAX_SIMPLEX_ITERATIONS = 1_000_000


@dataclass(frozen=True)
class EmdConfig:
    radius: float = DEFAULT_RADIUS

    def validate(self) -> None:
        if not self.radius > 0:
            raise ConfigInvalid(f"EMD radius must be > 0, got {self.radius}")

    def to_dict(self) -> dict:
        return {"radius": self.radius, "solver": "network simplex (POT ot.emd), float64", "quantization": "none"}


@dataclass(frozen=True)
class TransportPlan:
    """Optimal flow between the unmasked particles of two clouds (canonical particle order)."""

    flow: np.ndarray
    objective: float
    created_total: float
    destroyed_total: float
    dual_objective: float = 0.0


def _pts(cloud: ParticleCloud, side: str) -> np.ndarray:
    rows = cloud.unmasked_sorted()
    if rows.shape[0] == 0:
        raise EmptyCloud(f"cloud {side} has no unmasked particles")
    return rows


def _certify(cost: np.ndarray, plan: np.ndarray, a: np.ndarray, b: np.ndarray, log: dict) -> float:
    u, v = np.asarray(log["u"]), np.asarray(log["v"])
    reduced = cost - u[:, None] - v[None, :]
    scale = max(1.0, float(np.abs(cost).max()))
    if reduced.min() < -CERTIFICATE_TOLERANCE * scale:
        raise SolverFailure(f"dual infeasible: reduced cost {reduced.min():.3e}")
    slack = np.abs(reduced[plan > 0]).max() if np.any(plan > 0) else 0.0
    if slack > CERTIFICATE_TOLERANCE * scale:
        raise SolverFailure(f"complementary slackness residual {slack:.3e} exceeds {CERTIFICATE_TOLERANCE}")
    primal = float(np.sum(plan * cost))
    dual = float(u @ a + v @ b)
    if abs(primal - dual) > CERTIFICATE_TOLERANCE * max(1.0, abs(primal)):
        raise SolverFailure(f"duality gap {abs(primal - dual):.3e}")
    return dual


def emd(a: ParticleCloud, b: ParticleCloud, cfg: EmdConfig = EmdConfig()) -> Tuple[float, TransportPlan]:
    """Exact EMD and its transport plan (rows: particles of a, columns: particles of b)."""
    cfg.validate()
    rows_a, rows_b = _pts(a, "a"), _pts(b, "b")
    pt_a, pt_b = rows_a[:, PT], rows_b[:, PT]
    total_a, total_b = float(pt_a.sum()), float(pt_b.sum())
    n_a, n_b = pt_a.shape[0], pt_b.shape[0]

    diff = abs(total_a - total_b)
    created = total_b - total_a if total_b > total_a else 0.0
    destroyed = total_a - total_b if total_a > total_b else 0.0
    cost = cross_delta_r(rows_a, rows_b) / cfg.radius

    if min(total_a, total_b) == 0.0:
        flow = np.zeros((n_a, n_b))
        return diff, TransportPlan(flow, diff, created, destroyed, diff)

    # balance with a zero-cost sink on the lighter side
    weights_a, weights_b, full_cost = pt_a, pt_b, cost
    if total_a > total_b:
        weights_b = np.append(pt_b, total_a - total_b)
        full_cost = np.hstack([cost, np.zeros((n_a, 1))])
    elif total_b > total_a:
        weights_a = np.append(pt_a, total_b - total_a)
        full_cost = np.vstack([cost, np.zeros((1, n_b))])
    # ot.emd insists on equal masses to 1e-6 relative; make them bit-equal
    weights_b = weights_b * (weights_a.sum() / weights_b.sum())

    weights_a = np.ascontiguousarray(weights_a, dtype=np.float64)
    weights_b = np.ascontiguousarray(weights_b, dtype=np.float64)
    full_cost = np.ascontiguousarray(full_cost, dtype=np.float64)
    plan, log = ot.emd(weights_a, weights_b, full_cost, numItermax=MAX_SIMPLEX_ITERATIONS, log=True)
    if log.get("warning"):
        raise SolverFailure(f"network simplex did not reach optimality: {log['warning']}")

    dual = _certify(full_cost, plan, weights_a, weights_b, log)
    flow = np.array(plan[:n_a, :n_b])
    transport = float(np.sum(flow * cost))
    distance = transport + diff
    return distance, TransportPlan(flow, distance, created, destroyed, dual + diff)


def emd_matrix(xs: CloudSample, ys: CloudSample, cfg: EmdConfig = EmdConfig(), threads: int = 1) -> np.ndarray:
    """Pairwise EMDs; entry (i, j) is emd(xs[i], ys[j])."""
    cfg.validate()

    def row(i: int) -> np.ndarray:
        out = np.empty(len(ys))
        for j, y in enumerate(ys.clouds):
            try:
                out[j] = emd(xs.clouds[i], y, cfg)[0]
            except (CloudError, NumericalError) as exc:
                raise type(exc)(f"pair ({i}, {j}): {exc}") from exc
        return out

    return np.vstack(parallel_map(row, range(len(xs)), threads))
