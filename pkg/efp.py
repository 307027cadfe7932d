#!/usr/bin/env python3
"""
Energy-flow polynomials over loopless multigraphs.

For a multigraph G with V vertices,

    EFP_G = sum_{i_1..i_V} z_{i_1} ... z_{i_V} * prod_{(a,b) in G} theta_{i_a i_b}^beta

with z = pt_rel (normalized to sum 1 by default) and theta the wrapped
(eta, phi) distance. The evaluation set used for W1-EFP is every connected
loopless multigraph with 4 vertices and 4 edges (5 graphs).

Graphs print as `V=4; E=[(0,1),(0,1),(1,2),(2,3)]` and parse back with
Multigraph.parse.
"""

import functools
import itertools
import math
import re
import string
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np

from cloud_model import PT, CloudSample, ConfigInvalid, FeatureSeries, ParticleCloud, ResourceLimit
from kinematics import delta_r_matrix
from runtime import DEFAULT_ENUM_LIMIT, parallel_map

Edge = Tuple[int, int]

EVAL_SET_VERTICES = 4
EVAL_SET_EDGES = 4
RELABELINGS_PER_CLASS = 10_000

_TEXT_RE = re.compile(r"^\s*V\s*=\s*(\d+)\s*;\s*E\s*=\s*\[(.*)\]\s*$")
_EDGE_RE = re.compile(r"\(\s*(\d+)\s*,\s*(\d+)\s*\)")


@dataclass(frozen=True)
class Multigraph:
    """Loopless multigraph on vertices 0..n_vertices-1; edges kept sorted as (min, max)."""

    n_vertices: int
    edges: Tuple[Edge, ...]

    def __post_init__(self):
        if self.n_vertices < 1:
            raise ConfigInvalid(f"a multigraph needs at least one vertex, got {self.n_vertices}")
        normalized = []
        for u, v in self.edges:
            u, v = int(u), int(v)
            if u == v:
                raise ConfigInvalid(f"loop ({u}, {v}) in a loopless multigraph")
            if not (0 <= u < self.n_vertices and 0 <= v < self.n_vertices):
                raise ConfigInvalid(f"edge ({u}, {v}) references a vertex outside 0..{self.n_vertices - 1}")
            normalized.append((min(u, v), max(u, v)))
        object.__setattr__(self, "edges", tuple(sorted(normalized)))

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def to_networkx(self) -> nx.MultiGraph:
        g = nx.MultiGraph()
        g.add_nodes_from(range(self.n_vertices))
        g.add_edges_from(self.edges)
        return g

    @property
    def connected(self) -> bool:
        return nx.is_connected(self.to_networkx())

    def relabeled(self, perm: Sequence[int]) -> "Multigraph":
        return Multigraph(self.n_vertices, tuple((perm[u], perm[v]) for u, v in self.edges))

    def canonical(self) -> "Multigraph":
        """Relabeling with the lexicographically smallest sorted edge list."""
        best = min(
            tuple(sorted((min(p[u], p[v]), max(p[u], p[v])) for u, v in self.edges))
            for p in itertools.permutations(range(self.n_vertices))
        )
        return Multigraph(self.n_vertices, best)

    def __str__(self) -> str:
        return f"V={self.n_vertices}; E=[{','.join(f'({u},{v})' for u, v in self.edges)}]"

    @classmethod
    def parse(cls, text: str) -> "Multigraph":
        match = _TEXT_RE.match(text)
        if not match:
            raise ConfigInvalid(f"cannot parse multigraph {text!r}")
        edges = tuple((int(u), int(v)) for u, v in _EDGE_RE.findall(match.group(2)))
        return cls(int(match.group(1)), edges)


@dataclass(frozen=True)
class EfpConfig:
    beta: float = 1.0
    normalize_z: bool = True

    def validate(self) -> None:
        if not self.beta > 0:
            raise ConfigInvalid(f"EFP beta must be > 0, got {self.beta}")

    def to_dict(self) -> dict:
        return {"beta": self.beta, "normalize_z": self.normalize_z}


def enumerate_multigraphs(n_vertices: int, n_edges: int, connected_only: bool = True,
                          limit: int = DEFAULT_ENUM_LIMIT) -> List[Multigraph]:
    """
    All loopless multigraphs with exactly n_vertices vertices and n_edges edges,
    one per isomorphism class, sorted by canonical edge list.
    """
    if n_vertices < 1 or n_edges < 0:
        raise ConfigInvalid(f"need n_vertices >= 1 and n_edges >= 0, got ({n_vertices}, {n_edges})")

    pairs = list(itertools.combinations(range(n_vertices), 2))
    if n_edges > 0 and not pairs:
        return []

    # every class has at most V! labelings, and canonical() tries all of them
    raw = math.comb(len(pairs) + n_edges - 1, n_edges) if pairs else 1
    labelings = math.factorial(n_vertices)
    if raw > limit * labelings:
        raise ResourceLimit(
            f"more than {limit} isomorphism classes for V={n_vertices}, E={n_edges} "
            f"({raw} edge multisets, {labelings} labelings each); raise CLOUDJUDGE_ENUM_LIMIT"
        )
    if raw * labelings > limit * RELABELINGS_PER_CLASS:
        raise ResourceLimit(
            f"enumerating V={n_vertices}, E={n_edges} needs {raw} x {labelings} relabelings, over the budget "
            f"of {RELABELINGS_PER_CLASS} per allowed class (limit {limit}); raise CLOUDJUDGE_ENUM_LIMIT"
        )

    classes = set()
    for edges in itertools.combinations_with_replacement(pairs, n_edges):
        graph = Multigraph(n_vertices, edges)
        if connected_only and not graph.connected:
            continue
        classes.add(graph.canonical().edges)
        if len(classes) > limit:
            raise ResourceLimit(
                f"more than {limit} isomorphism classes for V={n_vertices}, E={n_edges}; raise CLOUDJUDGE_ENUM_LIMIT"
            )
    return [Multigraph(n_vertices, edges) for edges in sorted(classes)]


def evaluation_graphs() -> List[Multigraph]:
    """The 5 connected loopless multigraphs with 4 vertices and 4 edges, canonical order."""
    return enumerate_multigraphs(EVAL_SET_VERTICES, EVAL_SET_EDGES, connected_only=True)


def _einsum_spec(g: Multigraph) -> str:
    letters = string.ascii_letters[:g.n_vertices]
    terms = list(letters) + [letters[u] + letters[v] for u, v in g.edges]
    return ",".join(terms) + "->"


def _energies_and_angles(cloud: ParticleCloud, cfg: EfpConfig) -> Tuple[np.ndarray, np.ndarray]:
    rows = cloud.unmasked_sorted()
    z = rows[:, PT].copy()
    if cfg.normalize_z:
        total = z.sum()
        if total > 0:
            z = z / total
    theta_beta = delta_r_matrix(rows) ** cfg.beta
    return z, theta_beta


@functools.lru_cache(maxsize=256)
def _contraction_path(spec: str, n_vertices: int, n_edges: int) -> list:
    # the pairwise contraction order only depends on the index structure
    n = 30
    operands = [np.ones(n)] * n_vertices + [np.ones((n, n))] * n_edges
    path, _ = np.einsum_path(spec, *operands, optimize="greedy")
    return path


def _evaluate(z: np.ndarray, theta_beta: np.ndarray, g: Multigraph) -> float:
    spec = _einsum_spec(g)
    operands = [z] * g.n_vertices + [theta_beta] * g.n_edges
    path = _contraction_path(spec, g.n_vertices, g.n_edges)
    return float(np.einsum(spec, *operands, optimize=path))


def efp_value(cloud: ParticleCloud, g: Multigraph, cfg: EfpConfig = EfpConfig()) -> float:
    """Full index sum of the EFP for graph g over the unmasked particles of cloud."""
    cfg.validate()
    z, theta_beta = _energies_and_angles(cloud, cfg)
    return _evaluate(z, theta_beta, g)


def efp_matrix(clouds: Sequence[ParticleCloud], graphs: Sequence[Multigraph],
               cfg: EfpConfig = EfpConfig(), threads: int = 1) -> np.ndarray:
    """(n_clouds, n_graphs) EFP values; angles are computed once per cloud."""
    cfg.validate()

    def row(cloud: ParticleCloud) -> List[float]:
        z, theta_beta = _energies_and_angles(cloud, cfg)
        return [_evaluate(z, theta_beta, g) for g in graphs]

    values = parallel_map(row, clouds, threads)
    return np.asarray(values, dtype=np.float64).reshape(len(clouds), len(graphs))


def efp_set_features(sample: CloudSample, cfg: EfpConfig = EfpConfig(),
                     graphs: Optional[Sequence[Multigraph]] = None, threads: int = 1) -> List[FeatureSeries]:
    """One FeatureSeries per evaluation graph, in canonical graph order."""
    graphs = evaluation_graphs() if graphs is None else list(graphs)
    values = efp_matrix(sample.clouds, graphs, cfg, threads)
    return [FeatureSeries(values[:, k], name=f"efp[{g}]") for k, g in enumerate(graphs)]
