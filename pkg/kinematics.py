#!/usr/bin/env python3
"""
Jet kinematics from relative particle features.

Particles are taken as massless when rebuilding four-momenta, so the jet
mass here is the relative mass of the summed constituents (no absolute
energy scale is needed).

Jet images bin unmasked particles in the (eta_rel, phi_rel) plane with
pixel intensity equal to the summed pt_rel; the defaults (24 pixels over
+-0.4) cover an R = 0.8 jet.
"""

import math
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from cloud_model import (
    ETA,
    PHI,
    PT,
    DegenerateMomentum,
    InternalConsistencyError,
    ParticleCloud,
    wrap_phi,
)

DEFAULT_RESOLUTION = 24
DEFAULT_HALF_WIDTH = 0.4
MASS_CLAMP_TOLERANCE = 1e-12


@dataclass(frozen=True)
class FourMomentum:
    px: float
    py: float
    pz: float
    e: float

    def __post_init__(self):
        if self.e < 0:
            raise InternalConsistencyError(f"negative energy {self.e}")

    def __add__(self, other: "FourMomentum") -> "FourMomentum":
        return FourMomentum(self.px + other.px, self.py + other.py, self.pz + other.pz, self.e + other.e)

    @property
    def p2(self) -> float:
        return self.px ** 2 + self.py ** 2 + self.pz ** 2

    @property
    def m2(self) -> float:
        return self.e ** 2 - self.p2


@dataclass(frozen=True)
class JetImage:
    grid: np.ndarray
    eta_range: float
    phi_range: float
    resolution: int

    @property
    def total(self) -> float:
        return float(self.grid.sum())


def to_pseudoangular(p: FourMomentum) -> Tuple[float, float, float]:
    """(pt, eta, phi) of a four-momentum; phi in (-pi, pi]."""
    pt = math.hypot(p.px, p.py)
    if pt == 0:
        raise DegenerateMomentum("pseudorapidity is undefined for a momentum along the beam axis (pt = 0)")
    # asinh(pz/pt) == -log(tan(theta/2)) without the cancellation at small angles
    eta = math.asinh(p.pz / pt)
    phi = wrap_phi(math.atan2(p.py, p.px))
    return pt, eta, phi


def from_relative(cloud: ParticleCloud) -> List[FourMomentum]:
    """Massless four-momenta of the unmasked particles, in slot order."""
    out = []
    for eta, phi, pt in cloud.unmasked:
        out.append(FourMomentum(
            px=pt * math.cos(phi),
            py=pt * math.sin(phi),
            pz=pt * math.sinh(eta),
            e=pt * math.cosh(eta),
        ))
    return out


def _jet_sum(cloud: ParticleCloud) -> Tuple[float, float, float, float]:
    rows = cloud.unmasked_sorted()
    eta, phi, pt = rows[:, ETA], rows[:, PHI], rows[:, PT]
    return (
        float(np.sum(pt * np.cos(phi))),
        float(np.sum(pt * np.sin(phi))),
        float(np.sum(pt * np.sinh(eta))),
        float(np.sum(pt * np.cosh(eta))),
    )


def jet_mass(cloud: ParticleCloud) -> float:
    """
    Relative invariant mass of the summed massless constituents.

    Small negative m^2 from round-off (|m^2| <= 1e-12 E^2) is clamped to zero;
    anything larger is an internal error.
    """
    px, py, pz, e = _jet_sum(cloud)
    m2 = e * e - (px * px + py * py + pz * pz)
    if m2 < 0:
        if -m2 > MASS_CLAMP_TOLERANCE * e * e:
            raise InternalConsistencyError(f"jet m^2 = {m2:.3e} is negative beyond round-off (E^2 = {e * e:.3e})")
        return 0.0
    return math.sqrt(m2)


def jet_pt(cloud: ParticleCloud) -> float:
    px, py, _, _ = _jet_sum(cloud)
    return math.hypot(px, py)


def cardinality(cloud: ParticleCloud) -> int:
    return int(np.count_nonzero(cloud.mask == 1))


def discretize(cloud: ParticleCloud, resolution: int = DEFAULT_RESOLUTION,
               half_width: float = DEFAULT_HALF_WIDTH) -> JetImage:
    """Bin unmasked particles into a resolution x resolution pt_rel image; rows are eta, columns phi."""
    if resolution < 1:
        raise ValueError(f"resolution must be >= 1, got {resolution}")
    if half_width <= 0:
        raise ValueError(f"half_width must be > 0, got {half_width}")

    rows = cloud.unmasked_sorted()
    edges = np.linspace(-half_width, half_width, resolution + 1)
    grid, _, _ = np.histogram2d(rows[:, ETA], rows[:, PHI], bins=(edges, edges), weights=rows[:, PT])
    return JetImage(grid=grid, eta_range=half_width, phi_range=half_width, resolution=resolution)


def mean_image(clouds: Sequence[ParticleCloud], resolution: int = DEFAULT_RESOLUTION,
               half_width: float = DEFAULT_HALF_WIDTH) -> JetImage:
    """Pixel-wise mean of the jet images of several clouds."""
    if not clouds:
        raise ValueError("mean_image needs at least one cloud")
    total = np.zeros((resolution, resolution))
    for cloud in clouds:
        total += discretize(cloud, resolution, half_width).grid
    return JetImage(grid=total / len(clouds), eta_range=half_width, phi_range=half_width, resolution=resolution)


def particle_features(clouds: Sequence[ParticleCloud]) -> np.ndarray:
    """Pooled (eta_rel, phi_rel, pt_rel) of all unmasked particles, shape (P, 3)."""
    parts = [c.unmasked_sorted() for c in clouds]
    if not parts:
        return np.zeros((0, 3))
    return np.concatenate(parts, axis=0)


def delta_r_matrix(rows: np.ndarray) -> np.ndarray:
    """Pairwise angular distance sqrt(d_eta^2 + d_phi^2) with d_phi wrapped."""
    return cross_delta_r(rows, rows)


def cross_delta_r(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    d_eta = a[:, None, ETA] - b[None, :, ETA]
    d_phi = wrap_phi(a[:, None, PHI] - b[None, :, PHI])
    return np.sqrt(d_eta ** 2 + d_phi ** 2)
