"""Coordinate conventions and per-antenna distances for a ULA on the y-axis.

The array sits on the y-axis with antenna ``n`` at ``(0, n*d)`` and
``n = -(N-1)/2, ..., (N-1)/2`` (half-integers for even ``N``). Angles are
measured from broadside (the +x axis) with ``sin(theta)`` along the array
axis, so a point at ``(r, theta)`` lives at ``x = r cos(theta)``,
``y = r sin(theta)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

DistanceModel = Literal["exact", "fresnel"]

# Speed of light used throughout; 3e8 makes lambda = 1 cm at 30 GHz.
SPEED_OF_LIGHT = 3e8


@dataclass(frozen=True)
class PolarPoint:
    r: float
    theta: float

    def __post_init__(self):
        if not (self.r > 0 and math.isfinite(self.r)):
            raise ValueError(f"distance must be positive and finite, got {self.r}")
        if not abs(self.theta) < math.pi / 2:
            raise ValueError(f"angle must lie in (-pi/2, pi/2), got {self.theta}")

    @classmethod
    def from_degrees(cls, r: float, theta_deg: float) -> "PolarPoint":
        return cls(r, math.radians(theta_deg))

    @property
    def theta_deg(self) -> float:
        return math.degrees(self.theta)


@dataclass(frozen=True)
class CartesianPoint:
    x: float
    y: float


def polar_to_cartesian(p: PolarPoint) -> CartesianPoint:
    return CartesianPoint(p.r * math.cos(p.theta), p.r * math.sin(p.theta))


def cartesian_to_polar(p: CartesianPoint) -> PolarPoint:
    """Inverse of :func:`polar_to_cartesian`; requires ``x > 0``."""
    if not p.x > 0:
        raise ValueError(f"point must be in front of the array (x > 0), got x={p.x}")
    return PolarPoint(math.hypot(p.x, p.y), math.atan2(p.y, p.x))


def antenna_indices(N: int) -> np.ndarray:
    """Symmetric index set ``-(N-1)/2 .. (N-1)/2``."""
    if N < 2:
        raise ValueError("need at least two antennas")
    return np.arange(N) - (N - 1) / 2


def exact_element_distance(p: CartesianPoint, n, d: float):
    """Distance from ``p`` to antenna(s) ``n``: ``sqrt(x^2 + (y - n d)^2)``."""
    return np.hypot(p.x, p.y - np.asarray(n) * d)


def fresnel_element_distance(p: PolarPoint, n, d: float):
    """Second-order (Fresnel) expansion of the element distance."""
    nd = np.asarray(n) * d
    cos_t = math.cos(p.theta)
    return p.r - nd * math.sin(p.theta) + nd**2 * cos_t**2 / (2 * p.r)


def element_distances(
    p: PolarPoint, N: int, d: float, model: DistanceModel = "exact"
) -> np.ndarray:
    n = antenna_indices(N)
    if model == "exact":
        return exact_element_distance(polar_to_cartesian(p), n, d)
    if model == "fresnel":
        return fresnel_element_distance(p, n, d)
    raise ValueError(f"unknown distance model {model!r}")


def near_field_bounds(
    N: int, d: float, lam: float, aperture: Literal["full", "edge"] = "full"
) -> tuple[float, float]:
    """Return ``(lower, upper)`` near-field limits in metres.

    ``lower = 0.62 sqrt(D^3 / lam)`` and ``upper = 2 D^2 / lam`` (Rayleigh).
    ``aperture="full"`` uses ``D = N d``; ``"edge"`` uses the element-centre
    span ``D = (N - 1) d``.
    """
    if N < 2 or d <= 0 or lam <= 0:
        raise ValueError("need N >= 2, d > 0 and lam > 0")
    if aperture == "full":
        D = N * d
    elif aperture == "edge":
        D = (N - 1) * d
    else:
        raise ValueError(f"unknown aperture convention {aperture!r}")
    return 0.62 * math.sqrt(D**3 / lam), 2 * D**2 / lam
