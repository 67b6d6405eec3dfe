"""Phase-shifter / true-time-delay weights, array gain and squint points.

Phase-shifter settings are kept in cycles (phase / 2 pi) and never wrapped:
the TTD delay ``t_n = f_M r_cn / (W c) - phi_n / W`` needs the unwrapped
value. Delays may come out negative; ``delay_offset`` shifts all of them by
a common amount, which multiplies subcarrier ``m`` by
``exp(-j 2 pi f~_m delay_offset)`` without moving any focus.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import ArrayConfig, subcarrier_frequency
from .geometry import (
    SPEED_OF_LIGHT,
    DistanceModel,
    PolarPoint,
    antenna_indices,
    element_distances,
)


class OutOfTrajectory(ValueError):
    """Closed-form squint point falls outside the physical half-plane."""


@dataclass(frozen=True)
class BeamformerState:
    cfg: ArrayConfig
    phase_cycles: np.ndarray
    delays: np.ndarray
    start_focus: PolarPoint
    end_focus: PolarPoint
    delay_offset: float = 0.0

    def __post_init__(self):
        if len(self.phase_cycles) != self.cfg.N or len(self.delays) != self.cfg.N:
            raise ValueError("phase_cycles and delays must have length N")

    @property
    def is_radial(self) -> bool:
        return self.start_focus.theta == self.end_focus.theta


@dataclass(frozen=True)
class SquintPoint:
    m: int
    f: float
    point: PolarPoint


def ps_weights(
    cfg: ArrayConfig, focus: PolarPoint, distance_model: DistanceModel = "fresnel"
) -> np.ndarray:
    """Unit-modulus weights matching the channel phase at ``focus`` and ``f0``."""
    r0n = element_distances(focus, cfg.N, cfg.d, distance_model)
    return np.exp(-2j * np.pi * cfg.f0 * r0n / SPEED_OF_LIGHT) / math.sqrt(cfg.N)


def ttd_config(
    cfg: ArrayConfig,
    start: PolarPoint,
    end: PolarPoint,
    distance_model: DistanceModel = "fresnel",
    delay_offset: float = 0.0,
) -> BeamformerState:
    """PS + TTD settings steering subcarrier 0 to ``start`` and M to ``end``."""
    c = SPEED_OF_LIGHT
    phi = cfg.f0 * element_distances(start, cfg.N, cfg.d, distance_model) / c
    r_end = element_distances(end, cfg.N, cfg.d, distance_model)
    t = cfg.fM * r_end / (cfg.W * c) - phi / cfg.W + delay_offset
    return BeamformerState(cfg, phi, t, start, end, delay_offset)


def ps_state(
    cfg: ArrayConfig, focus: PolarPoint, distance_model: DistanceModel = "fresnel"
) -> BeamformerState:
    """Phase-shifter-only beamformer; its trajectory is the natural squint."""
    phi = cfg.f0 * element_distances(focus, cfg.N, cfg.d, distance_model) / SPEED_OF_LIGHT
    end = natural_squint_point(cfg, focus, cfg.M).point
    return BeamformerState(cfg, phi, np.zeros(cfg.N), focus, end)


def _weights(state: BeamformerState, baseband) -> np.ndarray:
    fb = np.asarray(baseband, dtype=float)[..., None]
    # keep the exponent in cycles and reduce mod 1 before scaling by 2 pi
    cycles = np.mod(state.phase_cycles + fb * state.delays, 1.0)
    return np.exp(-2j * np.pi * cycles) / math.sqrt(state.cfg.N)


def weights_at(state: BeamformerState, m: int) -> np.ndarray:
    subcarrier_frequency(state.cfg, m)  # range check
    return _weights(state, m * state.cfg.W / state.cfg.M)


def weights_matrix(state: BeamformerState) -> np.ndarray:
    """Weights for every subcarrier, shape ``(M + 1, N)``."""
    return _weights(state, state.cfg.baseband)


def array_gain(
    weights: np.ndarray,
    point: PolarPoint,
    f: float,
    cfg: ArrayConfig,
    distance_model: DistanceModel = "fresnel",
) -> float:
    """``|w^H b(r, theta, f)|`` with unit-modulus array response ``b``."""
    rn = element_distances(point, cfg.N, cfg.d, distance_model)
    b = np.exp(-2j * np.pi * f * rn / SPEED_OF_LIGHT)
    return float(abs(np.vdot(weights, b)))


def f_kernel(x: float, y: float, N: int) -> float:
    n = antenna_indices(N)
    return float(abs(np.sum(np.exp(1j * (n**2 * x + n * y)))))


def gain_map(
    weights: np.ndarray,
    r: np.ndarray,
    theta: np.ndarray,
    f: float,
    cfg: ArrayConfig,
    distance_model: DistanceModel = "fresnel",
    chunk: int = 16,
) -> np.ndarray:
    """Array gain on the ``r x theta`` grid, shape ``(len(r), len(theta))``."""
    r = np.asarray(r, dtype=float)
    theta = np.asarray(theta, dtype=float)
    nd = cfg.indices * cfg.d
    sin_t = np.sin(theta)[:, None]
    cos2_t = np.cos(theta)[:, None] ** 2
    wc = np.conj(weights)
    k = f / SPEED_OF_LIGHT
    out = np.empty((len(r), len(theta)))
    for i0 in range(0, len(r), chunk):
        rr = r[i0 : i0 + chunk, None, None]
        if distance_model == "exact":
            x = rr * np.cos(theta)[None, :, None]
            y = rr * sin_t[None]
            rn = np.hypot(x, y - nd)
        else:
            rn = rr - nd * sin_t[None] + nd**2 * cos2_t[None] / (2 * rr)
        # the common r term only rotates the sum; drop it to keep phases small
        cyc = np.mod(k * (rn - rr), 1.0)
        out[i0 : i0 + chunk] = np.abs(np.exp(-2j * np.pi * cyc) @ wc)
    return out


def natural_squint_point(cfg: ArrayConfig, focus0: PolarPoint, m: int) -> SquintPoint:
    """Where subcarrier ``m`` focuses under phase-shifter-only beamforming."""
    fm = subcarrier_frequency(cfg, m)
    if m == 0:
        return SquintPoint(0, fm, focus0)
    s = cfg.f0 / fm * math.sin(focus0.theta)
    cos2 = 1 - s * s
    r = focus0.r * fm / cfg.f0 * cos2 / math.cos(focus0.theta) ** 2
    return SquintPoint(m, fm, PolarPoint(r, math.asin(s)))


def ttd_trajectory_sin_inv_r(
    cfg: ArrayConfig, start: PolarPoint, end: PolarPoint, f: float
) -> tuple[float, float]:
    """Closed-form ``(sin theta, 1 / r)`` of the TTD squint point at frequency ``f``.

    The weights on the start and end foci are ``(W - f~) f0 / (W f)`` and
    ``(W + f0) f~ / (W f)`` with ``f~ = f - f0``.
    """
    fb = f - cfg.f0
    a = (cfg.W - fb) * cfg.f0 / (cfg.W * f)
    b = (cfg.W + cfg.f0) * fb / (cfg.W * f)
    s = a * math.sin(start.theta) + b * math.sin(end.theta)
    cos2 = 1 - s * s
    if cos2 <= 0:
        return s, math.nan
    inv_r = (
        a * math.cos(start.theta) ** 2 / (start.r * cos2)
        + b * math.cos(end.theta) ** 2 / (end.r * cos2)
    )
    return s, inv_r


def ttd_squint_point(state: BeamformerState, m: int) -> SquintPoint:
    cfg = state.cfg
    fm = subcarrier_frequency(cfg, m)
    if m == 0 or state.start_focus == state.end_focus:
        return SquintPoint(m, fm, state.start_focus)
    if m == cfg.M:
        return SquintPoint(m, fm, state.end_focus)
    s, inv_r = ttd_trajectory_sin_inv_r(cfg, state.start_focus, state.end_focus, fm)
    if not (abs(s) < 1 and inv_r > 0):
        raise OutOfTrajectory(f"subcarrier {m}: sin={s}, 1/r={inv_r}")
    return SquintPoint(m, fm, PolarPoint(1 / inv_r, math.asin(s)))


def trajectory(state: BeamformerState) -> list[SquintPoint]:
    return [ttd_squint_point(state, m) for m in range(state.cfg.M + 1)]


@dataclass(frozen=True)
class SearchGrid:
    """Rectangular ``(r, theta)`` grid; angles in radians, endpoints inclusive."""

    r_min: float
    r_max: float
    dr: float
    theta_min: float
    theta_max: float
    dtheta: float

    @classmethod
    def standard(cls) -> "SearchGrid":
        # near-field span of a 128 x 5 mm array at 30 GHz; 0.4 m by 0.5 deg steps
        return cls(3.17, 81.92, 0.4, -math.pi / 2, math.pi / 2, math.radians(0.5))

    def radii(self) -> np.ndarray:
        k = int(math.floor((self.r_max - self.r_min) / self.dr + 1e-9))
        return self.r_min + self.dr * np.arange(k + 1)

    def angles(self) -> np.ndarray:
        k = int(math.floor((self.theta_max - self.theta_min) / self.dtheta + 1e-9))
        th = self.theta_min + self.dtheta * np.arange(k + 1)
        # points on the array axis itself are not valid positions
        return th[np.abs(th) < math.pi / 2 - 1e-12]


def brute_force_squint_point(
    state: BeamformerState,
    m: int,
    grid: SearchGrid,
    distance_model: DistanceModel = "fresnel",
) -> SquintPoint:
    """Grid argmax of the array gain; ties go to smaller r, then smaller theta."""
    fm = subcarrier_frequency(state.cfg, m)
    r, th = grid.radii(), grid.angles()
    if len(r) == 0 or len(th) == 0:
        raise ValueError("empty search grid")
    g = gain_map(weights_at(state, m), r, th, fm, state.cfg, distance_model)
    # row-major flattening is (r asc, theta asc); argmax keeps the first maximum
    i, j = np.unravel_index(int(np.argmax(g)), g.shape)
    return SquintPoint(m, fm, PolarPoint(float(r[i]), float(th[j])))
