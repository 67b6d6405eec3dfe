"""Sweep simulation, peak feedback and the four localization schemes.

* TBT: exhaustive phase-shifter codebook search (angle stage, then distance).
* CBS-Low: one TTD angle sweep shared by all users, then one radial sweep
  per distinct angle.
* CBS-High: ``P`` angle sweeps with staggered end angles; the angle is the
  mean of the per-sweep estimates and the distance maximizes the phase
  consistency objective ``L(r)`` of the peak-subcarrier phases.
* CBS-2BS: angle sweeps from two parallel arrays ``L`` metres apart, then
  triangulation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from enum import Enum
from typing import Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .beamforming import (
    BeamformerState,
    ps_weights,
    ttd_config,
    weights_matrix,
)
from .channel import (
    ArrayConfig,
    ReceivedSpectrum,
    add_awgn,
    channel_matrix,
)
from .geometry import SPEED_OF_LIGHT, CartesianPoint, DistanceModel, PolarPoint


class InvalidFeedback(ValueError):
    pass


class NonPositiveDistance(ValueError):
    pass


class AmbiguousDistance(RuntimeError):
    pass


class DegenerateGeometry(ValueError):
    pass


class Scheme(str, Enum):
    TBT = "tbt"
    CBS_LOW = "cbs_low"
    CBS_HIGH = "cbs_high"
    CBS_2BS = "cbs_2bs"


@dataclass(frozen=True)
class SensingRegion:
    """``r_min <= r <= r_max`` and ``theta_min <= theta <= theta_max`` (radians)."""

    r_min: float
    r_max: float
    theta_min: float
    theta_max: float

    def __post_init__(self):
        if not 0 < self.r_min < self.r_max:
            raise ValueError("need 0 < r_min < r_max")
        if not -math.pi / 2 < self.theta_min < self.theta_max < math.pi / 2:
            raise ValueError("need -90 deg < theta_min < theta_max < 90 deg")

    @classmethod
    def from_degrees(cls, r_min, r_max, theta_min_deg, theta_max_deg) -> "SensingRegion":
        return cls(r_min, r_max, math.radians(theta_min_deg), math.radians(theta_max_deg))

    @property
    def r_mid(self) -> float:
        return (self.r_min + self.r_max) / 2

    def contains(self, p: PolarPoint) -> bool:
        return (
            self.r_min <= p.r <= self.r_max
            and self.theta_min <= p.theta <= self.theta_max
        )


@dataclass(frozen=True)
class SweepPlan:
    beamformer: BeamformerState
    label: str
    index: int = 0
    bs_id: str = "A"

    @cached_property
    def weights(self) -> np.ndarray:
        return weights_matrix(self.beamformer)


@dataclass(frozen=True)
class UserFeedback:
    peak_subcarrier_index: int
    peak_frequency: float
    peak_phase: float | None = None


@dataclass
class Estimate:
    theta_hat: float
    r_hat: float
    scheme: Scheme
    sweeps_used: int
    diagnostics: dict = field(default_factory=dict)
    flags: list[str] = field(default_factory=list)


# -- sweep plans ---------------------------------------------------------------


# plans are immutable; caching them lets repeated trials reuse their weights
@lru_cache(maxsize=4096)
def angle_plan(
    cfg: ArrayConfig,
    theta_max: float,
    theta_min: float,
    r_mid1: float,
    r_mid2: float,
    design_model: DistanceModel = "fresnel",
    label: str = "angle",
    index: int = 0,
    bs_id: str = "A",
) -> SweepPlan:
    bf = ttd_config(
        cfg, PolarPoint(r_mid1, theta_max), PolarPoint(r_mid2, theta_min), design_model
    )
    return SweepPlan(bf, label, index, bs_id)


@lru_cache(maxsize=4096)
def distance_plan(
    cfg: ArrayConfig,
    theta: float,
    r_min: float,
    r_max: float,
    design_model: DistanceModel = "fresnel",
    index: int = 0,
) -> SweepPlan:
    bf = ttd_config(cfg, PolarPoint(r_min, theta), PolarPoint(r_max, theta), design_model)
    return SweepPlan(bf, "distance", index)


def high_schedule(
    region: SensingRegion, P: int, pad: float = math.radians(0.5)
) -> list[tuple[float, float]]:
    """Default CBS-High ``(theta_max_p, theta_min_p)`` pairs, widened by ``pad`` per sweep."""
    return [
        (region.theta_max + p * pad, region.theta_min - p * pad) for p in range(P)
    ]


def angular_squint_step(cfg: ArrayConfig, theta_max: float, theta_min: float) -> float:
    """Largest angle gap between consecutive subcarriers of an angle sweep."""
    th = np.array([angle_from_peak(cfg, theta_max, theta_min, f) for f in cfg.frequencies])
    return float(np.max(np.abs(np.diff(th))))


def radial_squint_step(cfg: ArrayConfig, r_min: float, r_max: float) -> float:
    r = np.array([distance_from_peak(cfg, r_min, r_max, f) for f in cfg.frequencies])
    return float(np.max(np.abs(np.diff(r))))


# -- measurement primitives ----------------------------------------------------


def noiseless_sweep(
    cfg: ArrayConfig,
    plan: SweepPlan,
    user: PolarPoint,
    channel_model: DistanceModel = "exact",
    channel: np.ndarray | None = None,
) -> np.ndarray:
    H = channel_matrix(cfg, user, channel_model) if channel is None else channel
    # y_m = h_m^H w_m with an all-ones pilot
    return np.einsum("mn,mn->m", H.conj(), plan.weights)


def simulate_sweep(
    cfg: ArrayConfig,
    plan: SweepPlan,
    user: PolarPoint,
    snr: float = math.inf,
    rng: np.random.Generator | None = None,
    channel_model: DistanceModel = "exact",
    channel: np.ndarray | None = None,
) -> ReceivedSpectrum:
    """Raw received spectrum of one sweep at one user, noise added at ``snr``."""
    y = ReceivedSpectrum(noiseless_sweep(cfg, plan, user, channel_model, channel))
    if math.isinf(snr):
        return y
    if rng is None:
        raise ValueError("a seeded generator is required for finite snr")
    return add_awgn(y, snr, rng)


def process_spectrum(cfg: ArrayConfig, raw: ReceivedSpectrum) -> ReceivedSpectrum:
    """Scale sample ``m`` by ``4 pi sqrt(N) / lambda_m`` to undo the path loss."""
    if raw.rescaled:
        raise ValueError("spectrum is already rescaled")
    scale = 4 * math.pi * math.sqrt(cfg.N) * cfg.frequencies / SPEED_OF_LIGHT
    return ReceivedSpectrum(raw.samples * scale, True, dict(raw.meta))


def peak_subcarrier(spectrum: ReceivedSpectrum, cfg: ArrayConfig) -> UserFeedback:
    """Maximum-magnitude subcarrier (smallest index on ties) and its phase."""
    if len(spectrum) == 0:
        raise ValueError("empty spectrum")
    if len(spectrum) != cfg.M + 1:
        raise ValueError("spectrum length does not match the subcarrier grid")
    m = int(np.argmax(np.abs(spectrum.samples)))
    return UserFeedback(m, float(cfg.frequencies[m]), float(np.angle(spectrum.samples[m])))


def _check_feedback(cfg: ArrayConfig, f: float) -> None:
    half = cfg.spacing / 2
    if not cfg.f0 - half <= f <= cfg.fM + half:
        raise InvalidFeedback(f"peak frequency {f} Hz is outside the band")


def _endpoint_weights(cfg: ArrayConfig, f: float) -> tuple[float, float]:
    fb = f - cfg.f0
    return (cfg.W - fb) * cfg.f0 / (cfg.W * f), (cfg.W + cfg.f0) * fb / (cfg.W * f)


def peak_sin(cfg: ArrayConfig, theta_max: float, theta_min: float, f_peak: float) -> float:
    """Unclamped ``sin(theta_hat)`` for a peak at ``f_peak``."""
    _check_feedback(cfg, f_peak)
    a, b = _endpoint_weights(cfg, f_peak)
    return a * math.sin(theta_max) + b * math.sin(theta_min)


def angle_from_peak(
    cfg: ArrayConfig, theta_max: float, theta_min: float, f_peak: float
) -> float:
    s = peak_sin(cfg, theta_max, theta_min, f_peak)
    return math.asin(min(1.0, max(-1.0, s)))


def distance_from_peak(
    cfg: ArrayConfig, r_min: float, r_max: float, f_peak: float
) -> float:
    """Invert a radial sweep; the cos^2 factors cancel when both foci share an angle."""
    _check_feedback(cfg, f_peak)
    a, b = _endpoint_weights(cfg, f_peak)
    inv_r = a / r_min + b / r_max
    if not inv_r > 0:
        raise NonPositiveDistance(f"1/r = {inv_r} for peak at {f_peak} Hz")
    return 1 / inv_r


def _measure(cfg, plan, user, snr, rng, channel_model, channel) -> UserFeedback:
    raw = simulate_sweep(cfg, plan, user, snr, rng, channel_model, channel)
    return peak_subcarrier(process_spectrum(cfg, raw), cfg)


def _angle_with_flags(cfg, theta_max, theta_min, f, flags) -> float:
    s = peak_sin(cfg, theta_max, theta_min, f)
    if abs(s) > 1:
        flags.append("clamped")
    return angle_from_peak(cfg, theta_max, theta_min, f)


# -- TBT baseline --------------------------------------------------------------


def _codebook_scores(
    H: np.ndarray, codebook: np.ndarray, snr: float, rng: np.random.Generator | None
) -> np.ndarray:
    """Sum over subcarriers of ``|h_m^H w_i + n|`` for every codeword ``i``."""
    y = H.conj() @ codebook.T  # (M+1, I)
    if not math.isinf(snr):
        sigma = np.sqrt(np.mean(np.abs(y) ** 2, axis=0) / snr / 2)
        y = y + sigma * (rng.standard_normal(y.shape) + 1j * rng.standard_normal(y.shape))
    return np.abs(y).sum(axis=0)


def tbt_localize(
    cfg: ArrayConfig,
    users: Sequence[PolarPoint],
    region: SensingRegion,
    I_a: int,
    I_d: int,
    snr: float = math.inf,
    rng: np.random.Generator | None = None,
    r_a: float | None = None,
    channel_model: DistanceModel = "exact",
    design_model: DistanceModel = "fresnel",
) -> list[Estimate]:
    """Beam-training baseline; ``I_a`` angle sweeps are shared by all users."""
    if I_a < 2 or I_d < 2:
        raise ValueError("need I_a, I_d >= 2")
    if not math.isinf(snr) and rng is None:
        raise ValueError("a seeded generator is required for finite snr")
    r_a = region.r_mid if r_a is None else r_a
    thetas = np.linspace(region.theta_min, region.theta_max, I_a)
    radii = np.linspace(region.r_min, region.r_max, I_d)
    angle_cb = np.array([ps_weights(cfg, PolarPoint(r_a, t), design_model) for t in thetas])
    total = I_a + len(users) * I_d
    out = []
    for user in users:
        H = channel_matrix(cfg, user, channel_model)
        i_a = int(np.argmax(_codebook_scores(H, angle_cb, snr, rng)))
        theta_hat = float(thetas[i_a])
        dist_cb = np.array(
            [ps_weights(cfg, PolarPoint(r, theta_hat), design_model) for r in radii]
        )
        i_d = int(np.argmax(_codebook_scores(H, dist_cb, snr, rng)))
        out.append(
            Estimate(
                theta_hat,
                float(radii[i_d]),
                Scheme.TBT,
                total,
                {"angle_index": i_a, "distance_index": i_d},
            )
        )
    return out


# -- CBS-Low -------------------------------------------------------------------


def group_angles(thetas: Sequence[float], tol: float) -> list[list[int]]:
    """Cluster sorted angle estimates whose neighbours lie within ``tol``."""
    order = sorted(range(len(thetas)), key=lambda k: thetas[k])
    groups: list[list[int]] = []
    for k in order:
        if groups and thetas[k] - thetas[groups[-1][-1]] <= tol:
            groups[-1].append(k)
        else:
            groups.append([k])
    return groups


def cbs_low_localize(
    cfg: ArrayConfig,
    users: Sequence[PolarPoint],
    region: SensingRegion,
    snr: float = math.inf,
    rng: np.random.Generator | None = None,
    r_mid1: float | None = None,
    r_mid2: float | None = None,
    channel_model: DistanceModel = "exact",
    design_model: DistanceModel = "fresnel",
    channels: Sequence[np.ndarray] | None = None,
) -> list[Estimate]:
    r_mid1 = region.r_mid if r_mid1 is None else r_mid1
    r_mid2 = region.r_mid if r_mid2 is None else r_mid2
    if channels is None:
        channels = [channel_matrix(cfg, u, channel_model) for u in users]
    plan = angle_plan(cfg, region.theta_max, region.theta_min, r_mid1, r_mid2, design_model)

    flags: list[list[str]] = [[] for _ in users]
    fb_angle, thetas = [], []
    for k, user in enumerate(users):
        fb = _measure(cfg, plan, user, snr, rng, channel_model, channels[k])
        fb_angle.append(fb)
        thetas.append(
            _angle_with_flags(cfg, region.theta_max, region.theta_min, fb.peak_frequency, flags[k])
        )

    tol = 0.5 * (region.theta_max - region.theta_min) / cfg.M
    groups = group_angles(thetas, tol)
    sweeps = 1 + len(groups)
    out: list[Estimate | None] = [None] * len(users)
    for g, members in enumerate(groups):
        theta_g = float(np.mean([thetas[k] for k in members]))
        dplan = distance_plan(cfg, theta_g, region.r_min, region.r_max, design_model, g)
        for k in members:
            fb = _measure(cfg, dplan, users[k], snr, rng, channel_model, channels[k])
            r_hat = distance_from_peak(cfg, region.r_min, region.r_max, fb.peak_frequency)
            out[k] = Estimate(
                theta_g,
                r_hat,
                Scheme.CBS_LOW,
                sweeps,
                {"angle_feedback": fb_angle[k], "distance_feedback": fb, "group": g},
                flags[k],
            )
    return out


# -- CBS-High ------------------------------------------------------------------


def theoretical_peak_phase(
    cfg: ArrayConfig,
    r: np.ndarray,
    f_peak: float,
    theta_hat: float,
    theta_max_p: float,
    theta_min_p: float,
    r_mid1: float,
    r_mid2: float,
    delay_offset: float = 0.0,
) -> np.ndarray:
    """Model phase of the rescaled peak sample for a user at distance ``r``.

    The linear-in-n term vanishes because ``theta_hat`` was itself obtained
    from ``f_peak``; the constant and quadratic terms are kept.
    """
    c, W, f0, fM = SPEED_OF_LIGHT, cfg.W, cfg.f0, cfg.fM
    r = np.asarray(r, dtype=float)
    fb = f_peak - f0
    # constant term in cycles, reduced before use to keep precision
    cyc0 = (W * f_peak * r - (W - fb) * f0 * r_mid1 - fb * fM * r_mid2) / (W * c)
    cyc0 = np.mod(cyc0 - fb * delay_offset, 1.0)
    xi2 = (2 * math.pi * cfg.d**2 / (W * c)) * (
        W * f_peak * math.cos(theta_hat) ** 2 / (2 * r)
        - (W - fb) * f0 * math.cos(theta_max_p) ** 2 / (2 * r_mid1)
        - fb * fM * math.cos(theta_min_p) ** 2 / (2 * r_mid2)
    )
    n2 = cfg.indices**2
    s = np.exp(1j * np.outer(xi2, n2)).sum(axis=1)
    return np.angle(np.exp(2j * math.pi * cyc0) * s)


def phase_objective(
    r: np.ndarray,
    measured: Sequence[float],
    theory,
) -> np.ndarray:
    """``L(r) = |sum_p exp(j (measured_p - theory_p(r)))|`` for a list of callables."""
    acc = 0
    for phi, th in zip(measured, theory):
        acc = acc + np.exp(1j * (phi - th(r)))
    return np.abs(acc)


def _local_maxima(v: np.ndarray) -> np.ndarray:
    padded = np.concatenate(([-np.inf], v, [-np.inf]))
    mid = padded[1:-1]
    return np.flatnonzero((mid >= padded[:-2]) & (mid > padded[2:]))


def cbs_high_localize(
    cfg: ArrayConfig,
    user: PolarPoint,
    region: SensingRegion,
    P: int,
    snr: float = math.inf,
    rng: np.random.Generator | None = None,
    r_mid1: float | None = None,
    r_mid2: float | None = None,
    schedule: Sequence[tuple[float, float]] | None = None,
    pad: float = math.radians(0.5),
    n_grid: int = 1024,
    xatol: float = 1e-5,
    ambiguity_ratio: float = 0.99,
    channel_model: DistanceModel = "exact",
    channel: np.ndarray | None = None,
) -> Estimate:
    if P < 2:
        raise ValueError("CBS-High needs at least two sweeps")
    r_mid1 = region.r_mid if r_mid1 is None else r_mid1
    r_mid2 = region.r_mid if r_mid2 is None else r_mid2
    schedule = high_schedule(region, P, pad) if schedule is None else list(schedule)
    _check_schedule(schedule, region, P)
    if channel is None:
        channel = channel_matrix(cfg, user, channel_model)

    flags: list[str] = []
    feedback, thetas, theory = [], [], []
    for p, (t_max, t_min) in enumerate(schedule):
        plan = angle_plan(cfg, t_max, t_min, r_mid1, r_mid2, "fresnel", "high", p)
        fb = _measure(cfg, plan, user, snr, rng, channel_model, channel)
        th = _angle_with_flags(cfg, t_max, t_min, fb.peak_frequency, flags)
        feedback.append(fb)
        thetas.append(th)
        theory.append(
            _bind_theory(cfg, fb.peak_frequency, th, t_max, t_min, r_mid1, r_mid2,
                         plan.beamformer.delay_offset)
        )
    theta_hat = float(np.mean(thetas))
    measured = [fb.peak_phase for fb in feedback]

    grid = np.linspace(region.r_min, region.r_max, n_grid)
    L = phase_objective(grid, measured, theory)
    peaks = _local_maxima(L)
    ranked = peaks[np.argsort(-L[peaks], kind="stable")]
    if len(ranked) > 1 and L[ranked[1]] >= ambiguity_ratio * L[ranked[0]]:
        raise AmbiguousDistance(
            f"L(r) peaks at {grid[ranked[0]]:.3f} m and {grid[ranked[1]]:.3f} m "
            f"are within {100 * (1 - ambiguity_ratio):.0f}%"
        )
    i = int(ranked[0])
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, n_grid - 1)]
    res = minimize_scalar(
        lambda r: -phase_objective(np.array([r]), measured, theory)[0],
        bounds=(lo, hi),
        method="bounded",
        options={"xatol": xatol},
    )
    r_hat, L_hat = float(res.x), float(-res.fun)
    if L_hat < L[i]:
        r_hat, L_hat = float(grid[i]), float(L[i])
    return Estimate(
        theta_hat,
        r_hat,
        Scheme.CBS_HIGH,
        P,
        {"feedback": feedback, "theta_per_sweep": thetas, "L_peak": L_hat},
        flags,
    )


def _bind_theory(cfg, f, th, t_max, t_min, r_mid1, r_mid2, delay_offset):
    return lambda r: theoretical_peak_phase(
        cfg, r, f, th, t_max, t_min, r_mid1, r_mid2, delay_offset
    )


def _check_schedule(schedule, region: SensingRegion, P: int) -> None:
    if len(schedule) != P:
        raise ValueError("schedule length must equal P")
    t_max = [s[0] for s in schedule]
    t_min = [s[1] for s in schedule]
    if min(t_max) < region.theta_max or max(t_min) > region.theta_min:
        raise ValueError("every sweep must cover the sensing angle range")
    if len(set(t_max)) != P or len(set(t_min)) != P:
        raise ValueError("sweep end angles must be pairwise distinct")
    if max(t_max) >= math.pi / 2 or min(t_min) <= -math.pi / 2:
        raise ValueError("schedule leaves the front half-plane")


# -- CBS-2BS -------------------------------------------------------------------


def triangulate(L: float, theta_a: float, theta_b: float, eps: float = 1e-9) -> float:
    """Main-array distance from the two arrays' angles.

    The auxiliary array at ``(L, 0)`` faces the main one, so its broadside
    points along -x and ``cos(theta_b)`` measures distance toward the main
    array.
    """
    if L <= 0:
        raise ValueError("baseline must be positive")
    if abs(theta_a) < eps or abs(theta_b) < eps:
        raise DegenerateGeometry("user lies on the baseline axis")
    r = L / (math.cos(theta_a) + math.sin(theta_a) / math.tan(theta_b))
    if not r > 0:
        raise DegenerateGeometry(f"non-positive distance {r}")
    return r


def cbs_2bs_localize(
    cfg: ArrayConfig,
    L: float,
    feedback_a: UserFeedback,
    feedback_b: UserFeedback,
    endpoints_a: tuple[float, float],
    endpoints_b: tuple[float, float],
    eps: float | None = None,
) -> Estimate:
    """Combine the two arrays' peak feedback; endpoints are ``(theta_max, theta_min)``.

    ``eps`` defaults to half the larger angular squint step of the two
    sweeps: below that an angle cannot be told apart from zero.
    """
    flags: list[str] = []
    th_a = _angle_with_flags(cfg, *endpoints_a, feedback_a.peak_frequency, flags)
    th_b = _angle_with_flags(cfg, *endpoints_b, feedback_b.peak_frequency, flags)
    if eps is None:
        eps = 0.5 * max(angular_squint_step(cfg, *endpoints_a),
                        angular_squint_step(cfg, *endpoints_b))
    r_hat = triangulate(L, th_a, th_b, eps)
    return Estimate(
        th_a,
        r_hat,
        Scheme.CBS_2BS,
        2,
        {"theta_a": th_a, "theta_b": th_b, "feedback_a": feedback_a, "feedback_b": feedback_b},
        flags,
    )


def auxiliary_view(L: float, user: CartesianPoint) -> PolarPoint:
    """User position in the auxiliary array's own (mirrored) frame."""
    return PolarPoint(math.hypot(L - user.x, user.y), math.atan2(user.y, L - user.x))


def cbs_2bs_simulate(
    cfg: ArrayConfig,
    L: float,
    user: CartesianPoint,
    region: SensingRegion,
    snr: float = math.inf,
    rng: np.random.Generator | None = None,
    r_mid1: float | None = None,
    r_mid2: float | None = None,
    channel_model: DistanceModel = "exact",
    eps: float | None = None,
    channels: tuple[np.ndarray, np.ndarray] | None = None,
) -> Estimate:
    """Run both arrays' angle sweeps for ``user`` and triangulate."""
    r_mid1 = region.r_mid if r_mid1 is None else r_mid1
    r_mid2 = region.r_mid if r_mid2 is None else r_mid2
    ends = (region.theta_max, region.theta_min)
    view_a = PolarPoint(math.hypot(user.x, user.y), math.atan2(user.y, user.x))
    view_b = auxiliary_view(L, user)
    ch_a, ch_b = channels if channels is not None else (None, None)
    plan_a = angle_plan(cfg, *ends, r_mid1, r_mid2, bs_id="A")
    plan_b = angle_plan(cfg, *ends, r_mid1, r_mid2, bs_id="B")
    fb_a = _measure(cfg, plan_a, view_a, snr, rng, channel_model, ch_a)
    fb_b = _measure(cfg, plan_b, view_b, snr, rng, channel_model, ch_b)
    return cbs_2bs_localize(cfg, L, fb_a, fb_b, ends, ends, eps)
