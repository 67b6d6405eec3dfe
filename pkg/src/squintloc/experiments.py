"""Monte-Carlo RMSE harness and beam-sweep overhead accounting.

Every ``(snr index, trial)`` cell draws from its own generator,
``SeedSequence(seed, spawn_key=(snr_index, trial))``, so results do not
depend on how cells are scheduled across threads.
"""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .channel import ArrayConfig, channel_matrix, db_to_linear
from .geometry import CartesianPoint, PolarPoint, polar_to_cartesian
from .localization import (
    Estimate,
    Scheme,
    SensingRegion,
    auxiliary_view,
    cbs_2bs_simulate,
    cbs_high_localize,
    cbs_low_localize,
    tbt_localize,
)

THREADS_ENV = "SQUINTLOC_THREADS"


@dataclass
class ExperimentSpec:
    scheme: Scheme
    cfg: ArrayConfig
    users: list  # PolarPoint, or CartesianPoint for CBS-2BS
    snr_grid_db: list[float]
    trials: int
    seed: int
    region: SensingRegion
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        self.scheme = Scheme(self.scheme)
        if self.trials < 1:
            raise ValueError("need at least one trial")
        if not self.users:
            raise ValueError("need at least one user")
        if not self.snr_grid_db:
            raise ValueError("need at least one SNR point")


@dataclass
class TrialRecord:
    trial: int
    snr_db: float
    user_id: int
    truth: PolarPoint
    estimate: Estimate | None
    error: str | None = None
    wall_time: float = 0.0

    @property
    def ok(self) -> bool:
        return self.estimate is not None

    @property
    def theta_error(self) -> float:
        return self.estimate.theta_hat - self.truth.theta

    @property
    def r_error(self) -> float:
        return self.estimate.r_hat - self.truth.r

    @property
    def xy_error(self) -> tuple[float, float]:
        t = polar_to_cartesian(self.truth)
        e = self.estimate
        return e.r_hat * math.cos(e.theta_hat) - t.x, e.r_hat * math.sin(e.theta_hat) - t.y


@dataclass
class CellResult:
    snr_db: float
    user_id: int
    rmse_theta: float  # radians
    rmse_r: float
    rmse_2d: float
    se_theta: float
    se_r: float
    se_2d: float
    mean_sweeps: float
    excluded: int
    records: list[TrialRecord] = field(repr=False, default_factory=list)


def _squared_errors(records: Sequence[TrialRecord], kind: str) -> np.ndarray:
    if kind == "theta":
        return np.array([rec.theta_error**2 for rec in records])
    if kind == "r":
        return np.array([rec.r_error**2 for rec in records])
    if kind == "2d":
        return np.array([sum(v**2 for v in rec.xy_error) for rec in records])
    raise ValueError(f"unknown RMSE kind {kind!r}")


def rmse(records: Sequence[TrialRecord], kind: str) -> float:
    """Root-mean-square error of one ``(user, snr)`` cell; ``kind`` in theta/r/2d."""
    records = [rec for rec in records if rec.ok]
    if not records:
        raise ValueError("no successful trials in cell")
    return float(math.sqrt(np.mean(_squared_errors(records, kind))))


def rmse_standard_error(records: Sequence[TrialRecord], kind: str) -> float:
    """Delta-method standard error of the RMSE."""
    records = [rec for rec in records if rec.ok]
    sq = _squared_errors(records, kind)
    value = math.sqrt(sq.mean())
    if len(sq) < 2 or value == 0:
        return 0.0
    return float(sq.std(ddof=1) / math.sqrt(len(sq)) / (2 * value))


def sweep_count(
    scheme: Scheme | str,
    K: int,
    M: int | None = None,
    I_a: int | None = None,
    I_d: int | None = None,
    P: int | None = None,
) -> int:
    """Beam sweeps needed to localize ``K`` users.

    For TBT, ``I_a``/``I_d`` default to ``M + 1`` (matched scan spacing).
    CBS-Low assumes all users have distinct angles.
    """
    scheme = Scheme(scheme)
    if scheme is Scheme.TBT:
        if I_a is None or I_d is None:
            if M is None:
                raise ValueError("TBT needs I_a and I_d, or M")
            I_a = M + 1 if I_a is None else I_a
            I_d = M + 1 if I_d is None else I_d
        return I_a + K * I_d
    if scheme is Scheme.CBS_LOW:
        return K + 1
    if scheme is Scheme.CBS_HIGH:
        if P is None:
            raise ValueError("CBS-High needs P")
        return P
    return 2


def sweep_savings(K: int, M: int) -> float:
    """Fraction of TBT sweeps saved by CBS-Low with ``I_a = I_d = M + 1``."""
    return 1 - sweep_count(Scheme.CBS_LOW, K) / sweep_count(Scheme.TBT, K, M=M)


def thread_count() -> int:
    raw = os.environ.get(THREADS_ENV, "0").strip() or "0"
    n = int(raw)
    if n < 0:
        raise ValueError(f"{THREADS_ENV} must be >= 0")
    return n or (os.cpu_count() or 1)


def _truth(spec: ExperimentSpec, user) -> PolarPoint:
    if isinstance(user, CartesianPoint):
        return PolarPoint(math.hypot(user.x, user.y), math.atan2(user.y, user.x))
    return user


class _Runner:
    """Holds per-user channel matrices so trials only redraw noise."""

    def __init__(self, spec: ExperimentSpec):
        self.spec = spec
        p = spec.params
        self.channel_model = p.get("channel_model", "exact")
        cfg = spec.cfg
        if spec.scheme is Scheme.CBS_2BS:
            L = p["L"]
            self.channels = [
                (channel_matrix(cfg, _truth(spec, u), self.channel_model),
                 channel_matrix(cfg, auxiliary_view(L, u), self.channel_model))
                for u in spec.users
            ]
        elif spec.scheme is not Scheme.TBT:
            self.channels = [channel_matrix(cfg, u, self.channel_model) for u in spec.users]

    def run_cell(self, snr_index: int, trial: int) -> list[TrialRecord]:
        spec, p = self.spec, self.spec.params
        snr_db = spec.snr_grid_db[snr_index]
        snr = db_to_linear(snr_db)
        rng = np.random.default_rng(np.random.SeedSequence(spec.seed, spawn_key=(snr_index, trial)))
        truths = [_truth(spec, u) for u in spec.users]
        t0 = time.perf_counter()
        common = dict(snr=snr, rng=rng, channel_model=self.channel_model)
        r_mid = dict(r_mid1=p.get("r_mid1"), r_mid2=p.get("r_mid2"))

        if spec.scheme in (Scheme.TBT, Scheme.CBS_LOW):
            try:
                if spec.scheme is Scheme.TBT:
                    ests = tbt_localize(
                        spec.cfg, spec.users, spec.region,
                        p.get("I_a", spec.cfg.M + 1), p.get("I_d", spec.cfg.M + 1),
                        r_a=p.get("r_a"), **common,
                    )
                else:
                    ests = cbs_low_localize(
                        spec.cfg, spec.users, spec.region, channels=self.channels,
                        **r_mid, **common,
                    )
                errs = [None] * len(ests)
            except (ValueError, RuntimeError) as exc:
                ests, errs = [None] * len(truths), [f"{type(exc).__name__}: {exc}"] * len(truths)
            dt = time.perf_counter() - t0
            return [
                TrialRecord(trial, snr_db, k, truths[k], ests[k], errs[k], dt)
                for k in range(len(truths))
            ]

        out = []
        for k, user in enumerate(spec.users):
            t0 = time.perf_counter()
            try:
                if spec.scheme is Scheme.CBS_HIGH:
                    est = cbs_high_localize(
                        spec.cfg, user, spec.region, p["P"],
                        pad=p.get("pad", math.radians(0.5)),
                        n_grid=p.get("n_grid", 1024),
                        channel=self.channels[k], **r_mid, **common,
                    )
                else:
                    est = cbs_2bs_simulate(
                        spec.cfg, p["L"], user, spec.region,
                        channels=self.channels[k], **r_mid, **common,
                    )
                err = None
            except (ValueError, RuntimeError) as exc:
                est, err = None, f"{type(exc).__name__}: {exc}"
            out.append(TrialRecord(trial, snr_db, k, truths[k], est, err,
                                   time.perf_counter() - t0))
        return out


def run_experiment(spec: ExperimentSpec, threads: int | None = None) -> list[CellResult]:
    """Aggregate RMSE per ``(snr, user)`` cell, ordered by snr then user."""
    runner = _Runner(spec)
    cells = [(s, t) for s in range(len(spec.snr_grid_db)) for t in range(spec.trials)]
    threads = thread_count() if threads is None else threads
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda c: runner.run_cell(*c), cells))
    else:
        results = [runner.run_cell(*c) for c in cells]

    by_cell: dict[tuple[int, int], list[TrialRecord]] = {}
    for (s, _), recs in zip(cells, results):
        for rec in recs:
            by_cell.setdefault((s, rec.user_id), []).append(rec)

    table = []
    for s, snr_db in enumerate(spec.snr_grid_db):
        for k in range(len(spec.users)):
            recs = by_cell[(s, k)]
            good = [rec for rec in recs if rec.ok]
            excluded = len(recs) - len(good)
            if good:
                vals = [rmse(good, kind) for kind in ("theta", "r", "2d")]
                ses = [rmse_standard_error(good, kind) for kind in ("theta", "r", "2d")]
                sweeps = float(np.mean([rec.estimate.sweeps_used for rec in good]))
            else:
                vals, ses, sweeps = [math.nan] * 3, [math.nan] * 3, math.nan
            table.append(CellResult(snr_db, k, *vals, *ses, sweeps, excluded, recs))
    return table
