"""``squintloc`` command line: trajectory, spectrum, localize, experiment.

Each subcommand reads a flat ``key = value`` config (``#`` comments, units in
the key names) and writes CSV with LF line endings and 17 significant
digits. Exit codes: 0 success, 2 config error, 3 scheme error.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import math
import sys
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .beamforming import (
    SearchGrid,
    brute_force_squint_point,
    natural_squint_point,
    ps_state,
    trajectory,
    ttd_config,
)
from .channel import ArrayConfig, db_to_linear
from .experiments import ExperimentSpec, run_experiment
from .geometry import CartesianPoint, PolarPoint, polar_to_cartesian
from .localization import (
    Scheme,
    SensingRegion,
    SweepPlan,
    cbs_2bs_simulate,
    cbs_high_localize,
    cbs_low_localize,
    process_spectrum,
    simulate_sweep,
    tbt_localize,
)

EXIT_OK, EXIT_CONFIG, EXIT_SCHEME = 0, 2, 3

KEYS = {
    # array and OFDM grid
    "n_antennas", "f0_ghz", "w_ghz", "m_intervals", "d_m",
    # beamformer foci
    "start_r_m", "start_theta_deg", "end_r_m", "end_theta_deg", "design_model",
    # users
    "users_r_m", "users_theta_deg", "users_x_m", "users_y_m",
    # schemes
    "scheme", "r_min_m", "r_max_m", "theta_min_deg", "theta_max_deg",
    "r_mid1_m", "r_mid2_m", "p_sweeps", "pad_deg", "n_grid", "i_a", "i_d",
    "r_a_m", "baseline_m", "channel_model",
    # noise and experiments
    "seed", "snr_db", "snr_db_list", "trials",
    # brute-force oracle grid
    "grid_r_min_m", "grid_r_max_m", "grid_dr_m",
    "grid_theta_min_deg", "grid_theta_max_deg", "grid_dtheta_deg",
    "output",
}

TRAJECTORY_HEADER = ["m", "f_hz", "r_m", "theta_deg"]
ORACLE_COLUMNS = ["oracle_r_m", "oracle_theta_deg"]
SPECTRUM_HEADER = ["user_id", "m", "f_hz", "power", "power_normalized", "phase_rad"]
LOCALIZE_HEADER = [
    "user_id", "scheme", "theta_true_deg", "r_true_m",
    "theta_hat_deg", "r_hat_m", "sweeps", "flags",
]
EXPERIMENT_HEADER = [
    "snr_db", "user_id", "rmse_theta_deg", "rmse_r_m", "rmse_2d_m",
    "mean_sweeps", "excluded_trials",
]


class ConfigError(ValueError):
    pass


class RunConfig:
    """Validated view of a flat config document."""

    def __init__(self, values: dict[str, str]):
        unknown = sorted(set(values) - KEYS)
        if unknown:
            raise ConfigError(f"unknown key(s): {', '.join(unknown)}")
        self.values = values

    @classmethod
    def parse(cls, text: str) -> "RunConfig":
        parser = configparser.ConfigParser(
            delimiters=("=",), comment_prefixes=("#",), inline_comment_prefixes=("#",),
            interpolation=None,
        )
        try:
            parser.read_string("[run]\n" + text)
        except configparser.Error as exc:
            raise ConfigError(str(exc).splitlines()[0]) from None
        return cls(dict(parser["run"]))

    @classmethod
    def load(cls, path: str) -> "RunConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                return cls.parse(fh.read())
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None

    def has(self, key: str) -> bool:
        return key in self.values

    def _get(self, key: str, conv: Callable, default=None, required: bool = False):
        if key not in self.values:
            if required:
                raise ConfigError(f"missing required key {key!r}")
            return default
        raw = self.values[key].strip()
        try:
            return conv(raw)
        except ValueError:
            raise ConfigError(f"bad value for {key!r}: {raw!r}") from None

    def get_float(self, key, default=None, required=False) -> float:
        return self._get(key, float, default, required)

    def get_int(self, key, default=None, required=False) -> int:
        return self._get(key, int, default, required)

    def get_str(self, key, default=None, required=False) -> str:
        return self._get(key, str, default, required)

    def get_floats(self, key, required=False) -> list[float] | None:
        conv = lambda s: [float(v) for v in s.split(",") if v.strip()]
        return self._get(key, conv, None, required)

    # -- composite objects -----------------------------------------------------

    def array(self) -> ArrayConfig:
        return ArrayConfig(
            self.get_int("n_antennas", 128),
            self.get_float("f0_ghz", required=True) * 1e9,
            self.get_float("w_ghz", required=True) * 1e9,
            self.get_int("m_intervals", 511),
            self.get_float("d_m"),
        )

    def seed(self) -> int:
        seed = self.get_int("seed", required=True)
        if seed < 0:
            raise ConfigError("seed must be non-negative")
        return seed

    def focus(self, prefix: str, required: bool) -> PolarPoint | None:
        r = self.get_float(f"{prefix}_r_m", required=required)
        t = self.get_float(f"{prefix}_theta_deg", required=required)
        if r is None and t is None:
            return None
        if r is None or t is None:
            raise ConfigError(f"{prefix}_r_m and {prefix}_theta_deg go together")
        return PolarPoint.from_degrees(r, t)

    def users(self) -> list[PolarPoint | CartesianPoint]:
        if self.has("users_x_m") or self.has("users_y_m"):
            xs, ys = self.get_floats("users_x_m", True), self.get_floats("users_y_m", True)
            if len(xs) != len(ys) or not xs:
                raise ConfigError("users_x_m and users_y_m must be equal-length lists")
            return [CartesianPoint(x, y) for x, y in zip(xs, ys)]
        rs, ts = self.get_floats("users_r_m", True), self.get_floats("users_theta_deg", True)
        if len(rs) != len(ts) or not rs:
            raise ConfigError("users_r_m and users_theta_deg must be equal-length lists")
        return [PolarPoint.from_degrees(r, t) for r, t in zip(rs, ts)]

    def region(self) -> SensingRegion:
        return SensingRegion.from_degrees(
            self.get_float("r_min_m", required=True),
            self.get_float("r_max_m", required=True),
            self.get_float("theta_min_deg", required=True),
            self.get_float("theta_max_deg", required=True),
        )

    def scheme(self) -> Scheme:
        raw = self.get_str("scheme", required=True)
        try:
            return Scheme(raw.lower())
        except ValueError:
            names = ", ".join(s.value for s in Scheme)
            raise ConfigError(f"unknown scheme {raw!r} (expected one of {names})") from None

    def model(self, key: str, default: str) -> str:
        value = self.get_str(key, default)
        if value not in ("exact", "fresnel"):
            raise ConfigError(f"{key} must be 'exact' or 'fresnel'")
        return value

    def grid(self) -> SearchGrid:
        g = SearchGrid.standard()
        return SearchGrid(
            self.get_float("grid_r_min_m", g.r_min),
            self.get_float("grid_r_max_m", g.r_max),
            self.get_float("grid_dr_m", g.dr),
            math.radians(self.get_float("grid_theta_min_deg", math.degrees(g.theta_min))),
            math.radians(self.get_float("grid_theta_max_deg", math.degrees(g.theta_max))),
            math.radians(self.get_float("grid_dtheta_deg", math.degrees(g.dtheta))),
        )

    def scheme_params(self, cfg: ArrayConfig) -> dict:
        p = {"channel_model": self.model("channel_model", "exact")}
        optional = {
            "P": ("p_sweeps", self.get_int),
            "pad": ("pad_deg", lambda k: _radians(self.get_float(k))),
            "n_grid": ("n_grid", self.get_int),
            "I_a": ("i_a", self.get_int),
            "I_d": ("i_d", self.get_int),
            "r_a": ("r_a_m", self.get_float),
            "r_mid1": ("r_mid1_m", self.get_float),
            "r_mid2": ("r_mid2_m", self.get_float),
            "L": ("baseline_m", self.get_float),
        }
        for name, (key, getter) in optional.items():
            if self.has(key):
                p[name] = getter(key)
        return p


def _radians(deg: float | None) -> float | None:
    return None if deg is None else math.radians(deg)


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def _write_csv(header: Sequence[str], rows, out) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])


def _polar(user) -> PolarPoint:
    if isinstance(user, CartesianPoint):
        return PolarPoint(math.hypot(user.x, user.y), math.atan2(user.y, user.x))
    return user


def _snr(rc: RunConfig) -> float:
    return db_to_linear(rc.get_float("snr_db", math.inf))


# -- subcommands ---------------------------------------------------------------


@dataclass
class Prepared:
    header: list[str]
    run: Callable[[], list[list]]


def prepare_trajectory(rc: RunConfig, oracle: bool) -> Prepared:
    cfg = rc.array()
    start = rc.focus("start", required=True)
    end = rc.focus("end", required=False)
    model = rc.model("design_model", "fresnel")
    grid = rc.grid() if oracle else None
    state = ps_state(cfg, start, model) if end is None else ttd_config(cfg, start, end, model)

    def run():
        if end is None:
            points = [natural_squint_point(cfg, start, m) for m in range(cfg.M + 1)]
        else:
            points = trajectory(state)
        rows = []
        for sp in points:
            row = [sp.m, sp.f, sp.point.r, sp.point.theta_deg]
            if grid is not None:
                bf = brute_force_squint_point(state, sp.m, grid, model).point
                row += [bf.r, bf.theta_deg]
            rows.append(row)
        return rows

    return Prepared(TRAJECTORY_HEADER + (ORACLE_COLUMNS if oracle else []), run)


def prepare_spectrum(rc: RunConfig, oracle: bool) -> Prepared:
    cfg = rc.array()
    start = rc.focus("start", required=True)
    end = rc.focus("end", required=False)
    model = rc.model("design_model", "fresnel")
    channel_model = rc.model("channel_model", "exact")
    users = [_polar(u) for u in rc.users()]
    snr, seed = _snr(rc), rc.seed()
    state = ps_state(cfg, start, model) if end is None else ttd_config(cfg, start, end, model)
    plan = SweepPlan(state, "spectrum")

    def run():
        rng = np.random.default_rng(seed)
        rows = []
        for k, user in enumerate(users):
            raw = simulate_sweep(cfg, plan, user, snr, rng, channel_model)
            y = process_spectrum(cfg, raw).samples
            power = np.abs(y)
            norm = power / power.max()
            for m in range(cfg.M + 1):
                rows.append([k, m, cfg.frequencies[m], power[m], norm[m], float(np.angle(y[m]))])
        return rows

    return Prepared(SPECTRUM_HEADER, run)


def prepare_localize(rc: RunConfig, oracle: bool) -> Prepared:
    cfg = rc.array()
    scheme = rc.scheme()
    region = rc.region()
    users = rc.users()
    params = rc.scheme_params(cfg)
    snr, seed = _snr(rc), rc.seed()
    if scheme is Scheme.CBS_HIGH and "P" not in params:
        raise ConfigError("cbs_high needs p_sweeps")
    if scheme is Scheme.CBS_2BS:
        if "L" not in params:
            raise ConfigError("cbs_2bs needs baseline_m")
        users = [polar_to_cartesian(u) if isinstance(u, PolarPoint) else u for u in users]
    polar = [_polar(u) for u in users]
    cm = params["channel_model"]
    mids = dict(r_mid1=params.get("r_mid1"), r_mid2=params.get("r_mid2"))

    def run():
        rng = np.random.default_rng(seed)
        if scheme is Scheme.TBT:
            ests = tbt_localize(
                cfg, polar, region, params.get("I_a", cfg.M + 1), params.get("I_d", cfg.M + 1),
                snr, rng, params.get("r_a"), cm,
            )
        elif scheme is Scheme.CBS_LOW:
            ests = cbs_low_localize(cfg, polar, region, snr, rng, channel_model=cm, **mids)
        elif scheme is Scheme.CBS_HIGH:
            kw = {k: params[k] for k in ("pad", "n_grid") if k in params}
            ests = [
                cbs_high_localize(cfg, u, region, params["P"], snr, rng,
                                  channel_model=cm, **mids, **kw)
                for u in polar
            ]
        else:
            ests = [
                cbs_2bs_simulate(cfg, params["L"], u, region, snr, rng, channel_model=cm, **mids)
                for u in users
            ]
        return [
            [k, scheme.value, truth.theta_deg, truth.r,
             math.degrees(e.theta_hat), e.r_hat, e.sweeps_used, ";".join(e.flags)]
            for k, (truth, e) in enumerate(zip(polar, ests))
        ]

    return Prepared(LOCALIZE_HEADER, run)


def prepare_experiment(rc: RunConfig, oracle: bool) -> Prepared:
    cfg = rc.array()
    scheme = rc.scheme()
    users = rc.users()
    params = rc.scheme_params(cfg)
    if scheme is Scheme.CBS_2BS:
        if "L" not in params:
            raise ConfigError("cbs_2bs needs baseline_m")
        users = [polar_to_cartesian(u) if isinstance(u, PolarPoint) else u for u in users]
    else:
        users = [_polar(u) for u in users]
    if scheme is Scheme.CBS_HIGH and "P" not in params:
        raise ConfigError("cbs_high needs p_sweeps")
    snrs = rc.get_floats("snr_db_list") or [rc.get_float("snr_db", required=True)]
    spec = ExperimentSpec(
        scheme, cfg, users, snrs, rc.get_int("trials", 200), rc.seed(), rc.region(), params
    )

    def run():
        return [
            [c.snr_db, c.user_id, math.degrees(c.rmse_theta), c.rmse_r, c.rmse_2d,
             c.mean_sweeps, c.excluded]
            for c in run_experiment(spec)
        ]

    return Prepared(EXPERIMENT_HEADER, run)


COMMANDS = {
    "trajectory": prepare_trajectory,
    "spectrum": prepare_spectrum,
    "localize": prepare_localize,
    "experiment": prepare_experiment,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="squintloc", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("config", help="key = value config file")
        sp.add_argument("-o", "--output", help="CSV path (default: stdout)")
        if name == "trajectory":
            sp.add_argument("--oracle", action="store_true",
                            help="add brute-force grid argmax columns")
    return ap


def render(command: str, rc: RunConfig, oracle: bool = False) -> str:
    """Run a subcommand and return its CSV text; raises ConfigError or a scheme error."""
    try:
        prepared = COMMANDS[command](rc, oracle)
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from None
    rows = prepared.run()
    buf = io.StringIO()
    _write_csv(prepared.header, rows, buf)
    return buf.getvalue()


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        rc = RunConfig.load(args.config)
        text = render(args.command, rc, getattr(args, "oracle", False))
        out_path = args.output or rc.get_str("output")
    except ConfigError as exc:
        print(f"squintloc: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, RuntimeError) as exc:
        # everything past config validation is a scheme/runtime failure
        print(f"squintloc: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SCHEME
    if out_path:
        with open(out_path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
