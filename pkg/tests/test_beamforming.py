import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import minimize

from squintloc.beamforming import (
    OutOfTrajectory,
    SearchGrid,
    array_gain,
    brute_force_squint_point,
    f_kernel,
    gain_map,
    natural_squint_point,
    ps_state,
    ps_weights,
    trajectory,
    ttd_config,
    ttd_squint_point,
    weights_at,
    weights_matrix,
)
from squintloc.channel import ArrayConfig
from squintloc.geometry import PolarPoint

SQRT_N = math.sqrt(128)
CROSS_START = PolarPoint.from_degrees(60, 30)
CROSS_END = PolarPoint.from_degrees(60, -30)


def cross(M=8, N=128):
    return ArrayConfig(N, 30e9, 3e9, M, d=0.005)


def continuous_focus(w, f, cfg, guess):
    """Independent oracle: maximize the gain with a local optimizer."""
    obj = lambda x: -array_gain(w, PolarPoint(x[0], math.radians(x[1])), f, cfg)
    res = minimize(obj, [guess.r, guess.theta_deg], method="Nelder-Mead",
                   options={"xatol": 1e-6, "fatol": 1e-12, "maxiter": 4000})
    return res.x[0], res.x[1]


def test_ps_weights_unit_modulus():
    w = ps_weights(cross(), PolarPoint.from_degrees(7, -12))
    np.testing.assert_allclose(np.abs(w), 1 / SQRT_N)


def test_center_phase_cycles():
    # odd N puts an element at n = 0: f0 r / c = 3e10 * 60 / 3e8
    state = ttd_config(cross(N=129), CROSS_START, CROSS_END)
    assert state.phase_cycles[64] == pytest.approx(6000.0)


def test_cross_delay_range_and_center():
    state = ttd_config(cross(), CROSS_START, CROSS_END)
    assert state.delays.min() * 1e6 == pytest.approx(0.1889, abs=2e-4)
    assert state.delays.max() * 1e6 == pytest.approx(0.2112, abs=2e-4)
    center = ttd_config(cross(N=129), CROSS_START, CROSS_END).delays[64]
    assert center == pytest.approx((33e9 * 60 - 30e9 * 60) / (3e9 * 3e8), rel=1e-12)
    assert center == pytest.approx(0.2e-6)


def test_start_equals_end_delays_are_travel_times():
    cfg = cross()
    p = PolarPoint.from_degrees(25, 10)
    state = ttd_config(cfg, p, p)
    from squintloc.geometry import element_distances
    np.testing.assert_allclose(state.delays, element_distances(p, 128, 0.005, "fresnel") / 3e8, rtol=1e-12)


def test_delay_offset_keeps_foci():
    cfg = cross()
    a = ttd_config(cfg, CROSS_START, CROSS_END)
    b = ttd_config(cfg, CROSS_START, CROSS_END, delay_offset=1e-7)
    for m in (0, 3, 8):
        wa, wb = weights_at(a, m), weights_at(b, m)
        ratio = wb / wa
        np.testing.assert_allclose(ratio, ratio[0], atol=1e-9)


def test_weights_endpoints():
    cfg = cross()
    state = ttd_config(cfg, CROSS_START, CROSS_END)
    np.testing.assert_allclose(weights_at(state, 0), ps_weights(cfg, CROSS_START), atol=1e-9)
    W = weights_matrix(state)
    assert W.shape == (9, 128)
    np.testing.assert_allclose(np.abs(W), 1 / SQRT_N)
    assert array_gain(weights_at(state, 8), CROSS_END, cfg.fM, cfg) >= 0.99 * SQRT_N
    with pytest.raises(IndexError):
        weights_at(state, 9)


def test_gain_examples():
    cfg = ArrayConfig(128, 30e9, 6e9, 16)
    focus = PolarPoint.from_degrees(10, 60)
    w = ps_weights(cfg, focus)
    assert array_gain(w, focus, cfg.f0, cfg) == pytest.approx(SQRT_N)
    assert array_gain(w, PolarPoint.from_degrees(10, -60), cfg.f0, cfg) < 0.1 * SQRT_N
    assert f_kernel(0, 0, 128) == pytest.approx(128)


@settings(max_examples=20, deadline=None)
@given(st.floats(4, 80), st.floats(-80, 80), st.floats(4, 80), st.floats(-80, 80))
def test_gain_map_matches_array_gain(r0, t0, r, t):
    cfg = cross()
    w = ps_weights(cfg, PolarPoint.from_degrees(r0, t0))
    for model in ("exact", "fresnel"):
        g = gain_map(w, np.array([r]), np.radians([t]), 31e9, cfg, model)[0, 0]
        ref = array_gain(w, PolarPoint.from_degrees(r, t), 31e9, cfg, model)
        assert g == pytest.approx(ref, abs=1e-9)


def test_natural_squint_wide_endpoint():
    cfg = ArrayConfig(128, 30e9, 6e9, 16)
    p = natural_squint_point(cfg, PolarPoint.from_degrees(10, 60), 16).point
    # closed form gives 23.000 m; rounding the angle first gives 22.99 m
    assert abs(p.r - 22.99) <= 0.01 + 1e-9
    assert p.theta_deg == pytest.approx(46.19, abs=0.01)
    assert natural_squint_point(cfg, PolarPoint.from_degrees(10, 60), 0).point == PolarPoint.from_degrees(10, 60)


def test_natural_squint_matches_continuous_oracle():
    cfg = ArrayConfig(128, 30e9, 3e9, 1)
    focus = PolarPoint.from_degrees(20, 45)
    p = natural_squint_point(cfg, focus, 1).point
    assert (p.r, p.theta_deg) == (pytest.approx(25.82, abs=0.01), pytest.approx(40.00, abs=0.01))
    r, t = continuous_focus(ps_weights(cfg, focus), 33e9, cfg, p)
    assert r == pytest.approx(p.r, abs=0.05)
    assert t == pytest.approx(p.theta_deg, abs=0.01)


def test_ttd_midband_crossing():
    state = ttd_config(cross(), CROSS_START, CROSS_END)
    p = ttd_squint_point(state, 4).point
    a, b = 1.5 * 30 / (3 * 31.5), 33 * 1.5 / (3 * 31.5)
    assert math.sin(p.theta) == pytest.approx(0.5 * a - 0.5 * b, abs=1e-15)
    assert p.theta_deg == pytest.approx(-1.364, abs=1e-3)
    r, t = continuous_focus(weights_at(state, 4), 31.5e9, state.cfg, p)
    assert t == pytest.approx(p.theta_deg, abs=0.01)
    assert r == pytest.approx(p.r, rel=0.01)


def test_trajectory_endpoints_and_degenerate():
    state = ttd_config(cross(), CROSS_START, CROSS_END)
    traj = trajectory(state)
    assert traj[0].point == CROSS_START and traj[-1].point == CROSS_END
    p = PolarPoint.from_degrees(30, 15)
    flat = trajectory(ttd_config(cross(), p, p))
    for sp in flat:
        assert sp.point.r == pytest.approx(30, rel=1e-12)
        assert sp.point.theta == pytest.approx(p.theta, abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.floats(2, 100), st.floats(-85, 85), st.floats(2, 100), st.floats(-85, 85), st.floats(0.01, 1.0))
def test_trajectory_stays_between_endpoints(r1, t1, r2, t2, frac):
    # endpoint weights are non-negative and sum to one, so every point is valid
    cfg = ArrayConfig(16, 30e9, frac * 30e9, 8)
    a, b = PolarPoint.from_degrees(r1, t1), PolarPoint.from_degrees(r2, t2)
    lo, hi = sorted((math.sin(a.theta), math.sin(b.theta)))
    for sp in trajectory(ttd_config(cfg, a, b)):
        assert lo - 1e-12 <= math.sin(sp.point.theta) <= hi + 1e-12
        assert sp.point.r > 0


def test_out_of_trajectory_is_a_value_error():
    assert issubclass(OutOfTrajectory, ValueError)


def test_ps_state_is_natural_squint():
    cfg = ArrayConfig(128, 30e9, 6e9, 16)
    state = ps_state(cfg, PolarPoint.from_degrees(10, 60))
    assert not state.delays.any()
    assert state.end_focus == natural_squint_point(cfg, state.start_focus, 16).point


def test_search_grid_standard():
    g = SearchGrid.standard()
    r, t = g.radii(), g.angles()
    assert r[0] == 3.17 and r[-1] == pytest.approx(81.57)
    assert len(t) == 359 and np.all(np.abs(t) < math.pi / 2)


def test_brute_force_matched_focus():
    cfg = cross()
    grid = SearchGrid(10, 40, 0.4, math.radians(-10), math.radians(40), math.radians(0.5))
    p = PolarPoint(20.0, math.radians(20.0))
    sp = brute_force_squint_point(ttd_config(cfg, p, p), 5, grid)
    assert sp.point.r == pytest.approx(20.0, abs=0.2)
    assert sp.point.theta_deg == pytest.approx(20.0, abs=0.25)


def test_brute_force_cross_midband():
    state = ttd_config(cross(), CROSS_START, CROSS_END)
    sp = brute_force_squint_point(state, 4, SearchGrid.standard())
    assert abs(sp.point.theta_deg - (-1.364)) <= 0.5


def test_brute_force_tie_break():
    cfg = ArrayConfig(4, 30e9, 1e9, 1)
    grid = SearchGrid(1, 2, 1, 0.0, 0.1, 0.1)
    sp = brute_force_squint_point(ps_state(cfg, PolarPoint(1000, 0.05)), 0, grid)
    # two-element gains are nearly flat here; result must be the first maximum in row-major order
    r, t = grid.radii(), grid.angles()
    g = gain_map(weights_at(ps_state(cfg, PolarPoint(1000, 0.05)), 0), r, t, cfg.f0, cfg)
    i, j = np.unravel_index(np.argmax(g), g.shape)
    assert (sp.point.r, sp.point.theta) == (r[i], t[j])


def test_grating_lobe_at_half_wavelength_spacing():
    # with d = lambda(f0)/2 the top subcarrier has a full-gain alias on the far side
    cfg = ArrayConfig(128, 30e9, 6e9, 16)
    focus = PolarPoint.from_degrees(10, 60)
    main = natural_squint_point(cfg, focus, 16).point
    lam = 3e8 / cfg.fM
    s_alias = math.sin(main.theta) - lam / cfg.d
    r_alias = main.r * (1 - s_alias**2) / math.cos(main.theta) ** 2
    alias = PolarPoint(r_alias, math.asin(s_alias))
    w = ps_weights(cfg, focus)
    assert array_gain(w, main, cfg.fM, cfg) == pytest.approx(SQRT_N, rel=1e-6)
    assert array_gain(w, alias, cfg.fM, cfg) == pytest.approx(SQRT_N, rel=1e-6)
