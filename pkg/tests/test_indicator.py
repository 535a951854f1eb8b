import math

import numpy as np
import pytest

from fracenclosure.exceptions import ConfigurationError
from fracenclosure.geometry import BallRegion, JumpProfile, ProbeConfig, ProblemConfig
from fracenclosure.indicator import (
    coarse_bound,
    indicator_boundary,
    volume_bounds,
    envelope_check,
    obstacle_integral,
)
from fracenclosure.special import log_v

from conftest import EXT_PROBE, INT_PROBE, ext_problem, int_problem


def test_null_jump_gives_zero_indicator():
    cfg = ext_problem(16, amplitude=0.0)
    s = indicator_boundary(256.0, cfg, EXT_PROBE)
    assert s.I.is_zero() and s.lower_bound.is_zero() and s.upper_bound.is_zero()
    assert not s.usable and s.sign == 0
    assert coarse_bound(256.0, cfg, EXT_PROBE).sign > 0


@pytest.mark.parametrize("make,probe,tau,sign", [(ext_problem, EXT_PROBE, 256.0, 1), (int_problem, INT_PROBE, 1e4, -1)])
def test_sign_and_sandwich(make, probe, tau, sign):
    s = indicator_boundary(tau, make(24), probe)
    assert s.sign == sign and s.usable
    assert s.lower_bound <= s.I <= s.upper_bound
    assert math.isfinite(s.scaled_log)
    assert s.scaled_log == pytest.approx(tau**-0.25 * s.I.logabs)


def test_bound_ordering_positive_jump():
    lo, up = volume_bounds(256.0, ext_problem(16), EXT_PROBE)
    assert 0 < lo <= up
    lo, up = volume_bounds(256.0, ext_problem(16, amplitude=-0.3), EXT_PROBE)
    assert lo <= up < 0


def test_coarse_bound_dominates():
    cfg = ext_problem(16)
    for tau in (256.0, 4096.0):
        s = indicator_boundary(tau, cfg, EXT_PROBE)
        bound = coarse_bound(tau, cfg, EXT_PROBE)
        assert bound >= abs(s.upper_bound) and bound >= abs(s.I)


def test_coarse_bound_decay_is_exponential_at_probe_distance():
    cfg = ext_problem(16)
    taus = np.geomspace(256, 1e5, 6)
    y = np.array([coarse_bound(t, cfg, EXT_PROBE).logabs + 2 * t**0.25 * 1.2 for t in taus])
    X = np.c_[np.log(taus), np.ones_like(taus)]
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    assert np.isfinite(coef[0]) and abs(coef[0]) < 5
    assert np.sqrt(np.mean((X @ coef - y) ** 2)) < 0.2


def test_subface_quadrature_refinement():
    cfg = ext_problem(32)
    for tau in (256.0, 1e4):
        a = indicator_boundary(tau, cfg, EXT_PROBE)
        b = indicator_boundary(tau, cfg, EXT_PROBE, subfaces=2)
        assert a.I.rel_diff(b.I) <= 0.01


def test_volume_form_consistent_at_moderate_tau():
    s = indicator_boundary(256.0, ext_problem(32), EXT_PROBE)
    assert s.I.rel_diff(s.volume_form) < 0.02


def test_tau_must_exceed_one():
    with pytest.raises(ConfigurationError):
        indicator_boundary(1.0, ext_problem(16), EXT_PROBE)


def test_envelope_constant_jump():
    rep = envelope_check(ext_problem(16), EXT_PROBE, np.geomspace(1e3, 1e4, 6))
    assert all(j.sign > 0 for j in rep.J)
    assert np.isfinite(rep.exponent) and rep.residual <= 0.2
    assert rep.distance == pytest.approx(1.2)


def test_envelope_higher_moment_is_smaller():
    m2 = ProbeConfig("ext", (2, 0, 0), m=2, eta=0.5)
    for tau in (256.0, 4096.0):
        assert obstacle_integral(ext_problem(16), EXT_PROBE, tau, 0.5) > obstacle_integral(ext_problem(16), m2, tau, 0.5)


def test_envelope_vanishes_with_obstacle():
    vals = []
    for r in (0.3, 0.03, 0.003):
        cfg = ProblemConfig(0.5, ext_problem(16).box, (BallRegion((0, 0, 0), r),), JumpProfile("constant", 0.3))
        vals.append(obstacle_integral(cfg, EXT_PROBE, 256.0, 0.5).logabs)
    assert vals[0] > vals[1] > vals[2]
    assert vals[1] - vals[2] == pytest.approx(3 * math.log(10), abs=0.1)


def test_obstacle_integral_matches_cell_sum():
    # shell-and-cap reduction against a midpoint sum over a fine cube
    cfg = int_problem(16)
    tau = 100.0
    k = tau**0.25
    val = float(obstacle_integral(cfg, INT_PROBE, tau, 0.5))
    g = np.linspace(-0.3, 0.3, 121)
    h = g[1] - g[0]
    X, Y, Z = np.meshgrid(g + 0.2, g, g, indexing="ij")
    pts = np.stack([X, Y, Z], -1)
    inside = np.linalg.norm(pts - np.array([0.2, 0, 0]), axis=-1) < 0.3
    brute = np.sum(np.exp(2 * log_v(pts[inside], INT_PROBE, k))) * h**3
    assert val == pytest.approx(brute, rel=0.02)


def test_envelope_validation():
    with pytest.raises(ConfigurationError):
        envelope_check(ext_problem(16), EXT_PROBE, [100, 200, 300])
    with pytest.raises(ConfigurationError):
        envelope_check(ext_problem(16, amplitude=0.0), EXT_PROBE, [100, 200, 300, 400])
