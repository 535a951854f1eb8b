import math
import warnings

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

import fracenclosure.enclosure as enc
from fracenclosure.enclosure import (
    EnclosureRegressor,
    SweepResult,
    analytic_branch,
    config_fingerprint,
    extract_distance,
    geometric_schedule,
    jump_sign,
    run_sweep,
    threshold_test,
)
from fracenclosure.exceptions import ConfigurationError, FitError, NumericalError
from fracenclosure.geometry import BallRegion, BoxDomain, JumpProfile, ProbeConfig, ProblemConfig
from fracenclosure.indicator import IndicatorSample
from fracenclosure.scaled import ScaledValue

from conftest import EXT_PROBE, ext_problem


def _synthetic(d=1.2, c=-1.5, b=-3.0, alpha0=0.5, taus=None, sign=1):
    taus = geometric_schedule(4, 24, 10, alpha0) if taus is None else taus
    samples = []
    for t in taus:
        logI = -2 * d * t ** (alpha0 / 2) + c * math.log(t) + b
        I = ScaledValue.from_log(logI, sign)
        samples.append(IndicatorSample(t, I, t ** (-alpha0 / 2) * logI, I, I, 1e-11, ScaledValue(0.0)))
    return SweepResult(samples, "synthetic", alpha0, d)


def test_geometric_schedule():
    sch = geometric_schedule(4, 24, 12, 0.5)
    assert sch[0] == pytest.approx(256) and sch[-1] == pytest.approx(24**4)
    r = np.diff(np.log(np.array(sch) ** 0.25))
    assert np.allclose(r, r[0])


def test_regressor_recovers_exact_model():
    X = np.array(geometric_schedule(4, 24, 10, 0.5))[:, None]
    y = -2 * 1.2 * X[:, 0] ** 0.25 - 1.5 * np.log(X[:, 0]) + 0.7
    reg = EnclosureRegressor(alpha0=0.5).fit(X, y)
    assert reg.distance_ == pytest.approx(1.2, rel=1e-10)
    assert reg.prefactor_exponent_ == pytest.approx(-1.5, rel=1e-8)
    assert reg.residual_ < 1e-9
    assert np.allclose(reg.predict(X), y)
    assert reg.score(X, y) == pytest.approx(1.0)


def test_regressor_api_contract():
    reg = EnclosureRegressor(alpha0=0.4)
    assert reg.get_params() == {"alpha0": 0.4, "clip_distance": True}
    assert clone(reg).set_params(alpha0=0.6).alpha0 == 0.6
    with pytest.raises(NotFittedError):
        reg.predict([[10.0]])
    with pytest.raises(FitError):
        reg.fit([[2.0], [3.0], [4.0]], [1, 2, 3])
    with pytest.raises(ValueError):
        reg.fit([[2.0, 1.0]] * 5, [1] * 5)
    with pytest.raises(ValueError):
        EnclosureRegressor(alpha0=1.5).fit([[2.0], [3.0], [4.0], [5.0]], [1, 2, 3, 4])


def test_regressor_clips_negative_distance():
    X = np.array([[10.0], [20.0], [40.0], [80.0]])
    y = 0.5 * X[:, 0] ** 0.25
    assert EnclosureRegressor(alpha0=0.5).fit(X, y).distance_ == 0.0
    assert EnclosureRegressor(alpha0=0.5, clip_distance=False).fit(X, y).raw_distance_ < 0


def test_extract_distance_and_sign_on_synthetic():
    fit = extract_distance(_synthetic(sign=-1))
    assert fit.distance_estimate == pytest.approx(1.2, rel=1e-9)
    assert fit.jump_sign == "negative" and fit.n_used == 10
    assert fit.tau0_empirical == pytest.approx(256)


def test_unstable_sign_warns():
    sw = _synthetic()
    s = sw.samples[-2]
    sw.samples[-2] = IndicatorSample(s.tau, -s.I, s.scaled_log, s.lower_bound, s.upper_bound, 1e-11, s.noise_floor)
    with warnings.catch_warnings(record=True) as rec:
        warnings.simplefilter("always")
        fit = extract_distance(sw)
    assert fit.warnings and any("sign" in str(r.message) for r in rec)
    assert fit.tau0_empirical == pytest.approx(sw.samples[-1].tau)


def test_fit_refused_without_usable_samples():
    sw = _synthetic(taus=geometric_schedule(4, 6, 3, 0.5))
    with pytest.raises(FitError) as exc:
        extract_distance(sw)
    assert exc.value.jump_sign == "positive"
    assert jump_sign(_synthetic())[0] == "positive"


@pytest.mark.parametrize("T,sign,expected", [
    (1.2, "positive", "tends_to_zero"),
    (3.6, "positive", "tends_to_plus_inf"),
    (3.6, "negative", "tends_to_minus_inf"),
    (2.45, "positive", "indeterminate"),
    (3.6, "none", "tends_to_zero"),
])
def test_analytic_branch(T, sign, expected):
    assert analytic_branch(T, 1.2, sign, band=0.05) == expected


def test_threshold_trend_on_synthetic():
    sw = _synthetic()
    lo = threshold_test(sw, 1.2)
    hi = threshold_test(sw, 3.6)
    assert lo.classification == "tends_to_zero" and lo.corroborated and lo.trend_slope < 0
    assert hi.classification == "tends_to_plus_inf" and hi.corroborated and hi.trend_slope > 0
    assert threshold_test(sw, 2.4).classification == "indeterminate"
    with pytest.raises(ConfigurationError):
        threshold_test(sw, -1.0)


def test_run_sweep_ordering_and_single_sample():
    cfg = ext_problem(16)
    sch = geometric_schedule(4, 8, 3, 0.5)
    sw = run_sweep(cfg, EXT_PROBE, sch)
    assert [s.tau for s in sw.samples] == sch
    assert sw.fingerprint == config_fingerprint(cfg, EXT_PROBE)
    one = run_sweep(cfg, EXT_PROBE, sch[:1])
    assert len(one) == 1
    with pytest.raises(FitError):
        extract_distance(one)


def test_run_sweep_validation():
    cfg = ext_problem(16)
    with pytest.raises(ConfigurationError, match="increasing"):
        run_sweep(cfg, EXT_PROBE, [300.0, 200.0])
    with pytest.raises(ConfigurationError, match="overflow"):
        run_sweep(cfg, EXT_PROBE, [300.0, 1e12])
    with pytest.raises(ConfigurationError):
        run_sweep(cfg, EXT_PROBE, [])


def test_failed_samples_are_recorded(monkeypatch):
    real = enc.indicator_boundary

    def flaky(tau, *a, **k):
        if tau > 1000:
            raise NumericalError("forced")
        return real(tau, *a, **k)

    monkeypatch.setattr(enc, "indicator_boundary", flaky)
    sw = run_sweep(ext_problem(16), EXT_PROBE, [256.0, 2000.0])
    assert sw.samples[0].error is None and "forced" in sw.samples[1].error
    assert not sw.samples[1].usable
    with pytest.raises(NumericalError, match="all 1 sweep samples failed"):
        run_sweep(ext_problem(16), EXT_PROBE, [2000.0])


def test_parallel_matches_serial_bitwise():
    cfg = ext_problem(16)
    sch = geometric_schedule(4, 12, 4, 0.5)
    a = run_sweep(cfg, EXT_PROBE, sch, workers=1)
    b = run_sweep(cfg, EXT_PROBE, sch, workers=2)
    for x, y in zip(a.samples, b.samples):
        assert (x.I.mantissa, x.I.log_scale) == (y.I.mantissa, y.I.log_scale)
        assert x.upper_bound == y.upper_bound and x.solver_residual == y.solver_residual


def test_scaling_covariance_of_distance():
    fits = []
    for k in (1.0, 2.0):
        cfg = ProblemConfig(0.5, BoxDomain((-k, -k, -k), (k, k, k), 32), (BallRegion((0, 0, 0), 0.3 * k),),
                            JumpProfile("constant", 0.3))
        probe = ProbeConfig("ext", (2 * k, 0, 0), eta=0.5 * k)
        # same values of k * tau~ keep the exponent range comparable
        sw = run_sweep(cfg, probe, geometric_schedule(4 / k, 24 / k, 8, 0.5))
        fits.append(extract_distance(sw))
    assert fits[1].distance_estimate == pytest.approx(2 * fits[0].distance_estimate,
                                                      abs=2 * (fits[0].fit_residual + fits[1].fit_residual) + 0.05)
