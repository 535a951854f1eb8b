import math

import numpy as np
import pytest

from fracenclosure.exceptions import ConfigurationError
from fracenclosure.geometry import ProbeConfig
from fracenclosure.special import (
    SpecialSolutionParams,
    coeff_a,
    coeff_a_asymptotic,
    coeff_b,
    coeff_b_asymptotic,
    log_v,
    log_w0,
    psi_eval,
    v_exterior,
    v_interior,
    v_quadrature_oracle,
    w0_complex,
    w0_eval,
    w0_normal_derivative,
    w0_normal_derivative_complex,
)

from conftest import EXT_PROBE, INT_PROBE

EXT_PTS = np.array([[1.0, 0.0, 0.0], [0.2, 0.7, -0.3], [-1.0, 1.0, 1.0]])
INT_PTS = np.array([[0.0, 0.0, 0.0], [0.3, 0.1, -0.2], [0.5, 0.3, 0.3]])


@pytest.mark.parametrize("probe,pts", [(EXT_PROBE, EXT_PTS), (INT_PROBE, INT_PTS),
                                       (ProbeConfig("ext", (2, 0, 0), m=2, eta=0.5), EXT_PTS),
                                       (ProbeConfig("int", (0, 0, 0), m=1, r1=0.7, r2=0.9), INT_PTS)])
@pytest.mark.parametrize("k", [0.5, 3.0])
def test_closed_form_matches_volume_quadrature(probe, pts, k):
    for x in pts:
        brute = v_quadrature_oracle(x, probe, k)
        assert math.exp(float(log_v(x, probe, k))) == pytest.approx(brute, rel=1e-9)


def test_small_k_limit_of_a0():
    # a_0(k) -> eta / 3 as k -> 0
    assert float(coeff_a(0, 0.5, 1e-6)) == pytest.approx(0.5 / 3, rel=1e-9)


def test_coefficients_positive_and_extreme_k():
    a = coeff_a(1, 0.5, 4000.0)
    b = coeff_b(1, 0.7, 0.9, 4000.0)
    assert a.sign > 0 and b.sign > 0
    assert a.logabs > 1900 and b.logabs < -2700


@pytest.mark.parametrize("m", [0, 1, 2])
def test_asymptotic_ratio_converges_at_first_order(m):
    # ratio = 1 - c1 / (k L) + ...: the deviation halves when k doubles
    devs = [abs(float(coeff_a(m, 0.5, c / 0.5) / coeff_a_asymptotic(m, 0.5, c / 0.5)) - 1) for c in (200, 400, 800)]
    assert devs[0] / devs[1] == pytest.approx(2, rel=0.02)
    assert devs[1] / devs[2] == pytest.approx(2, rel=0.01)
    assert devs[2] < 0.01
    devs = [abs(float(coeff_b(m, 0.7, 0.9, c / 0.7) / coeff_b_asymptotic(m, 0.7, 0.9, c / 0.7)) - 1)
            for c in (200, 400, 800)]
    assert devs[1] / devs[2] == pytest.approx(2, rel=0.02)


def test_scalar_wrappers_agree_with_log_form():
    par = SpecialSolutionParams(EXT_PROBE, tau=81.0, beta=0.5)
    x = np.array([1.0, 0.5, 0.0])
    assert v_exterior(x, par).logabs == pytest.approx(float(log_v(x, EXT_PROBE, 3.0)))
    assert w0_eval(x, par).logabs == pytest.approx(float(log_w0(x, EXT_PROBE, 81.0, 0.5)))
    with pytest.raises(ConfigurationError):
        v_interior(x, par)
    with pytest.raises(ConfigurationError):
        SpecialSolutionParams(EXT_PROBE, tau=0.5, beta=0.5)


@pytest.mark.parametrize("probe,x", [(EXT_PROBE, np.array([0.9, 0.3, -0.2])), (INT_PROBE, np.array([0.3, 0.1, 0.2]))])
def test_normal_derivative_matches_finite_difference(probe, x):
    par = SpecialSolutionParams(probe, tau=16.0, beta=0.5)
    n = np.array([0.6, 0.0, 0.8])
    h = 1e-5
    fd = (float(w0_eval(x + h * n, par)) - float(w0_eval(x - h * n, par))) / (2 * h)
    assert float(w0_normal_derivative(x, n, par)) == pytest.approx(fd, rel=1e-7)


def test_interior_solution_regular_at_centre():
    k = 2.0
    near = float(log_v(np.array([1e-7, 0, 0]), INT_PROBE, k))
    centre = float(log_v(np.zeros(3), INT_PROBE, k))
    assert near == pytest.approx(centre, abs=1e-12)
    # v(p) = k * b_m(k)
    assert math.exp(centre) == pytest.approx(k * float(coeff_b(0, 0.7, 0.9, k)), rel=1e-12)


@pytest.mark.parametrize("probe,pts", [(EXT_PROBE, EXT_PTS), (INT_PROBE, INT_PTS)])
def test_complex_path_matches_real_path(probe, pts):
    for tau in (2.0, 5.0):
        c = w0_complex(pts, probe, np.array(tau), 0.5)
        r = np.exp(log_w0(pts, probe, tau, 0.5))
        assert np.allclose(c.real, r, rtol=1e-12, atol=0)
        assert np.all(np.abs(c.imag) <= 1e-14 * r)


def test_complex_conjugate_symmetry():
    taus = np.array([1 + 3j, 1 - 3j])
    n = np.tile([1.0, 0.0, 0.0], (len(EXT_PTS), 1))
    w = w0_complex(EXT_PTS, EXT_PROBE, taus, 0.5)
    d = w0_normal_derivative_complex(EXT_PTS, n, EXT_PROBE, taus, 0.5)
    assert np.allclose(w[0], np.conj(w[1]), rtol=1e-13)
    assert np.allclose(d[0], np.conj(d[1]), rtol=1e-13)


def test_psi_support():
    assert psi_eval(np.array([2.2, 0, 0]), EXT_PROBE) > 0
    assert psi_eval(np.array([2.6, 0, 0]), EXT_PROBE) == 0
    assert psi_eval(np.array([0.8, 0, 0]), INT_PROBE) > 0
    assert psi_eval(np.array([0.5, 0, 0]), INT_PROBE) == 0


def test_closed_form_domain_checked():
    with pytest.raises(ConfigurationError):
        log_v(np.array([2.2, 0, 0]), EXT_PROBE, 1.0)
    with pytest.raises(ConfigurationError):
        log_v(np.array([0.8, 0, 0]), INT_PROBE, 1.0)
