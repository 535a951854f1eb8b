"""Background solutions generated by the probe sources.

For a radial source ``Psi`` about ``p`` the whole-space solution of
``(Delta - tau**alpha0) w + tau**(alpha0 - 1) Psi = 0`` is
``w = tau**(alpha0 - 1) v(x)`` where ``v`` convolves ``Psi`` with the screened
Coulomb kernel ``exp(-k|x-y|) / (4 pi |x-y|)``, ``k = tau**(beta/2)``.
Outside/inside the source support ``v`` has the closed forms

    ext:  v = eta**(2(m+1)) * exp(-k r) / r * a_m(k)
    int:  v = sinh(k r) / r * b_m(k)

with ``r = |x - p|``.  Real ``k`` is evaluated in log space; complex ``k``
(needed on the Bromwich line) in plain complex arithmetic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.integrate import quad

from .exceptions import ConfigurationError, NumericalError
from .geometry import ProbeConfig
from .scaled import ScaledValue

__all__ = [
    "SpecialSolutionParams",
    "psi_eval",
    "coeff_a",
    "coeff_b",
    "coeff_a_asymptotic",
    "coeff_b_asymptotic",
    "v_exterior",
    "v_interior",
    "w0_eval",
    "w0_normal_derivative",
    "log_v",
    "log_w0",
    "radial_log_derivative",
    "w0_complex",
    "w0_normal_derivative_complex",
    "v_quadrature_oracle",
]

_QUAD_RTOL = 1e-10


@dataclass(frozen=True)
class SpecialSolutionParams:
    probe: ProbeConfig
    tau: float
    beta: float

    def __post_init__(self) -> None:
        if not self.tau > 1:
            raise ConfigurationError(f"tau must exceed 1, got {self.tau}")
        if not 0 < self.beta < 1:
            raise ConfigurationError(f"beta must lie in (0, 1), got {self.beta}")

    @property
    def ttilde(self) -> float:
        return self.tau ** (self.beta / 2)


def psi_eval(x, probe: ProbeConfig) -> np.ndarray | float:
    """Source moment ``Psi_{*,m}``; nonnegative everywhere."""
    x = np.asarray(x, dtype=float)
    r2 = np.sum((x - np.array(probe.p)) ** 2, axis=-1)
    m = probe.m
    if probe.flavor == "ext":
        val = np.where(r2 < probe.eta**2, (probe.eta**2 - r2) ** m, 0.0)
    else:
        inside = (r2 > probe.r1**2) & (r2 < probe.r2**2)
        val = np.where(inside, ((probe.r2**2 - r2) * (r2 - probe.r1**2)) ** m, 0.0)
    return float(val) if np.ndim(val) == 0 else val


def _checked_quad(f, a, b, points=None) -> float:
    val, err = quad(f, a, b, epsabs=0.0, epsrel=1e-12, limit=400, points=points)
    if not np.isfinite(val) or err > _QUAD_RTOL * abs(val) + 1e-300:
        raise NumericalError(
            f"coefficient quadrature did not converge (estimated error {err:.3g} on {val:.3g})",
            achieved=err / abs(val) if val else math.inf,
        )
    return val


@lru_cache(maxsize=4096)
def _log_coeff_a(m: int, eta: float, ttilde: float) -> float:
    c = eta * ttilde
    if c < 1.0:
        val = _checked_quad(lambda s: s * (1 - s * s) ** m * math.sinh(c * s), 0.0, 1.0)
        return math.log(val) - math.log(ttilde)
    # sinh(c s) = exp(c) / 2 * (exp(c (s - 1)) - exp(-c (s + 1)))
    pts = [max(0.0, 1.0 - 1.0 / c)] if c > 4 else None
    val = _checked_quad(
        lambda s: s * (1 - s * s) ** m * (math.exp(c * (s - 1)) - math.exp(-c * (s + 1))),
        0.0,
        1.0,
        points=pts,
    )
    return c - math.log(2 * ttilde) + math.log(val)


@lru_cache(maxsize=4096)
def _log_coeff_b(m: int, r1: float, r2: float, ttilde: float) -> float:
    k = ttilde
    pts = [r1 + 1.0 / k] if r1 + 1.0 / k < r2 else None
    val = _checked_quad(
        lambda s: s * ((r2 * r2 - s * s) * (s * s - r1 * r1)) ** m * math.exp(-(s - r1) * k),
        r1,
        r2,
        points=pts,
    )
    if val <= 0:
        return -math.inf
    return -r1 * k - math.log(k) + math.log(val)


def coeff_a(m: int, eta: float, ttilde: float) -> ScaledValue:
    """``a_m(k) = (1/k) int_0^1 s (1 - s^2)^m sinh(eta k s) ds``."""
    if not ttilde > 0:
        raise ConfigurationError("ttilde must be positive")
    return ScaledValue.from_log(_log_coeff_a(int(m), float(eta), float(ttilde)))


def coeff_b(m: int, r1: float, r2: float, ttilde: float) -> ScaledValue:
    """``b_m(k) = (1/k) int_{r1}^{r2} s (r2^2 - s^2)^m (s^2 - r1^2)^m exp(-k s) ds``."""
    if not ttilde > 0:
        raise ConfigurationError("ttilde must be positive")
    if not 0 < r1 < r2:
        raise ConfigurationError("coeff_b needs 0 < r1 < r2")
    return ScaledValue.from_log(_log_coeff_b(int(m), float(r1), float(r2), float(ttilde)))


def coeff_a_asymptotic(m: int, eta: float, ttilde: float) -> ScaledValue:
    """Leading large-``k`` behaviour ``eta 2^(m-1) m! exp(k eta) / (k eta)^(m+2)``."""
    c = eta * ttilde
    return ScaledValue.from_log(
        math.log(eta) + (m - 1) * math.log(2) + math.lgamma(m + 1) + c - (m + 2) * math.log(c)
    )


def coeff_b_asymptotic(m: int, r1: float, r2: float, ttilde: float) -> ScaledValue:
    """Leading large-``k`` behaviour ``2^m m! r1^(m+1) (r2^2-r1^2)^m exp(-r1 k) / k^(m+2)``."""
    return ScaledValue.from_log(
        m * math.log(2)
        + math.lgamma(m + 1)
        + (m + 1) * math.log(r1)
        + m * math.log(r2 * r2 - r1 * r1)
        - r1 * ttilde
        - (m + 2) * math.log(ttilde)
    )


def _log_sinh_over_r(k: float, r: np.ndarray) -> np.ndarray:
    """``log(sinh(k r) / r)`` without overflow; series below ``k r = 1e-4``."""
    r = np.asarray(r, dtype=float)
    z = k * r
    small = z < 1e-4
    zs = np.where(small, 1.0, z)
    rs = np.where(small, 1.0, r)
    big = zs - np.log(2 * rs) + np.log1p(-np.exp(-2 * zs))
    series = math.log(k) + np.log1p(z * z / 6)
    return np.where(small, series, big)


def log_v(x, probe: ProbeConfig, ttilde: float) -> np.ndarray:
    """``log v_{*,m}(x)`` on an array of points (``v`` is positive)."""
    x = np.asarray(x, dtype=float)
    r = np.linalg.norm(x - np.array(probe.p), axis=-1)
    m = probe.m
    if probe.flavor == "ext":
        if np.any(r <= probe.eta):
            raise ConfigurationError("closed form for v_ext needs |x - p| > eta")
        return 2 * (1 + m) * math.log(probe.eta) - ttilde * r - np.log(r) + _log_coeff_a(
            m, probe.eta, ttilde
        )
    if np.any(r >= probe.r1):
        raise ConfigurationError("closed form for v_int needs |x - p| < r1")
    return _log_sinh_over_r(ttilde, r) + _log_coeff_b(m, probe.r1, probe.r2, ttilde)


def radial_log_derivative(r, probe: ProbeConfig, ttilde: float) -> np.ndarray:
    """``(d/dr v) / v`` for the radial closed form."""
    r = np.asarray(r, dtype=float)
    k = ttilde
    if probe.flavor == "ext":
        return -(k + 1.0 / r)
    z = k * r
    small = z < 1e-3
    zs = np.where(small, 1.0, z)
    rs = np.where(small, 1.0, r)
    exact = k / np.tanh(zs) - 1.0 / rs
    series = k * z / 3 - k * z**3 / 45
    return np.where(small, series, exact)


def log_w0(x, probe: ProbeConfig, tau: float, alpha0: float) -> np.ndarray:
    """``log w0(x, tau)`` with ``w0 = tau**(alpha0-1) v(x; alpha0)``."""
    return (alpha0 - 1) * math.log(tau) + log_v(x, probe, tau ** (alpha0 / 2))


def v_exterior(x, params: SpecialSolutionParams) -> ScaledValue:
    if params.probe.flavor != "ext":
        raise ConfigurationError("v_exterior needs an ext probe")
    return ScaledValue.from_log(float(log_v(np.asarray(x, float), params.probe, params.ttilde)))


def v_interior(x, params: SpecialSolutionParams) -> ScaledValue:
    if params.probe.flavor != "int":
        raise ConfigurationError("v_interior needs an int probe")
    return ScaledValue.from_log(float(log_v(np.asarray(x, float), params.probe, params.ttilde)))


def w0_eval(x, params: SpecialSolutionParams) -> ScaledValue:
    return ScaledValue.from_log(
        float(log_w0(np.asarray(x, float), params.probe, params.tau, params.beta))
    )


def w0_normal_derivative(x, normal, params: SpecialSolutionParams) -> ScaledValue:
    """Derivative of ``w0`` along ``normal`` at ``x``."""
    x = np.asarray(x, dtype=float)
    d = x - np.array(params.probe.p)
    r = float(np.linalg.norm(d))
    cos = float(np.dot(d, np.asarray(normal, float))) / r if r > 0 else 0.0
    g = float(radial_log_derivative(r, params.probe, params.ttilde))
    return w0_eval(x, params) * (g * cos)


# complex spectral parameter --------------------------------------------------

_GL = {n: leggauss(n) for n in (64, 128)}


def _complex_coeff(probe: ProbeConfig, k: np.ndarray, n: int = 128) -> np.ndarray:
    """``a_m(k)`` / ``b_m(k)`` for complex ``k`` by fixed Gauss-Legendre (moderate ``|k|``)."""
    xg, wg = _GL[n]
    k = np.asarray(k, dtype=complex)[..., None]
    m = probe.m
    if probe.flavor == "ext":
        s = 0.5 * (xg + 1)
        w = 0.5 * wg
        f = s * (1 - s * s) ** m * np.sinh(probe.eta * k * s)
    else:
        r1, r2 = probe.r1, probe.r2
        s = 0.5 * (r2 - r1) * xg + 0.5 * (r2 + r1)
        w = 0.5 * (r2 - r1) * wg
        f = s * ((r2 * r2 - s * s) * (s * s - r1 * r1)) ** m * np.exp(-k * s)
    return np.sum(f * w, axis=-1) / k[..., 0]


def _complex_pow(tau, a):
    return np.exp(a * np.log(np.asarray(tau, dtype=complex)))


def w0_complex(x, probe: ProbeConfig, tau, alpha0: float) -> np.ndarray:
    """``w0(x, tau)`` for complex ``tau`` (principal branch); shape ``tau.shape + x.shape[:-1]``."""
    tau = np.asarray(tau, dtype=complex)
    x = np.asarray(x, dtype=float)
    r = np.linalg.norm(x - np.array(probe.p), axis=-1)
    k = _complex_pow(tau, alpha0 / 2)
    coef = _complex_coeff(probe, k)
    kk = k.reshape(k.shape + (1,) * r.ndim)
    cc = coef.reshape(k.shape + (1,) * r.ndim)
    pref = _complex_pow(tau, alpha0 - 1).reshape(kk.shape)
    if probe.flavor == "ext":
        v = probe.eta ** (2 * (1 + probe.m)) * np.exp(-kk * r) / r * cc
    else:
        rs = np.where(r == 0, 1.0, r)
        v = np.where(r == 0, kk, np.sinh(kk * rs) / rs) * cc
    return pref * v


def w0_normal_derivative_complex(x, normals, probe: ProbeConfig, tau, alpha0: float) -> np.ndarray:
    tau = np.asarray(tau, dtype=complex)
    x = np.asarray(x, dtype=float)
    d = x - np.array(probe.p)
    r = np.linalg.norm(d, axis=-1)
    cos = np.sum(d * np.asarray(normals, float), axis=-1) / r
    k = _complex_pow(tau, alpha0 / 2).reshape(tau.shape + (1,) * r.ndim)
    if probe.flavor == "ext":
        g = -(k + 1.0 / r)
    else:
        g = k / np.tanh(k * r) - 1.0 / r
    return w0_complex(x, probe, tau, alpha0) * g * cos


# brute-force oracle --------------------------------------------------------------


def v_quadrature_oracle(x, probe: ProbeConfig, ttilde: float, n_rad: int = 64, n_polar: int = 160) -> float:
    """Direct tensor Gauss quadrature of the volume potential defining ``v``.

    Spherical coordinates about ``p`` with the polar axis along ``x - p``;
    the azimuthal integral is a periodic trapezoid rule.
    """
    x = np.asarray(x, dtype=float)
    r = float(np.linalg.norm(x - np.array(probe.p)))
    xr, wr = leggauss(n_rad)
    xm, wm = leggauss(n_polar)
    if probe.flavor == "ext":
        a, b = 0.0, probe.eta
    else:
        a, b = probe.r1, probe.r2
    rho = 0.5 * (b - a) * xr + 0.5 * (b + a)
    wrho = 0.5 * (b - a) * wr
    n_phi = 8
    phi = 2 * np.pi * np.arange(n_phi) / n_phi
    R, M, PH = np.meshgrid(rho, xm, phi, indexing="ij")
    W = (wrho[:, None, None] * wm[None, :, None]) * (2 * np.pi / n_phi)
    # source point y = p + R * (sin th cos ph, sin th sin ph, cos th), x on the polar axis
    st = np.sqrt(1 - M * M)
    dx = R * st * np.cos(PH)
    dy = R * st * np.sin(PH)
    dz = r - R * M
    dist = np.sqrt(dx * dx + dy * dy + dz * dz)
    src = psi_eval(
        np.stack([R, np.zeros_like(R), np.zeros_like(R)], axis=-1) + np.array(probe.p), probe
    )
    f = src * np.exp(-ttilde * dist) / dist * R * R
    return float(np.sum(W * f) / (4 * np.pi))
