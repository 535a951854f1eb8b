"""Indicator function and the volume bounds that sandwich it.

The indicator pairs the Neumann trace of the scattered field with the
background solution on the box boundary,

    I(tau) = sum_faces area * d_nu z * w0.

Using the first-order trace makes this the exact discrete Green-identity
partner of the volume form ``sum_D h^3 q (w0 + z) w0`` with
``q = tau**alpha - tau**alpha0``, up to the truncation error of ``w0``
under the 7-point Laplacian; both are reported.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad

from .elliptic import Grid, neumann_trace, scattered_source, solve_scattered
from .exceptions import ConfigurationError
from .geometry import ProblemConfig, ProbeConfig, inside_obstacle, probe_distance
from .scaled import ScaledValue, logsumexp_signed
from .special import log_v, log_w0

__all__ = [
    "NOISE_FACTOR",
    "IndicatorSample",
    "EnvelopeReport",
    "indicator_boundary",
    "volume_bounds",
    "coarse_bound",
    "obstacle_integral",
    "envelope_check",
]

NOISE_FACTOR = 1e3


@dataclass
class IndicatorSample:
    tau: float
    I: ScaledValue
    scaled_log: float
    lower_bound: ScaledValue
    upper_bound: ScaledValue
    solver_residual: float
    noise_floor: ScaledValue
    volume_form: ScaledValue = field(default_factory=lambda: ScaledValue(0.0))
    iterations: int = 0
    error: str | None = None

    @property
    def usable(self) -> bool:
        return self.error is None and abs(self.I) > self.noise_floor

    @property
    def sign(self) -> int:
        return int(self.I.sign)


def _d_nodes(config: ProblemConfig, sgn: np.ndarray) -> np.ndarray:
    return (sgn != 0) & np.pad(np.ones(tuple(k - 1 for k in config.box.n), bool), 1)


def volume_bounds(tau: float, config: ProblemConfig, probe: ProbeConfig,
                  source=None) -> tuple[ScaledValue, ScaledValue]:
    """Cell-midpoint quadrature of ``int tau^a0/tau^a * q * w0^2`` and ``int q * w0^2``."""
    grid, alpha, sgn, lq, lw = source if source is not None else scattered_source(config, probe, tau)
    live = _d_nodes(config, sgn)
    lt = math.log(tau)
    vol = grid.cell_volume
    up = logsumexp_signed(lq[live] + 2 * lw[live], sgn[live]) * vol
    ratio = (config.alpha0 - alpha.values[live]) * lt
    low = logsumexp_signed(lq[live] + 2 * lw[live] + ratio, sgn[live]) * vol
    return low, up


def coarse_bound(tau: float, config: ProblemConfig, probe: ProbeConfig) -> ScaledValue:
    """``tau^a0 (tau^|h|_inf + 1) int_D w0^2`` by cell quadrature."""
    grid = Grid(config.box)
    pts = grid.points()
    inside = inside_obstacle(pts, config.obstacle)
    inside[[0, -1], :, :] = False
    inside[:, [0, -1], :] = False
    inside[:, :, [0, -1]] = False
    lw = log_w0(pts[inside], probe, tau, config.alpha0)
    integral = logsumexp_signed(2 * lw, np.ones_like(lw)) * grid.cell_volume
    factor = ScaledValue.from_log(config.alpha0 * math.log(tau)) * (
        ScaledValue.from_log(config.h_sup * math.log(tau)) + 1.0
    )
    return factor * integral


def _face_w0_log(points, normals, grid: Grid, probe, tau, alpha0, subfaces: int) -> np.ndarray:
    if subfaces == 1:
        return log_w0(points, probe, tau, alpha0)
    h = grid.spacing
    offs = (np.arange(subfaces) + 0.5) / subfaces - 0.5
    acc = []
    for a in offs:
        for b in offs:
            shift = np.zeros_like(points)
            for i in range(3):
                t = [j for j in range(3) if j != i]
                on = np.abs(normals[:, i]) > 0
                shift[on, t[0]] = a * h[t[0]]
                shift[on, t[1]] = b * h[t[1]]
            acc.append(log_w0(points + shift, probe, tau, alpha0))
    acc = np.array(acc)
    top = acc.max(axis=0)
    return top + np.log(np.mean(np.exp(acc - top), axis=0))


def indicator_boundary(tau: float, config: ProblemConfig, probe: ProbeConfig,
                       subfaces: int = 1, trace_order: int = 1) -> IndicatorSample:
    """Indicator from the scattered-field Neumann trace, with bounds and noise floor.

    ``subfaces > 1`` averages ``w0`` over a ``subfaces x subfaces`` split of each face.
    """
    if not tau > 1:
        raise ConfigurationError(f"tau must exceed 1, got {tau}")
    source = scattered_source(config, probe, tau)
    z, info = solve_scattered(config, probe, tau, source=source)
    grid, alpha, sgn, lq, lw = source
    trace = neumann_trace(z, order=trace_order)
    lw_face = _face_w0_log(trace.points, trace.normals, grid, probe, tau, config.alpha0, subfaces)
    flux = trace.values * trace.areas
    with np.errstate(divide="ignore"):
        I = logsumexp_signed(np.log(np.abs(flux)) + lw_face, np.sign(flux)) * ScaledValue.from_log(
            trace.log_scale
        )

    # volume form sum_D h^3 q (w0 + z) w0, with z = values * exp(log_scale)
    live = _d_nodes(config, sgn)
    vol = grid.cell_volume
    zl = z.values[live]
    with np.errstate(divide="ignore"):
        first = logsumexp_signed(lq[live] + 2 * lw[live], sgn[live])
        second = logsumexp_signed(lq[live] + lw[live] + np.log(np.abs(zl)), sgn[live] * np.sign(zl))
    volume_form = (first + second * ScaledValue.from_log(z.log_scale)) * vol

    lower, upper = volume_bounds(tau, config, probe, source=source)
    floor = abs(upper) * (NOISE_FACTOR * max(info.residual, np.finfo(float).eps))
    scaled_log = tau ** (-config.alpha0 / 2) * I.logabs if not I.is_zero() else -math.inf
    return IndicatorSample(
        tau=float(tau),
        I=I,
        scaled_log=scaled_log,
        lower_bound=lower,
        upper_bound=upper,
        solver_residual=info.residual,
        noise_floor=floor,
        volume_form=volume_form,
        iterations=info.iterations,
    )


# decay envelope ----------------------------------------------------------------------


def obstacle_integral(config: ProblemConfig, probe: ProbeConfig, tau: float, beta: float,
                      weight=None) -> ScaledValue:
    """``int_D weight(dist(x, dD)) * v(x; beta)^2 dx`` by adaptive quadrature.

    Each ball of D is integrated in spherical shells about ``p``: the part of
    a shell of radius ``r`` inside a ball is a cap, so the integral reduces
    to ``2 pi int r^2 v(r)^2 int_cap weight dmu dr``.
    """
    k = tau ** (beta / 2)
    p = np.array(probe.p)
    total = ScaledValue(0.0)
    xg, wg = np.polynomial.legendre.leggauss(48)
    for ball in config.obstacle:
        c = np.array(ball.center)
        R = ball.radius
        L = float(np.linalg.norm(c - p))
        r_lo, r_hi = max(L - R, 0.0), L + R
        if probe.flavor == "ext":
            r_lo = max(r_lo, probe.eta * (1 + 1e-12))
        rr = np.array([r_lo, r_hi])
        ref = float(np.max(log_v(rr[:, None] * np.array([1.0, 0, 0]) + p, probe, k)))

        def cap(r: float) -> float:
            if L == 0.0:
                mu0 = -1.0 if r < R else 1.0
            else:
                mu0 = float(np.clip((r * r + L * L - R * R) / (2 * r * L), -1.0, 1.0))
            if mu0 >= 1.0:
                return 0.0
            if weight is None:
                return 1.0 - mu0
            mu = 0.5 * (1 - mu0) * xg + 0.5 * (1 + mu0)
            dc = np.sqrt(np.maximum(r * r + L * L - 2 * r * L * mu, 0.0))
            return 0.5 * (1 - mu0) * float(np.sum(wg * weight(np.maximum(R - dc, 0.0))))

        def integrand(r: float) -> float:
            lv = float(log_v(np.array([r, 0.0, 0.0]) + p, probe, k))
            return r * r * math.exp(2 * (lv - ref)) * cap(r)

        # the integrand is concentrated within ~1/(2k) of the nearest/farthest shell
        width = 1.0 / (2 * k)
        pts = [r_lo + width * j for j in (1, 4, 16) if r_lo + width * j < r_hi]
        pts += [r_hi - width * j for j in (1, 4, 16) if r_hi - width * j > r_lo]
        val, err = quad(integrand, r_lo, r_hi, epsabs=0.0, epsrel=1e-10, limit=500, points=sorted(pts))
        total = total + ScaledValue.from_float(2 * math.pi * val) * ScaledValue.from_log(2 * ref)
    return total


@dataclass
class EnvelopeReport:
    taus: np.ndarray
    J: list[ScaledValue]
    scaled_J_log: np.ndarray
    exponent: float
    intercept: float
    residual: float
    envelope_ratio_log: np.ndarray
    envelope_C2: float
    envelope_C2_lower: float
    envelope_holds: bool
    distance: float


def envelope_check(config: ProblemConfig, probe: ProbeConfig, tau_list, beta: float | None = None) -> EnvelopeReport:
    """Growth/decay of ``J = int_D (tau^{C dist^gamma} - 1) v^2`` and of ``int_D v^2``.

    Fits ``log J + 2 k d = c log tau + b`` (``k = tau^(beta/2)``, ``d`` the probe
    distance) by least squares; ``residual`` is the root-mean-square misfit.
    For the envelope ``int_D v^2 <= C2 tau^{-beta(m+2)} exp(-2 k d)``,
    ``envelope_C2`` is the smallest constant valid over the whole sweep and
    ``envelope_C2_lower`` the one calibrated on the lower half only;
    ``envelope_holds`` says whether the latter still bounds the upper half.
    """
    taus = np.asarray(sorted(tau_list), dtype=float)
    if len(taus) < 4:
        raise ConfigurationError("at least 4 tau values are needed for the scaling fit")
    beta = config.alpha0 if beta is None else beta
    prof = config.profile
    C = abs(prof.amplitude)
    gamma = prof.gamma if prof.kind == "power" else 0.0
    if C == 0:
        raise ConfigurationError("envelope_check needs a nonzero jump amplitude")
    d = probe_distance(probe, config.obstacle)
    J, plain = [], []
    for t in taus:
        lt = math.log(t)
        if gamma == 0:
            plain_t = obstacle_integral(config, probe, t, beta)
            J.append(plain_t * ScaledValue.from_float(math.expm1(C * lt)))
        else:
            J.append(obstacle_integral(config, probe, t, beta, weight=lambda s: np.expm1(C * s**gamma * lt)))
            plain_t = obstacle_integral(config, probe, t, beta)
        plain.append(plain_t)
    k = taus ** (beta / 2)
    y = np.array([j.logabs for j in J]) + 2 * k * d
    X = np.c_[np.log(taus), np.ones_like(taus)]
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = float(np.sqrt(np.mean((X @ coef - y) ** 2)))
    env = np.array([pl.logabs for pl in plain]) + beta * (probe.m + 2) * np.log(taus) + 2 * k * d
    half = max(2, len(taus) // 2)
    c2 = float(np.max(env[:half]))
    return EnvelopeReport(
        taus=taus,
        J=J,
        scaled_J_log=y,
        exponent=float(coef[0]),
        intercept=float(coef[1]),
        residual=resid,
        envelope_ratio_log=env,
        envelope_C2=math.exp(float(np.max(env))),
        envelope_C2_lower=math.exp(c2),
        envelope_holds=bool(np.all(env <= c2 + 1e-9)),
        distance=d,
    )
