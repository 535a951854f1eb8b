"""Measurement side: probe synthesis, Bromwich-type time series and Laplace transforms.

A Laplace-domain quantity ``F(tau)`` with ``tau = 1 + i s`` is taken to the
time domain by

    f(t) = exp(t) / (2 pi) * int exp(i s t) F(1 + i s) ds
         = exp(t) / pi * Re int_0^S exp(i s t) F(1 + i s) ds,

using ``F(1 - i s) = conj F(1 + i s)``.  The ``s`` integral uses composite
Gauss-Legendre panels of width ``pi / T_max``; the truncation point ``S`` is
chosen from the algebraic decay ``|F| ~ |s|**(alpha0 - 6)``.  Time series are
stored damped, ``exp(-t) f(t)``, so that long windows stay finite.
"""

from __future__ import annotations

import csv
import hashlib
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import simpson

from .elliptic import Grid, SolveInfo, assemble, boundary_faces, neumann_trace, solve_scattered_complex
from .exceptions import ConfigurationError, NumericalError
from .geometry import ProblemConfig, ProbeConfig, order_field
from .scaled import ScaledValue
from .special import log_w0, radial_log_derivative, w0_complex, w0_normal_derivative_complex

__all__ = [
    "SPECTRAL_POWER",
    "TimeSeries",
    "ComplexFieldSlice",
    "Measurement",
    "spectral_nodes",
    "choose_truncation",
    "synthesize",
    "synthesize_probe",
    "laplace_transform",
    "laplace_transform_many",
    "simulate_measurement",
    "indicator_from_data",
    "export_measurement_csv",
]

log = logging.getLogger(__name__)

# weight (1 + i s)**-SPECTRAL_POWER of the probe; fixed, it only ensures integrability
SPECTRAL_POWER = 5


@dataclass
class TimeSeries:
    """Real signals ``f_j(t)`` on a uniform grid, stored as ``exp(-t) f_j(t)``.

    ``damped`` has shape ``(n_t, n_points)``.  ``truncation_error`` bounds the
    damped signal error caused by cutting the spectral integral at ``S``;
    ``imag_norm`` is the spurious imaginary part relative to the signal norm
    (zero by construction when the symmetric reduction is used).
    """

    times: np.ndarray
    damped: np.ndarray = field(repr=False)
    S: float = math.inf
    truncation_error: float = 0.0
    imag_norm: float = 0.0

    def __post_init__(self) -> None:
        t = np.asarray(self.times, dtype=float)
        if t.ndim != 1 or len(t) < 3:
            raise ConfigurationError("time grid needs at least 3 points")
        dt = np.diff(t)
        if t[0] != 0.0 or np.any(dt <= 0) or np.max(np.abs(dt - dt[0])) > 1e-9 * dt[0]:
            raise ConfigurationError("time grid must be uniform and start at t = 0")
        d = np.asarray(self.damped, dtype=float)
        if d.ndim == 1:
            d = d[:, None]
        if d.shape[0] != len(t):
            raise ConfigurationError("series length does not match the time grid")
        if not np.all(np.isfinite(d)):
            raise NumericalError("non-finite time series values")
        self.times, self.damped = t, d

    @property
    def values(self) -> np.ndarray:
        return self.damped * np.exp(self.times)[:, None]

    @property
    def t_max(self) -> float:
        return float(self.times[-1])

    @property
    def n_points(self) -> int:
        return self.damped.shape[1]


@dataclass
class ComplexFieldSlice:
    """Boundary values at a single spectral parameter ``1 + i s``."""

    s: float
    values: np.ndarray = field(repr=False)
    info: SolveInfo | None = None

    def conjugate(self) -> ComplexFieldSlice:
        return ComplexFieldSlice(-self.s, np.conj(self.values), self.info)


@dataclass
class Measurement:
    """Neumann data at every boundary face of the grid."""

    series: TimeSeries
    points: np.ndarray = field(repr=False)
    normals: np.ndarray = field(repr=False)
    areas: np.ndarray = field(repr=False)
    fingerprint: str = ""
    n_solves: int = 0
    s_scattered: float = 0.0
    max_residual: float = 0.0


def spectral_nodes(S: float, t_max: float, n_quad: int = 6, symmetric: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre nodes on ``[0, S]`` (or ``[-S, S]``) with panels of width ``<= pi / t_max``."""
    if not (S > 0 and t_max > 0 and n_quad >= 1):
        raise ConfigurationError("spectral grid needs S > 0, t_max > 0 and n_quad >= 1")
    xg, wg = np.polynomial.legendre.leggauss(n_quad)
    n_pan = max(1, math.ceil(S / (math.pi / t_max)))
    edges = np.linspace(0.0, S, n_pan + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    s = (mid[:, None] + half[:, None] * xg).ravel()
    w = (half[:, None] * wg).ravel()
    if symmetric:
        return s, w
    return np.concatenate([-s[::-1], s]), np.concatenate([w[::-1], w])


def choose_truncation(F: Callable[[np.ndarray], np.ndarray], alpha0: float, tol: float,
                      s_max: float = 1e4) -> tuple[float, float]:
    """Smallest probe ``S`` whose algebraic tail estimate is below ``tol``.

    ``F`` maps an array of ``s`` to values of shape ``(n_s, n_points)``.  The
    tail ``int_S^inf |F| ds`` is estimated by ``|F(S)| S / (5 - alpha0)`` (from
    ``|F| ~ s**(alpha0 - 6)``) and compared with ``tol * int_0^S |F| ds``
    pointwise.  Returns ``(S, relative tail estimate)``.
    """
    grid = np.geomspace(1.0, s_max, 81)
    s_all = np.concatenate([np.linspace(0.0, 1.0, 9)[:-1], grid])
    mag = np.abs(F(s_all))
    mag = mag.reshape(len(s_all), -1)
    # running integral of |F| by the trapezoid rule on the probe grid
    seg = 0.5 * (mag[1:] + mag[:-1]) * np.diff(s_all)[:, None]
    cum = np.vstack([np.zeros((1, mag.shape[1])), np.cumsum(seg, axis=0)])
    scale = np.where(cum[-1] > 0, cum[-1], 1.0)
    rel = np.max(mag * s_all[:, None] / (5 - alpha0) / scale, axis=1)
    # the estimate must stay below tol from S onwards
    ok = np.minimum.accumulate((rel <= tol)[::-1])[::-1]
    idx = np.nonzero(ok & (s_all >= 1.0))[0]
    if len(idx) == 0:
        raise ConfigurationError(
            f"spectral tail estimate {rel[-1]:.2e} still exceeds {tol:.1e} at s = {s_max:.0f}"
        )
    i = int(idx[0])
    return float(s_all[i]), float(rel[i])


def _synthesis_matrix(times: np.ndarray, s: np.ndarray, w: np.ndarray) -> np.ndarray:
    return np.exp(1j * np.outer(times, s)) * w


def synthesize(F_nodes: np.ndarray, s: np.ndarray, w: np.ndarray, times: np.ndarray,
               symmetric: bool = True) -> tuple[np.ndarray, float]:
    """Damped time signals ``exp(-t) f(t)`` from spectral samples on the nodes.

    Returns the real signals and the relative size of the discarded imaginary part.
    """
    E = _synthesis_matrix(times, s, w)
    out = E @ F_nodes.reshape(len(s), -1)
    if symmetric:
        return out.real / math.pi, 0.0
    nrm = float(np.linalg.norm(out.real))
    imag = float(np.linalg.norm(out.imag)) / nrm if nrm > 0 else 0.0
    return out.real / (2 * math.pi), imag


def _probe_spectrum(x: np.ndarray, probe: ProbeConfig, alpha0: float) -> Callable[[np.ndarray], np.ndarray]:
    def F(s: np.ndarray) -> np.ndarray:
        tau = 1.0 + 1j * np.asarray(s, dtype=float)
        return tau[:, None] ** -SPECTRAL_POWER * w0_complex(x, probe, tau, alpha0)
    return F


def synthesize_probe(x, t_grid, probe: ProbeConfig, alpha0: float, s_truncation: float | None = None,
                     n_quad: int = 6, tol: float = 1e-9, symmetric: bool = True) -> TimeSeries:
    """Probe ``g(x, t)`` at boundary points ``x`` (shape ``(n, 3)``), Laplace transform ``tau**-5 w0``.

    ``s_truncation=None`` picks ``S`` from the decay estimate; an explicit
    ``S`` whose tail estimate exceeds ``tol`` is rejected.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    times = np.asarray(t_grid, dtype=float)
    F = _probe_spectrum(x, probe, alpha0)
    S_auto, est = choose_truncation(F, alpha0, tol)
    if s_truncation is None:
        S = S_auto
    else:
        S = float(s_truncation)
        if S < S_auto:
            est = _tail_at(F, S, alpha0)
            if est > tol:
                raise ConfigurationError(
                    f"spectral truncation S = {S:g} leaves a tail of about {est:.2e} > {tol:.1e}; "
                    f"use S >= {S_auto:g}"
                )
    s, w = spectral_nodes(S, times[-1], n_quad, symmetric)
    damped, imag = synthesize(F(s), s, w, times, symmetric)
    return TimeSeries(times, damped, S=S, truncation_error=est, imag_norm=imag)


def _tail_at(F, S: float, alpha0: float) -> float:
    s, w = spectral_nodes(S, 1.0, 8)
    mag = np.abs(F(np.append(s, S)))
    body = np.sum(mag[:-1] * w[:, None], axis=0)
    return float(np.max(mag[-1] * S / (5 - alpha0) / np.where(body > 0, body, 1.0)))


def laplace_transform_many(series: TimeSeries, tau: float) -> tuple[np.ndarray, np.ndarray]:
    """``int_0^T exp(-tau t) f(t) dt`` per point by Simpson's rule, plus tail bounds.

    The tail bound is ``max|exp(-t) f| exp(-(tau-1) T) / (tau - 1)`` over the
    last tenth of the window.
    """
    if not tau > 1:
        raise ConfigurationError(f"tau must exceed 1, got {tau}")
    t = series.times
    kernel = np.exp(-(tau - 1) * t)[:, None]
    vals = simpson(kernel * series.damped, x=t, axis=0)
    late = series.damped[int(0.9 * len(t)) :]
    tail = np.max(np.abs(late), axis=0) * math.exp(-(tau - 1) * t[-1]) / (tau - 1)
    return vals, tail


def laplace_transform(series: TimeSeries, tau: float, tol: float = 1e-6) -> ScaledValue:
    """Laplace transform of a single-point series; raises when the window is too short."""
    if series.n_points != 1:
        raise ConfigurationError("laplace_transform takes a single-point series; use laplace_transform_many")
    vals, tail = laplace_transform_many(series, tau)
    v, tb = float(vals[0]), float(tail[0])
    if tb > tol * max(abs(v), np.finfo(float).tiny):
        raise ConfigurationError(
            f"tail bound {tb:.2e} exceeds tolerance {tol:.1e} * |value|; increase T_max beyond {series.t_max:g}"
        )
    return ScaledValue.from_float(v)


# simulated measurement -----------------------------------------------------------


def _scattered_trace(job) -> tuple[np.ndarray, SolveInfo]:
    config, probe, s, rtol = job
    tau = complex(1.0, s)
    grid = Grid(config.box)
    op = assemble(grid, order_field(config), tau)
    try:
        z, info = solve_scattered_complex(config, probe, tau, rtol=rtol, op=op)
    except NumericalError as exc:
        raise NumericalError(f"spectral node s = {s:.6g}: {exc}", achieved=exc.achieved) from exc
    return neumann_trace(z, order=1).values, info


def _fingerprint(config: ProblemConfig, probe: ProbeConfig) -> str:
    return hashlib.sha256(repr((config, probe)).encode()).hexdigest()[:16]


def simulate_measurement(config: ProblemConfig, probe: ProbeConfig, t_grid, s_truncation: float | None = None,
                         n_quad: int = 6, tol: float = 1e-9, scattered_tol: float = 1e-6, rtol: float = 1e-8,
                         workers: int = 1) -> Measurement:
    """Neumann data ``d_nu u(x, t)`` at all boundary faces for the probe input.

    On the line ``tau = 1 + i s`` the solution is ``tau**-5 w0 + z`` with ``z``
    from a complex-shifted scattered solve; the background part of the trace is
    analytic.  Scattered solves stop once ``|d_nu z|`` has decayed so that its
    algebraic tail is below ``scattered_tol`` of its integral.
    """
    probe.check_against(config.box)
    times = np.asarray(t_grid, dtype=float)
    grid = Grid(config.box)
    _, P, Nrm, A = boundary_faces(grid)
    a0 = config.alpha0

    def background(s: np.ndarray) -> np.ndarray:
        tau = 1.0 + 1j * np.asarray(s, dtype=float)
        return tau[:, None] ** -SPECTRAL_POWER * w0_normal_derivative_complex(P, Nrm, probe, tau, a0)

    S_auto, est = choose_truncation(background, a0, tol)
    S = S_auto if s_truncation is None else float(s_truncation)
    s, w = spectral_nodes(S, times[-1], n_quad)
    F = background(s)

    zero_jump = not np.any(order_field(config).values != a0)
    n_solves, s_z, worst = 0, 0.0, 0.0
    if not zero_jump:
        per_panel = n_quad
        acc = np.zeros(len(P))
        peak = 0.0
        start = 0
        while start < len(s):
            jobs = [(config, probe, float(si), rtol) for si in s[start : start + per_panel]]
            if workers > 1:
                with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
                    res = list(pool.map(_scattered_trace, jobs))
            else:
                res = [_scattered_trace(j) for j in jobs]
            for j, (vals, info) in enumerate(res):
                F[start + j] += vals
                worst = max(worst, info.residual)
            n_solves += len(res)
            block = np.array([np.abs(v) for v, _ in res])
            acc += np.sum(block * w[start : start + len(res), None], axis=0)
            peak = max(peak, float(np.max(block)))
            s_end = float(s[start + len(res) - 1])
            s_z = s_end
            start += len(res)
            last = float(np.max(block[-1] * s_end / (5 - a0) / np.where(acc > 0, acc, 1.0)))
            if s_end >= 1.0 and last < scattered_tol:
                break
        log.info("scattered solves: %d nodes up to s = %.3g (S = %.3g)", n_solves, s_z, S)
    damped, _ = synthesize(F, s, w, times)
    series = TimeSeries(times, damped, S=S, truncation_error=est)
    return Measurement(series, P, Nrm, A, _fingerprint(config, probe), n_solves, s_z, worst)


def _real_w0_and_flux(points, normals, probe: ProbeConfig, tau: float, alpha0: float):
    lw = log_w0(points, probe, tau, alpha0)
    d = points - np.array(probe.p)
    r = np.linalg.norm(d, axis=-1)
    cos = np.sum(d * normals, axis=-1) / r
    g = radial_log_derivative(r, probe, tau ** (alpha0 / 2))
    return lw, g * cos


def indicator_from_data(measurement: Measurement, tau: float, probe: ProbeConfig, alpha0: float,
                        tol: float = 1e-6) -> ScaledValue:
    """Indicator from boundary data: ``sum area (d_nu u_hat - tau**-5 d_nu w0) tau**5 w0``.

    ``d_nu u_hat`` is the numerical Laplace transform of the measured series;
    the background subtraction is analytic, so the result inherits the
    cancellation between the two terms.
    """
    vals, tail = laplace_transform_many(measurement.series, tau)
    if np.max(tail) > tol * np.max(np.abs(vals)):
        raise ConfigurationError(
            f"tail bound {np.max(tail):.2e} too large at tau = {tau:g}; increase T_max"
        )
    lw, glog = _real_w0_and_flux(measurement.points, measurement.normals, probe, tau, alpha0)
    top = float(np.max(lw))
    w0s = np.exp(lw - top)
    # d_nu w0 tau**-5 = w0 * glog * tau**-5
    resid = vals - math.exp(top) * w0s * glog * tau**-SPECTRAL_POWER
    total = float(np.sum(measurement.areas * resid * w0s))
    return ScaledValue.from_float(total) * ScaledValue.from_log(top + SPECTRAL_POWER * math.log(tau))


def export_measurement_csv(measurement: Measurement, path, t_stride: int = 1) -> None:
    """Write ``face_id, t, value`` rows after a ``#``-prefixed header with the grid fingerprint."""
    if t_stride < 1:
        raise ConfigurationError("t_stride must be >= 1")
    ser = measurement.series
    vals = ser.values
    idx = range(0, len(ser.times), t_stride)
    with open(path, "w", newline="") as fh:
        fh.write(f"# fingerprint={measurement.fingerprint}\n")
        fh.write(f"# faces={len(measurement.areas)} t_max={ser.t_max!r} n_t={len(ser.times)} t_stride={t_stride}\n")
        fh.write(f"# spectral_S={ser.S!r} scattered_s_max={measurement.s_scattered!r}\n")
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["face_id", "t", "value"])
        for f in range(vals.shape[1]):
            for i in idx:
                out.writerow([f, repr(float(ser.times[i])), repr(float(vals[i, f]))])
