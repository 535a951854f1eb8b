"""Independent checks of the closed-form background solutions.

Three oracles, each computed without the closed forms it tests:

* brute-force volume quadrature of the defining convolution against ``v``;
* exact coefficient integrals against their leading large-``k`` asymptotics;
* the 7-point finite-difference residual of ``(Delta - tau**alpha0) w0``,
  whose observed convergence order should be two.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import BoxDomain, ProbeConfig
from .special import (
    coeff_a,
    coeff_a_asymptotic,
    coeff_b,
    coeff_b_asymptotic,
    log_v,
    log_w0,
    v_quadrature_oracle,
)

__all__ = [
    "OracleReport",
    "sample_points",
    "closed_form_errors",
    "asymptotic_ratio",
    "pde_residual_order",
    "run_oracle_suite",
]


@dataclass
class OracleReport:
    closed_form_max_rel: float
    asymptotic: list[tuple[str, int, float, float]] = field(default_factory=list)
    pde_orders: list[float] = field(default_factory=list)

    @property
    def asymptotic_max_dev(self) -> float:
        return max((abs(r - 1) for *_, r in self.asymptotic), default=0.0)

    @property
    def pde_min_order(self) -> float:
        return min(self.pde_orders, default=math.nan)

    def rows(self) -> list[tuple[str, str, float]]:
        out = [("closed_form", "max_rel_error", self.closed_form_max_rel)]
        for flavor, m, c, r in self.asymptotic:
            out.append(("asymptotic", f"{flavor} m={m} k*L={c:g}", r))
        for i, o in enumerate(self.pde_orders):
            out.append(("pde_residual", f"point {i} order", o))
        return out


def sample_points(box: BoxDomain, n: int, seed: int = 0) -> np.ndarray:
    """``n`` uniform points in the box from a seeded generator."""
    rng = np.random.default_rng(seed)
    lo, hi = np.array(box.lo), np.array(box.hi)
    return lo + (hi - lo) * rng.random((n, 3))


def closed_form_errors(points, probe: ProbeConfig, ttilde: float) -> np.ndarray:
    """Relative difference between the closed form of ``v`` and direct quadrature."""
    pts = np.atleast_2d(np.asarray(points, float))
    closed = np.exp(log_v(pts, probe, ttilde))
    brute = np.array([v_quadrature_oracle(x, probe, ttilde) for x in pts])
    return np.abs(closed / brute - 1)


def asymptotic_ratio(probe: ProbeConfig, ttilde: float) -> float:
    """``a_m / a_m^asym`` (ext) or ``b_m / b_m^asym`` (int) at ``k = ttilde``."""
    if probe.flavor == "ext":
        return float(coeff_a(probe.m, probe.eta, ttilde) / coeff_a_asymptotic(probe.m, probe.eta, ttilde))
    return float(
        coeff_b(probe.m, probe.r1, probe.r2, ttilde) / coeff_b_asymptotic(probe.m, probe.r1, probe.r2, ttilde)
    )


def pde_residual_order(x, probe: ProbeConfig, tau: float, alpha0: float,
                       steps=(0.04, 0.02, 0.01, 0.005)) -> tuple[np.ndarray, float]:
    """Scaled residual ``|Delta_h w0 - tau**alpha0 w0| / (tau**alpha0 w0)`` per step, and the least observed order."""
    x = np.asarray(x, float)
    ref = float(log_w0(x, probe, tau, alpha0))
    shift = tau**alpha0
    res = []
    for h in steps:
        pts = [x]
        for i in range(3):
            e = np.zeros(3)
            e[i] = h
            pts += [x + e, x - e]
        w = np.exp(log_w0(np.array(pts), probe, tau, alpha0) - ref)
        lap = (np.sum(w[1:]) - 6 * w[0]) / (h * h)
        res.append(abs(lap - shift * w[0]) / (shift * w[0]))
    res = np.array(res)
    ratios = np.log2(res[:-1] / res[1:]) / np.log2(np.array(steps[:-1]) / np.array(steps[1:]))
    return res, float(np.min(ratios))


def run_oracle_suite(probe: ProbeConfig, box: BoxDomain, alpha0: float, n_points: int = 20,
                     ttilde: float = 2.0, seed: int = 0,
                     asymptotic_ks=(30.0, 60.0, 120.0), pde_tau: float = 16.0) -> OracleReport:
    """Run all three oracles for ``probe`` with sample points drawn from ``box``.

    ``asymptotic_ks`` are values of ``k * L`` with ``L = eta`` (ext) or ``r1`` (int).
    """
    pts = sample_points(box, n_points, seed)
    errs = closed_form_errors(pts, probe, ttilde)
    L = probe.eta if probe.flavor == "ext" else probe.r1
    asym = [(probe.flavor, probe.m, c, asymptotic_ratio(probe, c / L)) for c in asymptotic_ks]
    orders = [pde_residual_order(x, probe, pde_tau, alpha0)[1] for x in pts[:5]]
    return OracleReport(float(np.max(errs)), asym, orders)
