"""Sweeps over tau, distance extraction and the threshold classification.

The indicator decays like ``tau**c * exp(-2 * tau**(alpha0/2) * d)``.  The
distance ``d`` between the probe support and the obstacle is read off by a
three-parameter least-squares fit of ``log|I|``; the sign of the jump is the
stable sign of ``I`` at large ``tau``.
"""

from __future__ import annotations

import hashlib
import logging
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_consistent_length, check_is_fitted

from .exceptions import ConfigurationError, EnclosureError, FitError, NumericalError
from .geometry import ProblemConfig, ProbeConfig, probe_distance
from .indicator import IndicatorSample, indicator_boundary
from .scaled import ScaledValue

__all__ = [
    "OVERFLOW_GUARD",
    "SweepResult",
    "SweepFit",
    "ThresholdResult",
    "EnclosureRegressor",
    "config_fingerprint",
    "geometric_schedule",
    "run_sweep",
    "jump_sign",
    "extract_distance",
    "threshold_test",
    "analytic_branch",
]

log = logging.getLogger(__name__)

OVERFLOW_GUARD = 600.0
MIN_FIT_SAMPLES = 4
THRESHOLD_BAND = 0.05

JumpSign = Literal["positive", "negative", "none"]
Branch = Literal["tends_to_zero", "tends_to_plus_inf", "tends_to_minus_inf", "indeterminate"]


def config_fingerprint(config: ProblemConfig, probe: ProbeConfig) -> str:
    """Short stable hash of the geometry, order profile and probe."""
    text = repr((config, probe)).encode()
    return hashlib.sha256(text).hexdigest()[:16]


def geometric_schedule(ttilde_min: float, ttilde_max: float, count: int, alpha0: float) -> list[float]:
    """``count`` values of tau whose ``tau**(alpha0/2)`` is geometric on ``[ttilde_min, ttilde_max]``."""
    if count < 1 or not 0 < ttilde_min <= ttilde_max:
        raise ConfigurationError("need count >= 1 and 0 < ttilde_min <= ttilde_max")
    tt = np.geomspace(ttilde_min, ttilde_max, count)
    return [float(t) for t in tt ** (2.0 / alpha0)]


@dataclass
class SweepResult:
    samples: list[IndicatorSample]
    fingerprint: str
    alpha0: float
    distance_exact: float
    config: ProblemConfig | None = field(default=None, repr=False)
    probe: ProbeConfig | None = field(default=None, repr=False)

    @property
    def taus(self) -> np.ndarray:
        return np.array([s.tau for s in self.samples])

    @property
    def usable(self) -> list[IndicatorSample]:
        return [s for s in self.samples if s.usable]

    def __len__(self) -> int:
        return len(self.samples)


@dataclass
class SweepFit:
    distance_estimate: float
    jump_sign: JumpSign
    prefactor_exponent: float
    fit_residual: float
    tau0_empirical: float
    intercept: float = 0.0
    n_used: int = 0
    warnings: list[str] = field(default_factory=list)


@dataclass
class ThresholdResult:
    T: float
    classification: Branch
    trend_slope: float
    corroborated: bool
    two_d: float


def _failed_sample(tau: float, message: str) -> IndicatorSample:
    zero = ScaledValue(0.0)
    return IndicatorSample(
        tau=float(tau), I=zero, scaled_log=-math.inf, lower_bound=zero, upper_bound=zero,
        solver_residual=math.nan, noise_floor=zero, error=message,
    )


def _one_sample(args) -> IndicatorSample:
    tau, config, probe, subfaces = args
    try:
        return indicator_boundary(tau, config, probe, subfaces=subfaces)
    except EnclosureError as exc:
        return _failed_sample(tau, f"{type(exc).__name__}: {exc}")


def run_sweep(config: ProblemConfig, probe: ProbeConfig, tau_schedule: Sequence[float],
              workers: int = 1, subfaces: int = 1) -> SweepResult:
    """Evaluate the indicator at every ``tau`` of the schedule.

    Samples are independent; with ``workers > 1`` they run in a process pool.
    A failing sample is recorded with its error message; only a sweep in
    which every sample fails raises.
    """
    taus = [float(t) for t in tau_schedule]
    if not taus:
        raise ConfigurationError("empty tau schedule")
    if any(b <= a for a, b in zip(taus, taus[1:])):
        raise ConfigurationError("tau schedule must be strictly increasing")
    if taus[0] <= 1:
        raise ConfigurationError(f"tau must exceed 1, got {taus[0]}")
    probe.check_against(config.box)
    d = probe_distance(probe, config.obstacle)
    worst = 2 * taus[-1] ** (config.alpha0 / 2) * d
    if worst > OVERFLOW_GUARD:
        raise ConfigurationError(
            f"overflow guard: 2 * tau^(alpha0/2) * dist = {worst:.1f} exceeds {OVERFLOW_GUARD:.0f}"
        )
    jobs = [(t, config, probe, subfaces) for t in taus]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
            samples = list(pool.map(_one_sample, jobs))
    else:
        samples = [_one_sample(j) for j in jobs]
    for s in samples:
        if s.error:
            log.warning("tau=%.6g failed: %s", s.tau, s.error)
        else:
            log.info("tau=%.6g  log|I|=%.4f  residual=%.2e", s.tau, s.I.logabs if not s.I.is_zero() else -math.inf,
                     s.solver_residual)
    if all(s.error for s in samples):
        raise NumericalError(f"all {len(samples)} sweep samples failed; first: {samples[0].error}")
    return SweepResult(samples, config_fingerprint(config, probe), config.alpha0, d, config, probe)


class EnclosureRegressor(RegressorMixin, BaseEstimator):
    """Least-squares model ``log|I| = -2 d tau**(alpha0/2) + c log(tau) + b``.

    Parameters
    ----------
    alpha0 : float
        Background order; sets the effective rate ``tau**(alpha0/2)``.
    clip_distance : bool
        Report ``max(d, 0)`` as ``distance_``; the raw value is kept in ``raw_distance_``.

    ``X`` holds ``tau`` in a single column and ``y`` the values ``log|I(tau)|``.
    """

    def __init__(self, alpha0: float = 0.5, clip_distance: bool = True):
        self.alpha0 = alpha0
        self.clip_distance = clip_distance

    def _design(self, X) -> np.ndarray:
        tau = X[:, 0]
        if np.any(tau <= 1):
            raise ValueError("tau values must exceed 1")
        return np.c_[tau ** (self.alpha0 / 2), np.log(tau), np.ones_like(tau)]

    def fit(self, X, y, sample_weight=None):
        if not 0 < self.alpha0 < 1:
            raise ValueError(f"alpha0 must lie in (0, 1), got {self.alpha0}")
        X = check_array(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64).ravel()
        check_consistent_length(X, y)
        if X.shape[1] != 1:
            raise ValueError(f"expected a single tau column, got {X.shape[1]}")
        if X.shape[0] < MIN_FIT_SAMPLES:
            raise FitError(f"need at least {MIN_FIT_SAMPLES} samples, got {X.shape[0]}")
        if not np.all(np.isfinite(y)):
            raise ValueError("log|I| values must be finite")
        w = np.ones_like(y) if sample_weight is None else np.asarray(sample_weight, dtype=np.float64)
        check_consistent_length(y, w)
        sw = np.sqrt(w / np.max(w))
        A = self._design(X)
        coef, *_ = np.linalg.lstsq(A * sw[:, None], y * sw, rcond=None)
        self.coef_ = coef
        self.raw_distance_ = float(-coef[0] / 2)
        self.distance_ = max(self.raw_distance_, 0.0) if self.clip_distance else self.raw_distance_
        self.prefactor_exponent_ = float(coef[1])
        self.intercept_ = float(coef[2])
        r = A @ coef - y
        self.residual_ = float(np.sqrt(np.sum(w * r * r) / np.sum(w)))
        self.n_features_in_ = 1
        return self

    def predict(self, X) -> np.ndarray:
        check_is_fitted(self, "coef_")
        X = check_array(X, dtype=np.float64)
        return self._design(X) @ self.coef_


def _sign_name(s: int) -> JumpSign:
    return "positive" if s > 0 else "negative" if s < 0 else "none"


def jump_sign(sweep: SweepResult) -> tuple[JumpSign, float, list[str]]:
    """Stable sign of I over the usable samples, the empirical tau0, and any warnings.

    ``tau0`` is the smallest usable tau from which the sign never changes.
    """
    used = sweep.usable
    if not used:
        return "none", math.nan, []
    signs = [s.sign for s in used]
    final = signs[-1]
    k = len(signs)
    while k > 0 and signs[k - 1] == final:
        k -= 1
    notes = []
    upper = signs[len(signs) // 2 :]
    if len(set(upper)) > 1:
        notes.append("indicator sign is not stable over the upper half of the sweep")
    return _sign_name(final), used[k].tau, notes


def extract_distance(sweep: SweepResult) -> SweepFit:
    """Fit the decay model to the usable samples of a sweep.

    Raises
    ------
    FitError
        Fewer than four samples lie above their noise floor.  The exception
        carries ``jump_sign`` (``"none"`` when no sample is usable).
    """
    sign, tau0, notes = jump_sign(sweep)
    used = sweep.usable
    if len(used) < MIN_FIT_SAMPLES:
        err = FitError(
            f"fit refused: {len(used)} of {len(sweep)} samples above the noise floor "
            f"(need {MIN_FIT_SAMPLES})"
        )
        err.jump_sign = sign
        raise err
    for msg in notes:
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
    X = np.array([[s.tau] for s in used])
    y = np.array([s.I.logabs for s in used])
    w = 1.0 / np.maximum([s.solver_residual for s in used], np.finfo(float).eps)
    reg = EnclosureRegressor(alpha0=sweep.alpha0).fit(X, y, sample_weight=w)
    return SweepFit(
        distance_estimate=reg.distance_,
        jump_sign=sign,
        prefactor_exponent=reg.prefactor_exponent_,
        fit_residual=reg.residual_,
        tau0_empirical=tau0,
        intercept=reg.intercept_,
        n_used=len(used),
        warnings=notes,
    )


def analytic_branch(T: float, distance: float, sign: JumpSign, band: float = 0.0) -> Branch:
    """Limit of ``exp(tau**(alpha0/2) T) I(tau)``: zero below ``2 d``, signed infinity above."""
    two_d = 2 * distance
    if abs(T - two_d) <= band * two_d:
        return "indeterminate"
    if T < two_d or sign == "none":
        return "tends_to_zero"
    return "tends_to_plus_inf" if sign == "positive" else "tends_to_minus_inf"


def threshold_test(sweep: SweepResult, T: float, fit: SweepFit | None = None) -> ThresholdResult:
    """Classify ``exp(tau**(alpha0/2) T) I(tau)`` as ``tau`` grows.

    The branch is decided from the fitted distance and jump sign; values of
    ``T`` within 5% of ``2 d`` are reported as ``"indeterminate"``.  As a
    check, the slope of ``tau~ T + log|I| - c log(tau)`` against ``tau~``
    over the top half of the usable samples is returned in ``trend_slope``,
    and ``corroborated`` tells whether its sign agrees with the branch.
    """
    if not T >= 0:
        raise ConfigurationError(f"T must be nonnegative, got {T}")
    fit = extract_distance(sweep) if fit is None else fit
    branch = analytic_branch(T, fit.distance_estimate, fit.jump_sign, THRESHOLD_BAND)
    used = sweep.usable
    top = used[len(used) // 2 :]
    tau = np.array([s.tau for s in top])
    tt = tau ** (sweep.alpha0 / 2)
    y = tt * T + np.array([s.I.logabs for s in top]) - fit.prefactor_exponent * np.log(tau)
    if len(top) >= 2:
        slope = float(np.polyfit(tt, y, 1)[0])
    else:
        slope = math.nan
    if branch == "tends_to_zero":
        ok = slope < 0
    elif branch == "indeterminate":
        ok = True
    else:
        ok = slope > 0
    return ThresholdResult(T=float(T), classification=branch, trend_slope=slope, corroborated=bool(ok),
                           two_d=2 * fit.distance_estimate)
