"""Extended-range scalars carried as ``mantissa * exp(log_scale)``.

Exponential factors such as ``exp(tau_tilde * eta)`` overflow doubles long
before the asymptotic regime is reached, so every quantity that can become
exponentially large or small is kept in this form.  The mantissa is
normalised to ``1 <= |mantissa| < e`` and ``log_scale`` is integer valued.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import total_ordering

import numpy as np

__all__ = ["ScaledValue", "logsumexp_signed"]


@total_ordering
@dataclass(frozen=True)
class ScaledValue:
    mantissa: float
    log_scale: float = 0.0

    def __post_init__(self) -> None:
        m = float(self.mantissa)
        s = float(self.log_scale)
        if not (math.isfinite(m) and math.isfinite(s)):
            raise ValueError(f"non-finite scaled value ({m!r}, {s!r})")
        if m == 0.0:
            object.__setattr__(self, "mantissa", 0.0)
            object.__setattr__(self, "log_scale", 0.0)
            return
        total = math.log(abs(m)) + s
        shift = math.floor(total)
        mant = math.copysign(math.exp(total - shift), m)
        # exp(total - shift) can round up to e
        if abs(mant) >= math.e:
            shift += 1
            mant = math.copysign(math.exp(total - shift), m)
        object.__setattr__(self, "mantissa", mant)
        object.__setattr__(self, "log_scale", float(shift))

    # construction

    @classmethod
    def from_log(cls, logabs: float, sign: float = 1.0) -> ScaledValue:
        """Build ``sign * exp(logabs)``; ``sign == 0`` or ``logabs == -inf`` gives zero."""
        if sign == 0 or logabs == -math.inf:
            return cls(0.0)
        shift = math.floor(logabs)
        return cls(math.copysign(math.exp(logabs - shift), sign), shift)

    @classmethod
    def from_float(cls, x: float) -> ScaledValue:
        return cls(float(x), 0.0)

    @classmethod
    def coerce(cls, x: ScaledValue | float) -> ScaledValue:
        return x if isinstance(x, ScaledValue) else cls.from_float(x)

    # accessors

    @property
    def sign(self) -> float:
        return float(np.sign(self.mantissa))

    @property
    def logabs(self) -> float:
        if self.mantissa == 0.0:
            return -math.inf
        return math.log(abs(self.mantissa)) + self.log_scale

    def is_zero(self) -> bool:
        return self.mantissa == 0.0

    def __float__(self) -> float:
        if self.mantissa == 0.0:
            return 0.0
        try:
            return self.mantissa * math.exp(self.log_scale)
        except OverflowError:
            return math.copysign(math.inf, self.mantissa)

    # arithmetic

    def __neg__(self) -> ScaledValue:
        return ScaledValue(-self.mantissa, self.log_scale)

    def __abs__(self) -> ScaledValue:
        return ScaledValue(abs(self.mantissa), self.log_scale)

    def __mul__(self, other: ScaledValue | float) -> ScaledValue:
        o = ScaledValue.coerce(other)
        return ScaledValue(self.mantissa * o.mantissa, self.log_scale + o.log_scale)

    __rmul__ = __mul__

    def __truediv__(self, other: ScaledValue | float) -> ScaledValue:
        o = ScaledValue.coerce(other)
        if o.mantissa == 0.0:
            raise ZeroDivisionError("division by zero ScaledValue")
        return ScaledValue(self.mantissa / o.mantissa, self.log_scale - o.log_scale)

    def __rtruediv__(self, other: float) -> ScaledValue:
        return ScaledValue.coerce(other) / self

    def __add__(self, other: ScaledValue | float) -> ScaledValue:
        o = ScaledValue.coerce(other)
        if o.mantissa == 0.0:
            return self
        if self.mantissa == 0.0:
            return o
        top = max(self.log_scale, o.log_scale)
        m = self.mantissa * math.exp(self.log_scale - top) + o.mantissa * math.exp(
            o.log_scale - top
        )
        return ScaledValue(m, top)

    __radd__ = __add__

    def __sub__(self, other: ScaledValue | float) -> ScaledValue:
        return self + (-ScaledValue.coerce(other))

    def __rsub__(self, other: float) -> ScaledValue:
        return ScaledValue.coerce(other) - self

    def __pow__(self, p: float) -> ScaledValue:
        if self.mantissa < 0:
            raise ValueError("fractional power of negative ScaledValue")
        if self.mantissa == 0.0:
            return ScaledValue(0.0)
        return ScaledValue.from_log(p * self.logabs)

    # ordering (by value)

    def _key(self) -> tuple[float, float]:
        if self.mantissa == 0.0:
            return (0.0, 0.0)
        s = self.sign
        return (s, s * self.logabs)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, (ScaledValue, int, float)):
            return NotImplemented
        o = ScaledValue.coerce(other)
        return self.mantissa == o.mantissa and self.log_scale == o.log_scale

    def __lt__(self, other: ScaledValue | float) -> bool:
        return self._key() < ScaledValue.coerce(other)._key()

    def __hash__(self) -> int:
        return hash((self.mantissa, self.log_scale))

    def rel_diff(self, other: ScaledValue | float) -> float:
        """``|self - other| / max(|self|, |other|)``, computed without overflow."""
        o = ScaledValue.coerce(other)
        top = max(abs(self), abs(o))
        if top.is_zero():
            return 0.0
        return float(abs(self - o) / top)

    def __repr__(self) -> str:
        return f"ScaledValue({self.mantissa!r}, {self.log_scale!r})"


def logsumexp_signed(logabs, signs, weights=None) -> ScaledValue:
    """Sum ``sign_i * w_i * exp(logabs_i)`` with a single rescale.

    The reduction uses ``np.sum`` (pairwise, single threaded) so the result
    does not depend on BLAS threading.
    """
    logabs = np.asarray(logabs, dtype=float).ravel()
    signs = np.asarray(signs, dtype=float).ravel()
    if weights is not None:
        w = np.asarray(weights, dtype=float).ravel()
        signs = signs * np.sign(w)
        with np.errstate(divide="ignore"):
            logabs = logabs + np.log(np.abs(w))
    live = (signs != 0) & np.isfinite(logabs)
    if not np.any(live):
        return ScaledValue(0.0)
    top = float(np.max(logabs[live]))
    total = float(np.sum(signs[live] * np.exp(logabs[live] - top)))
    return ScaledValue(total, 0.0) * ScaledValue.from_log(top)
