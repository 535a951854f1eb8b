"""Domain, obstacle and probe geometry, plus the set distances the method recovers.

Omega is an axis-aligned box, the obstacle D a finite union of disjoint balls.
All distances are closed form so that reconstructions can be compared with
exact targets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np

from .exceptions import ConfigurationError

__all__ = [
    "BoxDomain",
    "BallRegion",
    "ProbeConfig",
    "JumpProfile",
    "ProblemConfig",
    "ScalarField3D",
    "dist_point_to_set",
    "radius_of_enclosure",
    "probe_distance",
    "dist_to_boundary_of_D",
    "inside_obstacle",
    "order_field",
]


def _point(p) -> np.ndarray:
    a = np.asarray(p, dtype=float)
    if a.shape != (3,):
        raise ConfigurationError(f"expected a 3-vector, got shape {a.shape}")
    return a


@dataclass(frozen=True)
class BoxDomain:
    """Axis-aligned box ``[lo, hi]`` with ``n[i]`` grid intervals along axis ``i``."""

    lo: tuple[float, float, float]
    hi: tuple[float, float, float]
    n: tuple[int, int, int] = (32, 32, 32)

    def __post_init__(self) -> None:
        lo = tuple(float(v) for v in _point(self.lo))
        hi = tuple(float(v) for v in _point(self.hi))
        n = self.n
        if isinstance(n, (int, np.integer)):
            n = (int(n),) * 3
        n = tuple(int(v) for v in n)
        if len(n) != 3:
            raise ConfigurationError("grid counts need one entry per axis")
        if any(a >= b for a, b in zip(lo, hi)):
            raise ConfigurationError(f"box requires lo < hi componentwise, got {lo} / {hi}")
        if any(v < 8 for v in n):
            raise ConfigurationError(f"at least 8 grid intervals per axis required, got {n}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "n", n)

    @property
    def spacing(self) -> np.ndarray:
        return (np.array(self.hi) - np.array(self.lo)) / np.array(self.n)

    @property
    def corners(self) -> np.ndarray:
        lo, hi = self.lo, self.hi
        return np.array(
            [[x, y, z] for x in (lo[0], hi[0]) for y in (lo[1], hi[1]) for z in (lo[2], hi[2])]
        )

    def with_resolution(self, n) -> BoxDomain:
        return BoxDomain(self.lo, self.hi, n)

    def distance_to(self, p) -> float:
        """Euclidean distance from ``p`` to the closed box (0 inside)."""
        p = _point(p)
        d = np.maximum(np.maximum(np.array(self.lo) - p, p - np.array(self.hi)), 0.0)
        return float(np.sqrt(np.sum(d * d)))

    def contains_ball(self, ball: BallRegion) -> bool:
        c = np.asarray(ball.center)
        return bool(
            np.all(c - ball.radius > np.array(self.lo)) and np.all(c + ball.radius < np.array(self.hi))
        )


@dataclass(frozen=True)
class BallRegion:
    center: tuple[float, float, float]
    radius: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "center", tuple(float(v) for v in _point(self.center)))
        if not self.radius > 0:
            raise ConfigurationError(f"ball radius must be positive, got {self.radius}")
        object.__setattr__(self, "radius", float(self.radius))


@dataclass(frozen=True)
class ProbeConfig:
    """Probe source: a ball ``B_eta`` outside Omega (``ext``) or a shell enclosing it (``int``)."""

    flavor: Literal["ext", "int"]
    p: tuple[float, float, float]
    m: int = 0
    eta: float | None = None
    r1: float | None = None
    r2: float | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "p", tuple(float(v) for v in _point(self.p)))
        if int(self.m) != self.m or self.m < 0:
            raise ConfigurationError(f"moment index m must be a nonnegative integer, got {self.m}")
        object.__setattr__(self, "m", int(self.m))
        if self.flavor == "ext":
            if self.eta is None or not self.eta > 0:
                raise ConfigurationError("ext probe needs eta > 0")
        elif self.flavor == "int":
            if self.r1 is None or self.r2 is None or not 0 < self.r1 < self.r2:
                raise ConfigurationError("int probe needs 0 < r1 < r2")
        else:
            raise ConfigurationError(f"unknown probe flavor {self.flavor!r}")

    def check_against(self, box: BoxDomain) -> None:
        """Enforce the admissibility of the probe relative to Omega."""
        if self.flavor == "ext":
            if not box.distance_to(self.p) > self.eta:
                raise ConfigurationError(
                    "closure(B_eta) and closure(Omega) must be disjoint "
                    "(B̄_η ∩ Ω̄ = ∅ violated): "
                    f"dist(p, Omega) = {box.distance_to(self.p):.6g} <= eta = {self.eta:.6g}"
                )
        else:
            far = float(np.max(np.linalg.norm(box.corners - np.array(self.p), axis=1)))
            if not far < self.r1:
                raise ConfigurationError(
                    "Omega must lie inside B_{R1} (Ω ⊂ B_{R₁} violated): "
                    f"farthest corner at {far:.6g} >= r1 = {self.r1:.6g}"
                )


@dataclass(frozen=True)
class JumpProfile:
    """Deviation ``h`` of the order inside D.

    ``constant``: ``h = amplitude``.  ``power``: ``h = amplitude * dist(x, dD)**gamma``.
    The sign of ``amplitude`` selects the jump direction.
    """

    kind: Literal["constant", "power"] = "constant"
    amplitude: float = 0.0
    gamma: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in ("constant", "power"):
            raise ConfigurationError(f"unknown jump profile kind {self.kind!r}")
        if self.gamma < 0:
            raise ConfigurationError("gamma must be >= 0")

    @property
    def sign(self) -> int:
        return int(np.sign(self.amplitude))

    def evaluate(self, dist_to_boundary: np.ndarray, inside: np.ndarray) -> np.ndarray:
        dist_to_boundary = np.asarray(dist_to_boundary, dtype=float)
        if self.kind == "constant" or self.gamma == 0:
            h = np.full(dist_to_boundary.shape, float(self.amplitude))
        else:
            h = self.amplitude * dist_to_boundary**self.gamma
        return np.where(inside, h, 0.0)


@dataclass(frozen=True)
class ScalarField3D:
    """Values on the ``(n+1)**3`` grid nodes of a box, boundary nodes included.

    The represented field is ``values * exp(log_scale)``.
    """

    box: BoxDomain
    values: np.ndarray = field(repr=False)
    log_scale: float = 0.0

    def __post_init__(self) -> None:
        shape = tuple(k + 1 for k in self.box.n)
        if self.values.shape != shape:
            raise ConfigurationError(f"field shape {self.values.shape} does not match grid {shape}")

    @property
    def interior(self) -> np.ndarray:
        return self.values[1:-1, 1:-1, 1:-1]


@dataclass(frozen=True)
class ProblemConfig:
    alpha0: float
    box: BoxDomain
    obstacle: tuple[BallRegion, ...]
    profile: JumpProfile = JumpProfile()

    def __post_init__(self) -> None:
        obstacle = tuple(self.obstacle)
        object.__setattr__(self, "obstacle", obstacle)
        if not 0 < self.alpha0 < 1:
            raise ConfigurationError(f"alpha0 must lie in (0, 1), got {self.alpha0}")
        if not obstacle:
            raise ConfigurationError("obstacle D must contain at least one ball")
        for b in obstacle:
            if not self.box.contains_ball(b):
                raise ConfigurationError(
                    f"closure of D must lie inside Omega (D̄ ⊂ Ω violated by {b})"
                )
        for i, a in enumerate(obstacle):
            for b in obstacle[i + 1 :]:
                gap = np.linalg.norm(np.subtract(a.center, b.center)) - a.radius - b.radius
                if gap <= 0:
                    raise ConfigurationError("obstacle balls must be disjoint")
        # largest |h| is attained at the deepest point of D
        depth = max(b.radius for b in obstacle)
        if self.profile.kind == "power" and self.profile.gamma > 0:
            hmax = self.profile.amplitude * depth**self.profile.gamma
        else:
            hmax = self.profile.amplitude
        if not 0 < self.alpha0 + hmax < 1:
            raise ConfigurationError(
                f"order alpha0 + h leaves (0, 1): alpha0={self.alpha0}, max|h|={abs(hmax)}"
            )

    @property
    def h_sup(self) -> float:
        depth = max(b.radius for b in self.obstacle)
        if self.profile.kind == "power" and self.profile.gamma > 0:
            return abs(self.profile.amplitude) * depth**self.profile.gamma
        return abs(self.profile.amplitude)

    def with_resolution(self, n) -> ProblemConfig:
        return ProblemConfig(self.alpha0, self.box.with_resolution(n), self.obstacle, self.profile)


def _balls(D: Sequence[BallRegion] | BallRegion) -> tuple[BallRegion, ...]:
    if isinstance(D, BallRegion):
        D = (D,)
    D = tuple(D)
    if not D:
        raise ConfigurationError("obstacle D must be nonempty")
    return D


def dist_point_to_set(p, D) -> float:
    """``inf_{x in D} |x - p|`` (zero when ``p`` lies inside D)."""
    p = _point(p)
    return max(0.0, min(float(np.linalg.norm(p - np.array(b.center))) - b.radius for b in _balls(D)))


def radius_of_enclosure(p, D) -> float:
    """``sup_{x in D} |x - p|``."""
    p = _point(p)
    return max(float(np.linalg.norm(p - np.array(b.center))) + b.radius for b in _balls(D))


def probe_distance(probe: ProbeConfig, D) -> float:
    """Distance between the probe support and D: ``dist(p, D) - eta`` or ``r1 - R_D(p)``."""
    D = _balls(D)
    if probe.flavor == "ext":
        return dist_point_to_set(probe.p, D) - probe.eta
    rd = radius_of_enclosure(probe.p, D)
    if rd >= probe.r1:
        raise ConfigurationError(f"obstacle not enclosed by the probe shell: R_D(p)={rd} >= r1={probe.r1}")
    return probe.r1 - rd


def inside_obstacle(x, D) -> np.ndarray:
    """Boolean mask of points strictly inside some ball of D; ``x`` has shape ``(..., 3)``."""
    x = np.asarray(x, dtype=float)
    mask = np.zeros(x.shape[:-1], dtype=bool)
    for b in _balls(D):
        mask |= np.linalg.norm(x - np.array(b.center), axis=-1) < b.radius
    return mask


def dist_to_boundary_of_D(x, D) -> np.ndarray | float:
    """Distance to ``dD`` for points inside D, zero outside."""
    x = np.asarray(x, dtype=float)
    out = np.zeros(x.shape[:-1])
    for b in _balls(D):
        depth = b.radius - np.linalg.norm(x - np.array(b.center), axis=-1)
        out = np.maximum(out, depth)
    return float(out) if out.ndim == 0 else out


def grid_points(box: BoxDomain) -> np.ndarray:
    """Node coordinates, shape ``(n0+1, n1+1, n2+1, 3)``."""
    axes = [np.linspace(box.lo[i], box.hi[i], box.n[i] + 1) for i in range(3)]
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)


def order_field(config: ProblemConfig) -> ScalarField3D:
    """Sample ``alpha(x) = alpha0 + h(x)`` at the grid nodes."""
    x = grid_points(config.box)
    inside = inside_obstacle(x, config.obstacle)
    h = config.profile.evaluate(dist_to_boundary_of_D(x, config.obstacle), inside)
    alpha = config.alpha0 + h
    if not (np.all(alpha > 0) and np.all(alpha < 1)):
        raise ConfigurationError("order field leaves (0, 1)")
    return ScalarField3D(config.box, alpha)
