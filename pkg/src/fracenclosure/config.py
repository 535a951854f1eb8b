"""Experiment configuration files.

The grammar is a sectioned ``key = value`` text file read with
:mod:`configparser`.  Full-line comments start with ``#`` or ``;``, inline
comments with `` #``.  Arrays are comma separated; lists of arrays (the
obstacle balls) separate entries with ``;``.  Every key is documented in
:data:`KEYS`; unknown sections or keys are rejected.

Example::

    [problem]
    alpha0 = 0.5
    box_lo = -1, -1, -1
    box_hi = 1, 1, 1
    grid = 64
    balls = 0, 0, 0, 0.3

    [profile]
    kind = constant
    amplitude = 0.3

    [probe]
    flavor = ext
    p = 2, 0, 0
    eta = 0.5

    [sweep]
    ttilde_min = 4
    ttilde_max = 24
    count = 12
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .enclosure import OVERFLOW_GUARD, geometric_schedule
from .exceptions import ConfigurationError
from .geometry import BallRegion, BoxDomain, JumpProfile, ProbeConfig, ProblemConfig, probe_distance

__all__ = ["KEYS", "CANONICAL", "TimeDomainSettings", "ExperimentConfig", "load_config", "parse_config",
           "canonical_path"]

KEYS: dict[str, dict[str, str]] = {
    "problem": {
        "alpha0": "background order, 0 < alpha0 < 1",
        "box_lo": "lower box corner x, y, z",
        "box_hi": "upper box corner x, y, z",
        "grid": "grid intervals, one value or three",
        "balls": "obstacle balls 'cx, cy, cz, r' separated by ';'",
    },
    "profile": {
        "kind": "constant or power",
        "amplitude": "signed jump amplitude",
        "gamma": "exponent of dist(x, dD) for the power profile",
    },
    "probe": {
        "flavor": "ext or int",
        "p": "probe centre x, y, z",
        "m": "moment index (nonnegative integer)",
        "eta": "source ball radius (ext)",
        "r1": "inner shell radius (int)",
        "r2": "outer shell radius (int)",
    },
    "sweep": {
        "tau": "explicit increasing list of tau values (overrides the geometric schedule)",
        "ttilde_min": "smallest tau**(alpha0/2) of the geometric schedule",
        "ttilde_max": "largest tau**(alpha0/2) of the geometric schedule",
        "count": "number of schedule points",
        "subfaces": "sub-face split per axis for the boundary quadrature",
    },
    "threshold": {
        "T": "list of T values for the threshold classification",
    },
    "timedomain": {
        "grid": "grid intervals for the time-domain round trip",
        "t_max": "length of the time window",
        "dt": "time step of the uniform grid",
        "taus": "real tau values at which the two indicator paths are compared",
        "s_truncation": "spectral cut-off S (omit for automatic choice)",
        "n_quad": "Gauss points per spectral panel",
        "t_stride": "time subsampling of the measurement CSV",
        "tolerance": "allowed relative disagreement of the two paths",
    },
    "run": {
        "workers": "process pool size for the tau sweep",
    },
}

CANONICAL = (
    "ext-positive-jump",
    "int-negative-jump",
    "null-obstacle",
    "power-profile-gamma1",
    "roundtrip-coarse",
)


@dataclass(frozen=True)
class TimeDomainSettings:
    grid: int | None = None
    t_max: float = 16.0
    dt: float = 0.01
    taus: tuple[float, ...] = (2.0, 3.0, 5.0)
    s_truncation: float | None = None
    n_quad: int = 6
    t_stride: int = 10
    tolerance: float = 0.05

    @property
    def n_steps(self) -> int:
        return int(round(self.t_max / self.dt))


@dataclass(frozen=True)
class ExperimentConfig:
    problem: ProblemConfig
    probe: ProbeConfig
    tau_schedule: tuple[float, ...]
    T_values: tuple[float, ...] = ()
    timedomain: TimeDomainSettings = field(default_factory=TimeDomainSettings)
    subfaces: int = 1
    workers: int = 1
    name: str = ""

    @property
    def distance_exact(self) -> float:
        return probe_distance(self.probe, self.problem.obstacle)


def canonical_path(name: str) -> Path:
    """Path of a shipped configuration by name."""
    if name not in CANONICAL:
        raise ConfigurationError(f"unknown canonical config {name!r}; choose from {', '.join(CANONICAL)}")
    return Path(str(resources.files("fracenclosure") / "configs" / f"{name}.ini"))


def _floats(text: str, key: str, size: int | None = None) -> tuple[float, ...]:
    try:
        vals = tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise ConfigurationError(f"{key}: expected comma-separated numbers, got {text!r}") from None
    if size is not None and len(vals) != size:
        raise ConfigurationError(f"{key}: expected {size} values, got {len(vals)}")
    if not all(math.isfinite(v) for v in vals):
        raise ConfigurationError(f"{key}: values must be finite")
    return vals


def _int(text: str, key: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise ConfigurationError(f"{key}: expected an integer, got {text!r}") from None


def _float(text: str, key: str) -> float:
    return _floats(text, key, 1)[0]


def _require(sec, name: str, key: str) -> str:
    if key not in sec:
        raise ConfigurationError(f"missing key [{name}] {key}")
    return sec[key]


def parse_config(text: str, name: str = "") -> ExperimentConfig:
    """Parse and validate configuration text."""
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",), interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigurationError(f"config syntax error: {exc}") from None
    for sec in cp.sections():
        if sec not in KEYS:
            raise ConfigurationError(f"unknown section [{sec}]")
        for key in cp[sec]:
            if key not in KEYS[sec]:
                raise ConfigurationError(f"unknown key [{sec}] {key}")
    for sec in ("problem", "probe"):
        if sec not in cp:
            raise ConfigurationError(f"missing section [{sec}]")

    pb = cp["problem"]
    grid_vals = _floats(_require(pb, "problem", "grid"), "grid")
    if len(grid_vals) not in (1, 3) or any(v != int(v) for v in grid_vals):
        raise ConfigurationError("grid: expected one or three integers")
    grid = tuple(int(v) for v in grid_vals) if len(grid_vals) == 3 else int(grid_vals[0])
    box = BoxDomain(_floats(_require(pb, "problem", "box_lo"), "box_lo", 3),
                    _floats(_require(pb, "problem", "box_hi"), "box_hi", 3), grid)
    balls = []
    for chunk in _require(pb, "problem", "balls").split(";"):
        if chunk.strip():
            cx, cy, cz, r = _floats(chunk, "balls", 4)
            balls.append(BallRegion((cx, cy, cz), r))

    prof = cp["profile"] if "profile" in cp else {}
    profile = JumpProfile(
        kind=prof.get("kind", "constant").strip(),
        amplitude=_float(prof.get("amplitude", "0"), "amplitude"),
        gamma=_float(prof.get("gamma", "0"), "gamma"),
    )
    problem = ProblemConfig(_float(_require(pb, "problem", "alpha0"), "alpha0"), box, tuple(balls), profile)

    pr = cp["probe"]
    flavor = _require(pr, "probe", "flavor").strip()
    probe = ProbeConfig(
        flavor=flavor,
        p=_floats(_require(pr, "probe", "p"), "p", 3),
        m=_int(pr.get("m", "0"), "m"),
        eta=_float(pr["eta"], "eta") if "eta" in pr else None,
        r1=_float(pr["r1"], "r1") if "r1" in pr else None,
        r2=_float(pr["r2"], "r2") if "r2" in pr else None,
    )
    probe.check_against(box)
    d = probe_distance(probe, problem.obstacle)
    if not d > 0:
        raise ConfigurationError(f"probe support touches the obstacle (distance {d:g})")

    sw = cp["sweep"] if "sweep" in cp else {}
    if "tau" in sw:
        schedule = _floats(sw["tau"], "tau")
    elif "ttilde_min" in sw:
        schedule = tuple(geometric_schedule(_float(sw["ttilde_min"], "ttilde_min"),
                                            _float(_require(sw, "sweep", "ttilde_max"), "ttilde_max"),
                                            _int(_require(sw, "sweep", "count"), "count"), problem.alpha0))
    else:
        schedule = ()
    if schedule:
        if any(b <= a for a, b in zip(schedule, schedule[1:])) or schedule[0] <= 1:
            raise ConfigurationError("tau schedule must be strictly increasing with tau > 1")
        worst = 2 * schedule[-1] ** (problem.alpha0 / 2) * d
        if worst > OVERFLOW_GUARD:
            raise ConfigurationError(f"tau schedule breaks the overflow guard: 2 tau~ dist = {worst:.1f} > 600")
    subfaces = _int(sw.get("subfaces", "1"), "subfaces")
    if subfaces < 1:
        raise ConfigurationError("subfaces must be >= 1")

    th = cp["threshold"] if "threshold" in cp else {}
    T_values = _floats(th["T"], "T") if "T" in th else ()
    if any(t < 0 for t in T_values):
        raise ConfigurationError("T values must be nonnegative")

    td = cp["timedomain"] if "timedomain" in cp else {}
    tds = TimeDomainSettings(
        grid=_int(td["grid"], "grid") if "grid" in td else None,
        t_max=_float(td.get("t_max", "16"), "t_max"),
        dt=_float(td.get("dt", "0.01"), "dt"),
        taus=_floats(td.get("taus", "2, 3, 5"), "taus"),
        s_truncation=_float(td["s_truncation"], "s_truncation") if "s_truncation" in td else None,
        n_quad=_int(td.get("n_quad", "6"), "n_quad"),
        t_stride=_int(td.get("t_stride", "10"), "t_stride"),
        tolerance=_float(td.get("tolerance", "0.05"), "tolerance"),
    )
    if not (tds.t_max > 0 and 0 < tds.dt < tds.t_max) or abs(tds.n_steps * tds.dt - tds.t_max) > 1e-9 * tds.t_max:
        raise ConfigurationError("timedomain: need 0 < dt < t_max with t_max an integer multiple of dt")
    if any(t <= 1 for t in tds.taus):
        raise ConfigurationError("timedomain: taus must exceed 1")
    workers = _int(cp["run"].get("workers", "1"), "workers") if "run" in cp else 1
    return ExperimentConfig(problem, probe, tuple(schedule), tuple(T_values), tds, subfaces, max(1, workers), name)


def load_config(path) -> ExperimentConfig:
    """Load a config file, or a canonical config by name."""
    p = Path(path)
    if not p.exists() and str(path) in CANONICAL:
        p = canonical_path(str(path))
    if not p.exists():
        raise ConfigurationError(f"config file not found: {path}")
    return parse_config(p.read_text(), name=p.stem)
