from __future__ import annotations

import pytest

from fracenclosure.geometry import BallRegion, BoxDomain, JumpProfile, ProbeConfig, ProblemConfig

# acceptance outcomes, printed once at the end of the run
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def ext_problem(n=64, amplitude=0.3, profile=None) -> ProblemConfig:
    prof = profile or JumpProfile("constant", amplitude)
    return ProblemConfig(0.5, BoxDomain((-1, -1, -1), (1, 1, 1), n), (BallRegion((0, 0, 0), 0.3),), prof)


def int_problem(n=64, amplitude=-0.3) -> ProblemConfig:
    box = BoxDomain((-0.125, -0.32, -0.32), (0.525, 0.32, 0.32), n)
    return ProblemConfig(0.5, box, (BallRegion((0.2, 0, 0), 0.3),), JumpProfile("constant", amplitude))


EXT_PROBE = ProbeConfig("ext", (2, 0, 0), eta=0.5)
INT_PROBE = ProbeConfig("int", (0, 0, 0), r1=0.7, r2=0.9)


@pytest.fixture
def ext_small():
    return ext_problem(16), EXT_PROBE


@pytest.fixture
def int_small():
    return int_problem(16), INT_PROBE


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


def _canonical_sweep(name, n=None):
    from fracenclosure.config import load_config
    from fracenclosure.enclosure import run_sweep

    cfg = load_config(name)
    problem = cfg.problem if n is None else cfg.problem.with_resolution(n)
    return cfg, run_sweep(problem, cfg.probe, cfg.tau_schedule)


@pytest.fixture(scope="session")
def ext_sweep64():
    return _canonical_sweep("ext-positive-jump")


@pytest.fixture(scope="session")
def int_sweep64():
    return _canonical_sweep("int-negative-jump")


@pytest.fixture(scope="session")
def ext_sweep32():
    return _canonical_sweep("ext-positive-jump", 32)


@pytest.fixture(scope="session")
def int_sweep32():
    return _canonical_sweep("int-negative-jump", 32)
