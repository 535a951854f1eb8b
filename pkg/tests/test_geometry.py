import numpy as np
import pytest

from fracenclosure.exceptions import ConfigurationError
from fracenclosure.geometry import (
    BallRegion,
    BoxDomain,
    JumpProfile,
    ProbeConfig,
    ProblemConfig,
    dist_point_to_set,
    dist_to_boundary_of_D,
    grid_points,
    inside_obstacle,
    order_field,
    probe_distance,
    radius_of_enclosure,
)

from conftest import EXT_PROBE, INT_PROBE, ext_problem, int_problem


def test_canonical_distances():
    assert probe_distance(EXT_PROBE, ext_problem(16).obstacle) == pytest.approx(1.2)
    assert probe_distance(INT_PROBE, int_problem(16).obstacle) == pytest.approx(0.2)


def test_point_set_distances():
    D = (BallRegion((0, 0, 0), 0.3), BallRegion((1, 0, 0), 0.1))
    assert dist_point_to_set((2, 0, 0), D) == pytest.approx(0.9)
    assert dist_point_to_set((0, 0, 0), D) == 0.0
    assert radius_of_enclosure((0, 0, 0), D) == pytest.approx(1.1)


def test_scaling_covariance():
    k = 2.5
    D = (BallRegion((0.1, 0.2, 0.0), 0.3),)
    Dk = (BallRegion((0.25, 0.5, 0.0), 0.75),)
    assert dist_point_to_set((k * 2, 0, 0), Dk) == pytest.approx(k * dist_point_to_set((2, 0, 0), D))


def test_box_validation():
    with pytest.raises(ConfigurationError):
        BoxDomain((0, 0, 0), (1, 1, 1), 4)
    with pytest.raises(ConfigurationError):
        BoxDomain((0, 0, 0), (1, -1, 1), 16)
    box = BoxDomain((-1, -1, -1), (1, 1, 1), 16)
    assert box.n == (16, 16, 16)
    assert np.allclose(box.spacing, 0.125)
    assert box.distance_to((2, 0, 0)) == pytest.approx(1.0)
    assert box.distance_to((0, 0, 0)) == 0.0


def test_probe_admissibility_messages():
    box = BoxDomain((-1, -1, -1), (1, 1, 1), 16)
    with pytest.raises(ConfigurationError, match="B̄_η ∩ Ω̄ = ∅ violated"):
        ProbeConfig("ext", (1.4, 0, 0), eta=0.5).check_against(box)
    with pytest.raises(ConfigurationError, match="Ω ⊂ B_{R₁} violated"):
        ProbeConfig("int", (0, 0, 0), r1=0.7, r2=0.9).check_against(box)
    EXT_PROBE.check_against(box)
    INT_PROBE.check_against(int_problem(16).box)


def test_problem_validation():
    box = BoxDomain((-1, -1, -1), (1, 1, 1), 16)
    with pytest.raises(ConfigurationError, match="D̄ ⊂ Ω"):
        ProblemConfig(0.5, box, (BallRegion((0.9, 0, 0), 0.3),))
    with pytest.raises(ConfigurationError, match="disjoint"):
        ProblemConfig(0.5, box, (BallRegion((0, 0, 0), 0.3), BallRegion((0.5, 0, 0), 0.3)))
    with pytest.raises(ConfigurationError):
        ProblemConfig(0.5, box, (BallRegion((0, 0, 0), 0.3),), JumpProfile("constant", 0.6))
    with pytest.raises(ConfigurationError):
        ProbeConfig("int", (0, 0, 0), r1=0.9, r2=0.7)


def test_int_probe_must_enclose_obstacle():
    with pytest.raises(ConfigurationError, match="not enclosed"):
        probe_distance(ProbeConfig("int", (0, 0, 0), r1=0.4, r2=0.9), (BallRegion((0.2, 0, 0), 0.3),))


def test_order_field_profiles():
    cfg = ext_problem(16, profile=JumpProfile("power", 1.0, 1.0))
    alpha = order_field(cfg)
    x = grid_points(cfg.box)
    inside = inside_obstacle(x, cfg.obstacle)
    depth = dist_to_boundary_of_D(x, cfg.obstacle)
    assert np.allclose(alpha.values[inside], 0.5 + depth[inside])
    assert np.all(alpha.values[~inside] == 0.5)
    assert cfg.h_sup == pytest.approx(0.3)
