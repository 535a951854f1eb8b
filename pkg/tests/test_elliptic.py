import numpy as np
import pytest
import scipy.sparse.linalg as spla

from fracenclosure.elliptic import (
    Grid,
    assemble,
    boundary_faces,
    dump_field,
    load_field,
    neumann_trace,
    pcg,
    solve_scattered,
    solve_scattered_complex,
    solve_total,
)
from fracenclosure.exceptions import ConfigurationError
from fracenclosure.geometry import BoxDomain, ScalarField3D, grid_points, order_field
from fracenclosure.special import log_w0

from conftest import EXT_PROBE, ext_problem


def test_operator_structure(ext_small):
    cfg, _ = ext_small
    grid = Grid(cfg.box)
    op = assemble(grid, order_field(cfg), 50.0)
    A = op.matrix
    assert A.shape == (grid.n_unknowns, grid.n_unknowns)
    assert abs(A - A.T).max() == 0
    assert np.all(op.diagonal > 0)
    with pytest.raises(ConfigurationError):
        assemble(grid, order_field(cfg), 0.5)


def test_pcg_matches_direct_solve(ext_small):
    cfg, _ = ext_small
    grid = Grid(cfg.box)
    A = assemble(grid, order_field(cfg), 20.0).matrix
    b = np.random.default_rng(1).standard_normal(grid.n_unknowns)
    x, info = pcg(A, b, rtol=1e-12, maxiter=2000)
    assert info.residual <= 1e-12
    assert np.allclose(x, spla.spsolve(A.tocsc(), b), rtol=1e-9, atol=1e-12)


def test_cocg_complex_symmetric(ext_small):
    cfg, _ = ext_small
    grid = Grid(cfg.box)
    A = assemble(grid, order_field(cfg), complex(1, 7)).matrix
    b = np.random.default_rng(2).standard_normal(grid.n_unknowns) + 0j
    x, info = pcg(A, b, rtol=1e-10, maxiter=5000)
    assert info.method == "cocg" and info.residual <= 1e-10
    assert np.allclose(x, spla.spsolve(A.tocsc(), b), rtol=1e-7)


def test_background_truncation_order():
    # h = 0: the discrete solution with Dirichlet data w0 approximates w0 to O(h^2)
    errs = []
    for n in (8, 16, 32):
        cfg = ext_problem(n, amplitude=0.0)
        w, _ = solve_total(cfg, EXT_PROBE, 16.0)
        exact = np.exp(log_w0(grid_points(cfg.box), EXT_PROBE, 16.0, 0.5) - w.log_scale)
        errs.append(np.max(np.abs(w.values - exact)) / np.max(np.abs(exact)))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders > 1.8)


def test_scattered_field_is_total_minus_background():
    # z and w - w_h(h=0) differ only through the O(h^2) background truncation inside D
    tau = 81.0
    rel = []
    for n in (16, 32):
        cfg = ext_problem(n)
        z, info = solve_scattered(cfg, EXT_PROBE, tau)
        assert info.residual <= 1e-10
        w, _ = solve_total(cfg, EXT_PROBE, tau)
        base, _ = solve_total(ext_problem(n, amplitude=0.0), EXT_PROBE, tau)
        diff = (w.values - base.values) * np.exp(w.log_scale - z.log_scale)
        rel.append(np.max(np.abs(diff - z.values)) / np.max(np.abs(z.values)))
    assert rel[1] < 0.01
    assert np.log2(rel[0] / rel[1]) > 1.8


def test_scattered_sign_follows_jump(ext_small, int_small):
    cfg, probe = ext_small
    z, _ = solve_scattered(cfg, probe, 81.0)
    assert np.all(z.values <= 0) and np.any(z.values < 0)
    cfg, probe = int_small
    z, _ = solve_scattered(cfg, probe, 400.0)
    assert np.all(z.values >= 0) and np.any(z.values > 0)


def test_null_jump_gives_zero_field(ext_small):
    cfg, probe = ext_small
    null = ext_problem(16, amplitude=0.0)
    z, info = solve_scattered(null, probe, 81.0)
    assert not np.any(z.values) and info.iterations == 0
    zc, _ = solve_scattered_complex(null, probe, complex(1, 2))
    assert not np.any(zc.values)


def test_complex_solve_on_real_axis_matches_real_solve(ext_small):
    cfg, probe = ext_small
    tau = 3.0
    zr, _ = solve_scattered(cfg, probe, tau)
    zc, info = solve_scattered_complex(cfg, probe, complex(tau, 0.0), rtol=1e-12)
    expect = zr.values * np.exp(zr.log_scale) * tau**-5
    assert np.allclose(zc.values.real, expect, rtol=1e-8, atol=1e-10 * np.max(np.abs(expect)))


def test_neumann_trace_of_quadratic():
    box = BoxDomain((0, 0, 0), (1, 2, 1), (8, 16, 8))
    x = grid_points(box)
    u = x[..., 0] ** 2 + 3 * x[..., 1]
    tr2 = neumann_trace(ScalarField3D(box, u), order=2)
    exact = np.where(tr2.normals[:, 0] != 0, 2 * tr2.points[:, 0] * tr2.normals[:, 0], 0.0) + 3 * tr2.normals[:, 1]
    assert np.allclose(tr2.values, exact, atol=1e-12)
    tr1 = neumann_trace(ScalarField3D(box, u), order=1)
    assert np.max(np.abs(tr1.values - exact)) <= 0.125 + 1e-12
    _, P, N, A = boundary_faces(Grid(box))
    assert len(P) == 2 * (15 * 7 + 7 * 7 + 7 * 15)
    assert np.allclose(np.linalg.norm(N, axis=1), 1)


def test_dump_roundtrip(tmp_path, ext_small):
    cfg, probe = ext_small
    z, _ = solve_scattered(cfg, probe, 81.0)
    path = tmp_path / "z.bin"
    dump_field(z, path)
    back = load_field(path)
    assert back.box.n == z.box.n
    assert np.allclose(back.box.lo, z.box.lo) and np.allclose(back.box.hi, z.box.hi)
    assert np.array_equal(back.values, z.values) and back.log_scale == z.log_scale
    (tmp_path / "bad.bin").write_bytes(b"\0" * 200)
    with pytest.raises(ConfigurationError):
        load_field(tmp_path / "bad.bin")
