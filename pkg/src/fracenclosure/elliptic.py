"""Finite-difference solver for ``(Delta - tau**alpha(x)) w = 0`` on the box.

Unknowns live on the interior grid nodes; boundary nodes carry Dirichlet
data.  The operator ``-Delta_h + diag(tau**alpha)`` is symmetric (complex
symmetric for complex ``tau``) and solved with Jacobi-preconditioned
conjugate gradients.  Fields that may be exponentially small are returned
with a ``log_scale`` so that ``true = values * exp(log_scale)``.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .exceptions import ConfigurationError, NumericalError
from .geometry import BoxDomain, ProblemConfig, ProbeConfig, ScalarField3D, grid_points, order_field
from .special import log_w0, w0_complex

__all__ = [
    "Grid",
    "SparseOperator",
    "BoundaryField",
    "SolveInfo",
    "assemble",
    "pcg",
    "solve_scattered",
    "solve_total",
    "solve_scattered_complex",
    "neumann_trace",
    "boundary_faces",
    "dump_field",
    "load_field",
]

CG_RTOL = 1e-10


def _dot(a: np.ndarray, b: np.ndarray):
    # bilinear (no conjugation) and pairwise-summed, hence reproducible
    return np.sum(a * b)


@dataclass(frozen=True)
class Grid:
    box: BoxDomain

    @property
    def n(self) -> tuple[int, int, int]:
        return self.box.n

    @property
    def spacing(self) -> np.ndarray:
        return self.box.spacing

    @property
    def interior_shape(self) -> tuple[int, int, int]:
        return tuple(k - 1 for k in self.n)

    @property
    def n_unknowns(self) -> int:
        a, b, c = self.interior_shape
        return a * b * c

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    def points(self) -> np.ndarray:
        return grid_points(self.box)


@dataclass
class SparseOperator:
    matrix: sp.csr_matrix
    shift: np.ndarray = field(repr=False)

    @property
    def diagonal(self) -> np.ndarray:
        return self.matrix.diagonal()


@dataclass
class SolveInfo:
    residual: float
    iterations: int
    method: str


@dataclass
class BoundaryField:
    """Per-face values on the boundary nodes of the box (edges excluded).

    ``face_id`` order: sides x-, x+, y-, y+, z-, z+, row-major within a side.
    """

    points: np.ndarray = field(repr=False)
    normals: np.ndarray = field(repr=False)
    areas: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)
    log_scale: float = 0.0

    def __len__(self) -> int:
        return len(self.areas)


def _lap1d(n: int, h: float) -> sp.csr_matrix:
    m = n - 1
    return sp.diags([-np.ones(m - 1), 2 * np.ones(m), -np.ones(m - 1)], [-1, 0, 1], format="csr") / (h * h)


def _neg_laplacian(grid: Grid) -> sp.csr_matrix:
    n0, n1, n2 = grid.n
    h = grid.spacing
    i0, i1, i2 = (sp.identity(k - 1, format="csr") for k in grid.n)
    return (
        sp.kron(sp.kron(_lap1d(n0, h[0]), i1), i2)
        + sp.kron(sp.kron(i0, _lap1d(n1, h[1])), i2)
        + sp.kron(sp.kron(i0, i1), _lap1d(n2, h[2]))
    ).tocsr()


def assemble(grid: Grid, alpha_field: ScalarField3D, tau) -> SparseOperator:
    """``-Delta_h + diag(tau**alpha)`` on the interior nodes (positive definite for real tau > 1)."""
    if np.isrealobj(tau) and not tau > 1:
        raise ConfigurationError(f"tau must exceed 1, got {tau}")
    alpha = alpha_field.interior.ravel()
    if np.iscomplexobj(tau):
        shift = np.exp(alpha * np.log(complex(tau)))
    else:
        shift = np.exp(alpha * math.log(tau))
    A = _neg_laplacian(grid) + sp.diags(shift, 0, format="csr")
    return SparseOperator(A.tocsr(), shift)


def _iteration_cap(grid: Grid, op: SparseOperator) -> int:
    h = grid.spacing
    lengths = np.array(grid.box.hi) - np.array(grid.box.lo)
    top = 4 * np.sum(1 / h**2) + np.max(np.abs(op.shift))
    bottom = np.pi**2 * np.sum(1 / lengths**2) + np.min(np.real(op.shift))
    kappa = top / bottom
    return int(math.ceil(20 * grid.n_unknowns ** (1 / 3) * math.sqrt(kappa)))


def pcg(A: sp.csr_matrix, b: np.ndarray, rtol: float = CG_RTOL, maxiter: int = 10000,
        x0: np.ndarray | None = None) -> tuple[np.ndarray, SolveInfo]:
    """Jacobi-preconditioned conjugate gradients.

    For complex symmetric ``A`` the inner products are bilinear (COCG).
    Returns the iterate and the achieved relative residual; does not raise.
    """
    dinv = 1.0 / A.diagonal()
    bnorm = math.sqrt(float(np.sum(np.abs(b) ** 2)))
    x = np.zeros_like(b) if x0 is None else x0.copy()
    if bnorm == 0.0:
        return x, SolveInfo(0.0, 0, "cg")
    r = b - A @ x if x0 is not None else b.copy()
    z = dinv * r
    p = z.copy()
    rz = _dot(r, z)
    res = 1.0
    it = 0
    for it in range(1, maxiter + 1):
        Ap = A @ p
        pAp = _dot(p, Ap)
        if pAp == 0:
            break
        a = rz / pAp
        x += a * p
        r -= a * Ap
        res = math.sqrt(float(np.sum(np.abs(r) ** 2))) / bnorm
        if res <= rtol:
            break
        z = dinv * r
        rz_new = _dot(r, z)
        p *= rz_new / rz
        p += z
        rz = rz_new
    return x, SolveInfo(res, it, "cocg" if np.iscomplexobj(b) else "cg")


def _cgnr(A: sp.csr_matrix, b: np.ndarray, rtol: float, maxiter: int) -> tuple[np.ndarray, SolveInfo]:
    """CG on the normal equations ``A^H A x = A^H b``; slow but robust fallback."""
    AH = A.conj().T.tocsr()
    bnorm = math.sqrt(float(np.sum(np.abs(b) ** 2)))
    x = np.zeros_like(b)
    r = b.copy()
    s = AH @ r
    p = s.copy()
    ss = float(np.sum(np.abs(s) ** 2))
    res = 1.0
    it = 0
    for it in range(1, maxiter + 1):
        Ap = A @ p
        a = ss / float(np.sum(np.abs(Ap) ** 2))
        x += a * p
        r -= a * Ap
        res = math.sqrt(float(np.sum(np.abs(r) ** 2))) / bnorm
        if res <= rtol:
            break
        s = AH @ r
        ss_new = float(np.sum(np.abs(s) ** 2))
        p = s + (ss_new / ss) * p
        ss = ss_new
    return x, SolveInfo(res, it, "cgnr")


def _solve(grid: Grid, op: SparseOperator, b: np.ndarray, rtol: float) -> tuple[np.ndarray, SolveInfo]:
    cap = _iteration_cap(grid, op)
    x, info = pcg(op.matrix, b, rtol=rtol, maxiter=cap)
    if info.residual > rtol and np.iscomplexobj(b):
        x, info = _cgnr(op.matrix, b, rtol, 20 * cap)
    if info.residual > rtol:
        raise NumericalError(
            f"{info.method} did not converge in {info.iterations} iterations "
            f"(relative residual {info.residual:.3e} > {rtol:.1e})",
            achieved=info.residual,
        )
    return x, info


def _embed(grid: Grid, interior: np.ndarray, boundary: np.ndarray | None = None) -> np.ndarray:
    shape = tuple(k + 1 for k in grid.n)
    out = np.zeros(shape, dtype=interior.dtype) if boundary is None else boundary.astype(
        np.result_type(boundary, interior)
    ).copy()
    out[1:-1, 1:-1, 1:-1] = interior.reshape(grid.interior_shape)
    return out


def _log_q(alpha: np.ndarray, alpha0: float, tau: float) -> tuple[np.ndarray, np.ndarray]:
    """Sign and log-magnitude of ``tau**alpha - tau**alpha0`` without cancellation."""
    lt = math.log(tau)
    dh = alpha - alpha0
    with np.errstate(divide="ignore"):
        logabs = alpha0 * lt + np.log(np.abs(np.expm1(dh * lt)))
    return np.sign(dh), logabs


def scattered_source(config: ProblemConfig, probe: ProbeConfig, tau: float):
    """Signed log-magnitude of ``q * w0`` at all nodes, plus the grid and order field."""
    grid = Grid(config.box)
    alpha = order_field(config)
    sgn, lq = _log_q(alpha.values, config.alpha0, tau)
    lw = log_w0(grid.points(), probe, tau, config.alpha0)
    return grid, alpha, sgn, lq, lw


def solve_scattered(config: ProblemConfig, probe: ProbeConfig, tau: float,
                    rtol: float = CG_RTOL, source=None) -> tuple[ScalarField3D, SolveInfo]:
    """Scattered field ``z = w - w0``: ``(-Delta_h + tau**alpha) z = -(tau**alpha - tau**alpha0) w0``.

    The right-hand side is rescaled to unit maximum before the solve; the
    scale is returned as ``log_scale`` of the field.  ``source`` may carry a
    precomputed :func:`scattered_source` tuple.
    """
    grid, alpha, sgn, lq, lw = source if source is not None else scattered_source(config, probe, tau)
    log_rhs = (lq + lw)[1:-1, 1:-1, 1:-1].ravel()
    s = -sgn[1:-1, 1:-1, 1:-1].ravel()
    live = s != 0
    if not np.any(live):
        return ScalarField3D(config.box, np.zeros(tuple(k + 1 for k in grid.n))), SolveInfo(0.0, 0, "cg")
    op = assemble(grid, alpha, tau)
    top = float(np.max(log_rhs[live]))
    b = np.where(live, s * np.exp(np.where(live, log_rhs - top, 0.0)), 0.0)
    x, info = _solve(grid, op, b, rtol)
    return ScalarField3D(config.box, _embed(grid, x), log_scale=top), info


def _dirichlet_rhs(grid: Grid, boundary: np.ndarray) -> np.ndarray:
    """Contribution of boundary values to the interior equations of ``-Delta_h``."""
    h = grid.spacing
    b = np.zeros(grid.interior_shape, dtype=boundary.dtype)
    b[0, :, :] += boundary[0, 1:-1, 1:-1] / h[0] ** 2
    b[-1, :, :] += boundary[-1, 1:-1, 1:-1] / h[0] ** 2
    b[:, 0, :] += boundary[1:-1, 0, 1:-1] / h[1] ** 2
    b[:, -1, :] += boundary[1:-1, -1, 1:-1] / h[1] ** 2
    b[:, :, 0] += boundary[1:-1, 1:-1, 0] / h[2] ** 2
    b[:, :, -1] += boundary[1:-1, 1:-1, -1] / h[2] ** 2
    return b.ravel()


def _boundary_mask(grid: Grid) -> np.ndarray:
    mask = np.ones(tuple(k + 1 for k in grid.n), dtype=bool)
    mask[1:-1, 1:-1, 1:-1] = False
    return mask


def solve_total(config: ProblemConfig, probe: ProbeConfig, tau: float,
                rtol: float = CG_RTOL) -> tuple[ScalarField3D, SolveInfo]:
    """Total field ``w`` with Dirichlet data ``w = w0`` on the box boundary."""
    grid = Grid(config.box)
    alpha = order_field(config)
    op = assemble(grid, alpha, tau)
    lw = log_w0(grid.points(), probe, tau, config.alpha0)
    bmask = _boundary_mask(grid)
    top = float(np.max(lw[bmask]))
    boundary = np.where(bmask, np.exp(lw - top), 0.0)
    x, info = _solve(grid, op, _dirichlet_rhs(grid, boundary), rtol)
    return ScalarField3D(config.box, _embed(grid, x, boundary), log_scale=top), info


def solve_scattered_complex(config: ProblemConfig, probe: ProbeConfig, tau: complex,
                            rtol: float = 1e-8, op: SparseOperator | None = None
                            ) -> tuple[ScalarField3D, SolveInfo]:
    """Scattered part on the Bromwich line.

    With boundary data ``tau**-5 w0(tau)`` the field splits as
    ``tau**-5 w0 + z`` where ``(-Delta_h + tau**alpha) z = -tau**-5 (tau**alpha - tau**alpha0) w0``.
    Returned unscaled (``log_scale = 0``): magnitudes are moderate for ``Re tau = O(1)``.
    """
    grid = Grid(config.box)
    alpha = order_field(config)
    if op is None:
        op = assemble(grid, alpha, tau)
    lt = np.log(complex(tau))
    q = np.exp(config.alpha0 * lt) * np.expm1((alpha.interior.ravel() - config.alpha0) * lt)
    if not np.any(q != 0):
        return ScalarField3D(config.box, np.zeros(tuple(k + 1 for k in grid.n), dtype=complex)), SolveInfo(0.0, 0, "cocg")
    pts = grid.points()[1:-1, 1:-1, 1:-1].reshape(-1, 3)
    live = q != 0
    w0 = np.zeros(len(q), dtype=complex)
    w0[live] = w0_complex(pts[live], probe, np.asarray(tau), config.alpha0)
    b = -np.exp(-5 * lt) * q * w0
    x, info = _solve(grid, op, b, rtol)
    return ScalarField3D(config.box, _embed(grid, x)), info


def boundary_faces(grid: Grid) -> tuple[list[tuple[int, int]], np.ndarray, np.ndarray, np.ndarray]:
    """Side descriptors and per-face points, outward normals and areas."""
    pts = grid.points()
    h = grid.spacing
    sides = [(0, 0), (0, 1), (1, 0), (1, 1), (2, 0), (2, 1)]
    P, N, A = [], [], []
    for axis, hi in sides:
        sl = [slice(1, -1)] * 3
        sl[axis] = -1 if hi else 0
        p = pts[tuple(sl)].reshape(-1, 3)
        nrm = np.zeros(3)
        nrm[axis] = 1.0 if hi else -1.0
        t = [i for i in range(3) if i != axis]
        P.append(p)
        N.append(np.broadcast_to(nrm, p.shape))
        A.append(np.full(len(p), h[t[0]] * h[t[1]]))
    return sides, np.concatenate(P), np.concatenate(N), np.concatenate(A)


def neumann_trace(field: ScalarField3D, order: int = 2) -> BoundaryField:
    """Outward normal derivative at the boundary nodes by one-sided differences.

    ``order=1``: ``(u_b - u_{b-1}) / h``; ``order=2``: ``(3 u_b - 4 u_{b-1} + u_{b-2}) / (2h)``.
    The first-order trace paired with boundary values reproduces the discrete
    Green identity of the 7-point Laplacian exactly.
    """
    if order not in (1, 2):
        raise ConfigurationError("trace order must be 1 or 2")
    grid = Grid(field.box)
    if order == 2 and min(grid.n) < 4:
        raise ConfigurationError("grid too coarse for the second-order trace stencil")
    u = field.values
    h = grid.spacing
    sides, P, N, A = boundary_faces(grid)
    vals = []
    for axis, hi in sides:
        v = np.moveaxis(u, axis, 0)
        if hi:
            u0, u1, u2 = v[-1], v[-2], v[-3]
        else:
            u0, u1, u2 = v[0], v[1], v[2]
        if order == 1:
            d = (u0 - u1) / h[axis]
        else:
            d = (3 * u0 - 4 * u1 + u2) / (2 * h[axis])
        vals.append(d[1:-1, 1:-1].ravel())
    return BoundaryField(P, N, A, np.concatenate(vals), field.log_scale)


# binary dump ---------------------------------------------------------------------------

_MAGIC = b"FENC"
_HEADER = struct.Struct("<4sI3I3d3dd")


def dump_field(field: ScalarField3D, path) -> None:
    """Little-endian dump: magic, version, node counts, spacing, origin, log_scale, then float64 values (C order)."""
    shape = field.values.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, 1, *shape, *field.box.spacing, *field.box.lo, field.log_scale))
        fh.write(np.ascontiguousarray(np.real(field.values), dtype="<f8").tobytes())


def load_field(path) -> ScalarField3D:
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        magic, version, n0, n1, n2, h0, h1, h2, x0, y0, z0, ls = _HEADER.unpack(head)
        if magic != _MAGIC or version != 1:
            raise ConfigurationError(f"{path}: not a field dump")
        data = np.frombuffer(fh.read(), dtype="<f8").reshape(n0, n1, n2)
    lo = (x0, y0, z0)
    hi = (x0 + h0 * (n0 - 1), y0 + h1 * (n1 - 1), z0 + h2 * (n2 - 1))
    return ScalarField3D(BoxDomain(lo, hi, (n0 - 1, n1 - 1, n2 - 1)), data.copy(), log_scale=ls)
