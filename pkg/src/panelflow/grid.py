"""Uniform tensor grids on [0,lx] x [0,ly] and clamped-plate finite differences.

Fields are stored as (nx, ny) float arrays in C order, f[i, j] = f(x_i, y_j)
with the second index fastest.  All operators are second-order centered
differences; the clamped boundary condition (f = df/dn = 0) is realized by
ghost-point reflection (ghost value = mirrored interior value).
"""
from __future__ import annotations

from collections import namedtuple
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla


class GridError(ValueError):
    pass


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class GridSpec:
    """Geometry of a uniform tensor grid with nodes on the boundary."""

    lx: float
    ly: float
    nx: int
    ny: int

    def __post_init__(self):
        if not (self.lx > 0.0 and self.ly > 0.0):
            raise GridError("grid extents must be positive")
        if self.nx < 5 or self.ny < 5:
            raise GridError("need at least 5 nodes per direction for the plate stencils")

    @property
    def hx(self) -> float:
        return self.lx / (self.nx - 1)

    @property
    def hy(self) -> float:
        return self.ly / (self.ny - 1)

    def xs(self) -> np.ndarray:
        return np.linspace(0.0, self.lx, self.nx)

    def ys(self) -> np.ndarray:
        return np.linspace(0.0, self.ly, self.ny)

    def mesh(self):
        return np.meshgrid(self.xs(), self.ys(), indexing="ij")

    def zeros(self) -> np.ndarray:
        return np.zeros((self.nx, self.ny))

    @property
    def diameter(self) -> float:
        return float(np.hypot(self.lx, self.ly))


def check_field(f: np.ndarray, g: GridSpec) -> None:
    if f.shape != (g.nx, g.ny):
        raise GridError(f"field shape {f.shape} does not match grid ({g.nx}, {g.ny})")
    if not np.all(np.isfinite(f)):
        raise GridError("field contains non-finite values")


def boundary_ring(f: np.ndarray) -> np.ndarray:
    return np.concatenate([f[0, :], f[-1, :], f[:, 0], f[:, -1]])


def is_clamped(f: np.ndarray) -> bool:
    """True when the boundary ring is exactly zero."""
    return not (f[0, :].any() or f[-1, :].any() or f[:, 0].any() or f[:, -1].any())


def clamp_ring(f: np.ndarray) -> np.ndarray:
    """Zero the boundary ring in place (for analytically clamped profiles
    whose boundary values are only zero to roundoff)."""
    f[0, :] = 0.0
    f[-1, :] = 0.0
    f[:, 0] = 0.0
    f[:, -1] = 0.0
    return f


def interior(f: np.ndarray) -> np.ndarray:
    return f[1:-1, 1:-1].ravel()


def embed_interior(vec: np.ndarray, g: GridSpec) -> np.ndarray:
    out = g.zeros()
    out[1:-1, 1:-1] = vec.reshape(g.nx - 2, g.ny - 2)
    return out


# ---------------------------------------------------------------------------
# quadrature and norms
# ---------------------------------------------------------------------------

@lru_cache(maxsize=64)
def _trap_weights(g: GridSpec):
    wx = np.full(g.nx, g.hx)
    wx[0] *= 0.5
    wx[-1] *= 0.5
    wy = np.full(g.ny, g.hy)
    wy[0] *= 0.5
    wy[-1] *= 0.5
    return wx, wy


def inner_l2(f1: np.ndarray, f2: np.ndarray, g: GridSpec) -> float:
    """Trapezoid-rule L2 inner product over the rectangle."""
    wx, wy = _trap_weights(g)
    return float(np.einsum("i,j,ij->", wx, wy, f1 * f2))


def norm_l2(f: np.ndarray, g: GridSpec) -> float:
    return float(np.sqrt(max(inner_l2(f, f, g), 0.0)))


def grad_energy(f: np.ndarray, g: GridSpec) -> float:
    """||grad f||^2 via edge-midpoint differences.

    Exactly the Dirichlet-Laplacian quadratic form for zero-boundary fields,
    and exactly zero iff the field is constant.
    """
    wx, wy = _trap_weights(g)
    dx = np.diff(f, axis=0) / g.hx          # (nx-1, ny) at x-edge midpoints
    dy = np.diff(f, axis=1) / g.hy          # (nx, ny-1)
    ex = np.einsum("j,ij->", wy, dx * dx) * g.hx
    ey = np.einsum("i,ij->", wx, dy * dy) * g.hy
    return float(ex + ey)


def norm_l2alpha(f: np.ndarray, alpha: float, g: GridSpec) -> float:
    """sqrt(||f||^2 + alpha ||grad f||^2)."""
    return float(np.sqrt(max(inner_l2(f, f, g) + alpha * grad_energy(f, g), 0.0)))


def norm_h1(f: np.ndarray, g: GridSpec) -> float:
    return float(np.sqrt(max(inner_l2(f, f, g) + grad_energy(f, g), 0.0)))


def seminorm_h2(f: np.ndarray, g: GridSpec) -> float:
    """||lap f|| -- the bending seminorm used for second-order energies."""
    lf = laplacian(f, g)
    return norm_l2(lf, g)


def norm_h2(f: np.ndarray, g: GridSpec) -> float:
    lf = laplacian(f, g)
    return float(np.sqrt(max(
        inner_l2(f, f, g) + grad_energy(f, g) + inner_l2(lf, lf, g), 0.0)))


# ---------------------------------------------------------------------------
# difference operators
# ---------------------------------------------------------------------------

def laplacian(f: np.ndarray, g: GridSpec) -> np.ndarray:
    """5-point Laplacian on interior nodes; boundary ring of the output is zero."""
    check_field(f, g)
    out = np.zeros_like(f)
    out[1:-1, 1:-1] = (
        (f[2:, 1:-1] - 2.0 * f[1:-1, 1:-1] + f[:-2, 1:-1]) / g.hx ** 2
        + (f[1:-1, 2:] - 2.0 * f[1:-1, 1:-1] + f[1:-1, :-2]) / g.hy ** 2
    )
    return out


def _pad_mirror(f: np.ndarray) -> np.ndarray:
    """Pad with one ghost ring using clamped reflection (ghost = mirrored interior)."""
    p = np.zeros((f.shape[0] + 2, f.shape[1] + 2))
    p[1:-1, 1:-1] = f
    p[0, 1:-1] = f[1, :]
    p[-1, 1:-1] = f[-2, :]
    p[1:-1, 0] = f[:, 1]
    p[1:-1, -1] = f[:, -2]
    return p


def _lap_extended(f: np.ndarray, g: GridSpec) -> np.ndarray:
    """Laplacian on *all* nodes of a clamped field, ghosts by reflection."""
    p = _pad_mirror(f)
    return (
        (p[2:, 1:-1] - 2.0 * p[1:-1, 1:-1] + p[:-2, 1:-1]) / g.hx ** 2
        + (p[1:-1, 2:] - 2.0 * p[1:-1, 1:-1] + p[1:-1, :-2]) / g.hy ** 2
    )


def biharmonic_clamped(f: np.ndarray, g: GridSpec) -> np.ndarray:
    """13-point clamped biharmonic (composition of Laplacians with reflected ghosts)."""
    check_field(f, g)
    if not is_clamped(f):
        raise GridError("biharmonic_clamped requires a clamped field (zero boundary ring)")
    w = _lap_extended(f, g)
    out = np.zeros_like(f)
    out[1:-1, 1:-1] = (
        (w[2:, 1:-1] - 2.0 * w[1:-1, 1:-1] + w[:-2, 1:-1]) / g.hx ** 2
        + (w[1:-1, 2:] - 2.0 * w[1:-1, 1:-1] + w[1:-1, :-2]) / g.hy ** 2
    )
    return out


def _d2_1d(n: int, h: float, mirror: bool) -> sp.csr_matrix:
    main = np.full(n, -2.0)
    off = np.ones(n - 1)
    d = sp.diags([off, main, off], [-1, 0, 1]).tolil()
    if mirror:
        d[0, 1] += 1.0
        d[n - 1, n - 2] += 1.0
    return (d / h ** 2).tocsr()


@lru_cache(maxsize=32)
def laplacian_full_matrix(g: GridSpec) -> sp.csr_matrix:
    """Laplacian on all nx*ny nodes with clamped-reflection ghost rows."""
    dx = _d2_1d(g.nx, g.hx, mirror=True)
    dy = _d2_1d(g.ny, g.hy, mirror=True)
    ix = sp.identity(g.nx, format="csr")
    iy = sp.identity(g.ny, format="csr")
    return (sp.kron(dx, iy) + sp.kron(ix, dy)).tocsr()


@lru_cache(maxsize=32)
def _interior_index(g: GridSpec) -> np.ndarray:
    mask = np.zeros((g.nx, g.ny), dtype=bool)
    mask[1:-1, 1:-1] = True
    return np.flatnonzero(mask.ravel())


@lru_cache(maxsize=32)
def biharmonic_matrix(g: GridSpec) -> sp.csr_matrix:
    """Clamped biharmonic on interior unknowns (SPD)."""
    g1 = laplacian_full_matrix(g)
    full = (g1 @ g1).tocsr()
    idx = _interior_index(g)
    return full[idx][:, idx].tocsr()


@lru_cache(maxsize=32)
def laplacian_interior_matrix(g: GridSpec) -> sp.csr_matrix:
    """5-point Dirichlet Laplacian on interior unknowns."""
    dx = _d2_1d(g.nx - 2, g.hx, mirror=False)
    dy = _d2_1d(g.ny - 2, g.hy, mirror=False)
    ix = sp.identity(g.nx - 2, format="csr")
    iy = sp.identity(g.ny - 2, format="csr")
    return (sp.kron(dx, iy) + sp.kron(ix, dy)).tocsr()


@lru_cache(maxsize=32)
def malpha_matrix(g: GridSpec, alpha: float) -> sp.csr_matrix:
    n = (g.nx - 2) * (g.ny - 2)
    return (sp.identity(n, format="csr") - alpha * laplacian_interior_matrix(g)).tocsr()


@lru_cache(maxsize=32)
def biharmonic_solver(g: GridSpec):
    return spla.splu(biharmonic_matrix(g).tocsc())


@lru_cache(maxsize=32)
def malpha_solver(g: GridSpec, alpha: float):
    return spla.splu(malpha_matrix(g, alpha).tocsc())


def malpha_apply(f: np.ndarray, alpha: float, g: GridSpec) -> np.ndarray:
    """(1 - alpha*lap) f on interior nodes, boundary ring zero."""
    out = f - alpha * laplacian(f, g)
    out[0, :] = 0.0
    out[-1, :] = 0.0
    out[:, 0] = 0.0
    out[:, -1] = 0.0
    return out


def helmholtz_malpha_solve(rhs: np.ndarray, alpha: float, g: GridSpec) -> np.ndarray:
    """Solve (1 - alpha*lap) w = rhs with w = 0 on the boundary."""
    if alpha <= 0.0:
        raise GridError("alpha must be positive")
    check_field(rhs, g)
    b = interior(rhs)
    w = malpha_solver(g, alpha).solve(b)
    res = malpha_matrix(g, alpha) @ w - b
    scale = np.linalg.norm(b)
    rel = np.linalg.norm(res) / scale if scale > 0 else np.linalg.norm(res)
    if rel > 1e-12:
        raise SolverError(f"Helmholtz solve residual {rel:.3e} exceeds 1e-12")
    return embed_interior(w, g)


def biharmonic_solve(rhs: np.ndarray, g: GridSpec, rtol: float = 1e-10):
    """Solve lap^2 v = rhs, clamped.  Returns (v, relative residual)."""
    check_field(rhs, g)
    b = interior(rhs)
    v = biharmonic_solver(g).solve(b)
    res = biharmonic_matrix(g) @ v - b
    scale = np.linalg.norm(b)
    rel = np.linalg.norm(res) / scale if scale > 0 else np.linalg.norm(res)
    if rel > rtol:
        raise SolverError(f"biharmonic solve residual {rel:.3e} exceeds {rtol:.1e}")
    return embed_interior(v, g), float(rel)


# ---------------------------------------------------------------------------
# first and second derivative fields
# ---------------------------------------------------------------------------

Deriv2 = namedtuple("Deriv2", "d11 d12 d22")


def d1x(f: np.ndarray, g: GridSpec) -> np.ndarray:
    out = np.empty_like(f)
    out[1:-1, :] = (f[2:, :] - f[:-2, :]) / (2.0 * g.hx)
    out[0, :] = (-3.0 * f[0, :] + 4.0 * f[1, :] - f[2, :]) / (2.0 * g.hx)
    out[-1, :] = (3.0 * f[-1, :] - 4.0 * f[-2, :] + f[-3, :]) / (2.0 * g.hx)
    return out


def d1y(f: np.ndarray, g: GridSpec) -> np.ndarray:
    out = np.empty_like(f)
    out[:, 1:-1] = (f[:, 2:] - f[:, :-2]) / (2.0 * g.hy)
    out[:, 0] = (-3.0 * f[:, 0] + 4.0 * f[:, 1] - f[:, 2]) / (2.0 * g.hy)
    out[:, -1] = (3.0 * f[:, -1] - 4.0 * f[:, -2] + f[:, -3]) / (2.0 * g.hy)
    return out


def d2x(f: np.ndarray, g: GridSpec, clamped: bool) -> np.ndarray:
    out = np.empty_like(f)
    out[1:-1, :] = (f[2:, :] - 2.0 * f[1:-1, :] + f[:-2, :]) / g.hx ** 2
    if clamped:
        out[0, :] = 2.0 * f[1, :] / g.hx ** 2
        out[-1, :] = 2.0 * f[-2, :] / g.hx ** 2
    else:
        out[0, :] = (2.0 * f[0, :] - 5.0 * f[1, :] + 4.0 * f[2, :] - f[3, :]) / g.hx ** 2
        out[-1, :] = (2.0 * f[-1, :] - 5.0 * f[-2, :] + 4.0 * f[-3, :] - f[-4, :]) / g.hx ** 2
    return out


def d2y(f: np.ndarray, g: GridSpec, clamped: bool) -> np.ndarray:
    out = np.empty_like(f)
    out[:, 1:-1] = (f[:, 2:] - 2.0 * f[:, 1:-1] + f[:, :-2]) / g.hy ** 2
    if clamped:
        out[:, 0] = 2.0 * f[:, 1] / g.hy ** 2
        out[:, -1] = 2.0 * f[:, -2] / g.hy ** 2
    else:
        out[:, 0] = (2.0 * f[:, 0] - 5.0 * f[:, 1] + 4.0 * f[:, 2] - f[:, 3]) / g.hy ** 2
        out[:, -1] = (2.0 * f[:, -1] - 5.0 * f[:, -2] + 4.0 * f[:, -3] - f[:, -4]) / g.hy ** 2
    return out


def dxy(f: np.ndarray, g: GridSpec, clamped: bool) -> np.ndarray:
    if clamped:
        # On a clamped edge the tangential derivative of the (vanishing)
        # normal-tangential data is zero, so the mixed derivative vanishes.
        out = np.zeros_like(f)
        out[1:-1, 1:-1] = (
            f[2:, 2:] - f[2:, :-2] - f[:-2, 2:] + f[:-2, :-2]
        ) / (4.0 * g.hx * g.hy)
        return out
    return d1y(d1x(f, g), g)


def deriv2(f: np.ndarray, g: GridSpec, clamped: bool | None = None) -> Deriv2:
    """All second derivatives of a field, using the clamped ghost rule when
    the field is clamped and one-sided differences otherwise."""
    if clamped is None:
        clamped = is_clamped(f)
    return Deriv2(d2x(f, g, clamped), dxy(f, g, clamped), d2y(f, g, clamped))


# ---------------------------------------------------------------------------
# sampling (extension of plate fields by zero outside the rectangle)
# ---------------------------------------------------------------------------

def _ishift(f: np.ndarray, m: int, n: int) -> np.ndarray:
    """out[i, j] = f[i - m, j - n], zero where the source index is out of range."""
    nx, ny = f.shape
    out = np.zeros_like(f)
    if abs(m) >= nx or abs(n) >= ny:
        return out
    dst_x = slice(max(m, 0), nx + min(m, 0))
    src_x = slice(max(-m, 0), nx + min(-m, 0))
    dst_y = slice(max(n, 0), ny + min(n, 0))
    src_y = slice(max(-n, 0), ny + min(-n, 0))
    out[dst_x, dst_y] = f[src_x, src_y]
    return out


def shift_sample(f: np.ndarray, g: GridSpec, ax: float, ay: float) -> np.ndarray:
    """Sample f(x_i - ax, y_j - ay) at every node by bilinear interpolation,
    with f extended by zero outside the closed rectangle.

    All targets share one offset, so this reduces to four integer shifts.
    """
    px = ax / g.hx
    py = ay / g.hy
    ix = int(np.floor(px))
    iy = int(np.floor(py))
    fx = px - ix
    fy = py - iy
    out = (1.0 - fx) * (1.0 - fy) * _ishift(f, ix, iy)
    if fx != 0.0:
        out += fx * (1.0 - fy) * _ishift(f, ix + 1, iy)
    if fy != 0.0:
        out += (1.0 - fx) * fy * _ishift(f, ix, iy + 1)
        if fx != 0.0:
            out += fx * fy * _ishift(f, ix + 1, iy + 1)
    return out


def sample_bilinear_pts(f: np.ndarray, g: GridSpec,
                        x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Bilinear samples of f at scattered points, zero outside the rectangle."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    inside = (x >= 0.0) & (x <= g.lx) & (y >= 0.0) & (y <= g.ly)
    px = np.clip(x / g.hx, 0.0, g.nx - 1.0)
    py = np.clip(y / g.hy, 0.0, g.ny - 1.0)
    ix = np.minimum(px.astype(int), g.nx - 2)
    iy = np.minimum(py.astype(int), g.ny - 2)
    fx = px - ix
    fy = py - iy
    vals = (
        (1.0 - fx) * (1.0 - fy) * f[ix, iy]
        + fx * (1.0 - fy) * f[ix + 1, iy]
        + (1.0 - fx) * fy * f[ix, iy + 1]
        + fx * fy * f[ix + 1, iy + 1]
    )
    return np.where(inside, vals, 0.0)


def sample_bilinear(f: np.ndarray, g: GridSpec, x: float, y: float) -> float:
    return float(sample_bilinear_pts(f, g, np.array([x]), np.array([y]))[0])
