"""Reconstruction of the flow potential in the half space x3 > 0 from the
plate displacement history.

With the downwash h = u_t + U u_x1 (extended by zero outside the plate), the
potential and its derivatives are retarded ray averages over the backward
time window [x3, t*]:

    phi(x, t)   = -1/(2 pi) int_{x3}^{t*} ds int dtheta  h^(s, theta)
    phi_t       = -(1/2 pi) int dtheta [ h^(s=x3) - h^(s=t*) ]
                  + 1/(2 pi) int int [ U h_x1^ + (s/r) (M_th h)^ ]
    phi_xi      = -1/(2 pi) int int  h_xi^            (i = 1, 2)
    phi_x3      = h(x1 - U x3, x2, t - x3)
                  - 1/(2 pi) int int (x3 / r) (M_th h)^

where r = sqrt(s^2 - x3^2), the retarded evaluation point is
(x1 - U s - r sin th, x2 - r cos th, t - s), and M_th = sin th d1 + cos th d2.
The weakly singular weights s/r and x3/r are integrated with the substitution
s = x3 cosh(sigma), which removes the singularity.  phi vanishes identically
(and exactly) ahead of the wavefront x3 > t.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import grid as gr
from .aero import AeroConfig, HistoryBuffer, HistoryError, QuadratureSpec, q_eval
from .grid import GridSpec


@dataclass
class FlowSampleSet:
    """Reconstructed potential values at scattered half-space points."""

    points: np.ndarray          # (n, 3)
    t: float
    phi: np.ndarray             # (n,)
    phi_t: np.ndarray           # (n,)
    grad: np.ndarray            # (n, 3)


def _half_ring(a: np.ndarray) -> np.ndarray:
    """Mean-value convention for a field extended by zero off the plate: the
    boundary-ring nodal value is half the interior limit, so bilinear sampling
    across the jump stays mass-consistent (see aero.extension_deriv2)."""
    a = a.copy()
    a[0, :] *= 0.5
    a[-1, :] *= 0.5
    a[:, 0] *= 0.5
    a[:, -1] *= 0.5
    return a


def _ut_snapshot(history: HistoryBuffer, j: int) -> np.ndarray:
    """Second-order time derivative of the displacement at snapshot j."""
    snaps = history.snaps
    dt = history.dt_hist
    if len(snaps) < 3:
        raise HistoryError("need at least 3 snapshots to differentiate in time")
    if j == 0:
        return (-3.0 * snaps[0].u + 4.0 * snaps[1].u - snaps[2].u) / (2.0 * dt)
    if j == len(snaps) - 1:
        return (3.0 * snaps[-1].u - 4.0 * snaps[-2].u + snaps[-3].u) / (2.0 * dt)
    return (snaps[j + 1].u - snaps[j - 1].u) / (2.0 * dt)


class MaterialFields:
    """Per-snapshot downwash h = u_t + U u_x1 and its first derivatives,
    cached on the snapshots."""

    def __init__(self, history: HistoryBuffer, U: float):
        self.history = history
        self.U = U
        self.key = ("downwash", round(U, 15))

    def at_index(self, j: int):
        snap = self.history.snaps[j]
        cached = snap.extras.get(self.key)
        if cached is None:
            g = self.history.grid
            h = _ut_snapshot(self.history, j) + self.U * gr.d1x(snap.u, g)
            cached = (h, _half_ring(gr.d1x(h, g)), _half_ring(gr.d1y(h, g)))
            snap.extras[self.key] = cached
        return cached

    def bracket(self, tq: float):
        """(fields_a, fields_b, weight) for linear interpolation at time tq."""
        a, b, w = self.history._bracket(tq)
        ja = self.history.snaps.index(a)
        jb = self.history.snaps.index(b)
        return self.at_index(ja), self.at_index(jb), w

    def combined(self, tq: float):
        fa, fb, w = self.bracket(tq)
        if w == 0.0:
            return fa
        if w == 1.0:
            return fb
        wa = 1.0 - w
        return tuple(wa * a + w * b for a, b in zip(fa, fb))

    def gather(self, tq: float, x: np.ndarray, y: np.ndarray):
        """(h, hx, hy) at scattered plate points, zero outside the plate."""
        g = self.history.grid
        fa, fb, w = self.bracket(tq)
        vals = []
        for a, b in zip(fa, fb):
            va = gr.sample_bilinear_pts(a, g, x, y)
            if w == 0.0:
                vals.append(va)
            else:
                vals.append((1.0 - w) * va + w * gr.sample_bilinear_pts(b, g, x, y))
        return vals


def u_dagger(history: HistoryBuffer, x: np.ndarray, t: float,
             s: float, theta: float, U: float) -> float:
    """Displacement at the retarded ray point for x = (x1, x2, x3)."""
    x1, x2, x3 = x
    if s < x3:
        raise ValueError("retarded time s must be >= x3")
    r = np.sqrt(max(s * s - x3 * x3, 0.0))
    p1 = x1 - U * s - r * np.sin(theta)
    p2 = x2 - r * np.cos(theta)
    u = history.u_at(t - s)
    return gr.sample_bilinear(u, history.grid, p1, p2)


def _trap_w(nodes: np.ndarray) -> np.ndarray:
    if len(nodes) < 2:
        return np.zeros_like(nodes)
    w = np.full(len(nodes), nodes[1] - nodes[0])
    w[0] *= 0.5
    w[-1] *= 0.5
    return w


def reconstruct(history: HistoryBuffer, points: np.ndarray, t: float,
                cfg: AeroConfig, quad: QuadratureSpec | None = None) -> FlowSampleSet:
    """Evaluate phi, phi_t and grad phi at scattered points (x1, x2, x3 >= 0)."""
    g = history.grid
    quad = quad or cfg.quad
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if points.shape[1] != 3:
        raise ValueError("points must be (n, 3)")
    if np.any(points[:, 2] < 0.0):
        raise ValueError("sample points must have x3 >= 0")
    n = points.shape[0]
    phi = np.zeros(n)
    phi_t = np.zeros(n)
    grad = np.zeros((n, 3))

    mat = MaterialFields(history, cfg.U)
    th = np.arange(quad.n_theta) * (2.0 * np.pi / quad.n_theta)
    sth, cth = np.sin(th), np.cos(th)
    wth = 2.0 * np.pi / quad.n_theta
    tstar = cfg.t_star
    U = cfg.U

    for ip in range(n):
        x1, x2, x3 = points[ip]
        if x3 > t or x3 >= tstar:
            continue  # ahead of the wavefront / empty retarded window
        # boundary (s = x3) term: the ray foot collapses to a single point
        h0 = mat.gather(t - x3, np.array([x1 - U * x3]), np.array([x2]))[0][0]
        # uniform s-grid for the weight-1 integrals
        s_nodes = np.linspace(x3, tstar, quad.n_s)
        ws = _trap_w(s_nodes)
        acc_phi = 0.0
        acc_x1 = 0.0         # also the U h_x1 part of phi_t
        acc_x2 = 0.0
        for s, w_s in zip(s_nodes, ws):
            r = np.sqrt(max(s * s - x3 * x3, 0.0))
            px = x1 - U * s - r * sth
            py = x2 - r * cth
            hv, hx, hy = mat.gather(t - s, px, py)
            acc_phi += w_s * hv.sum()
            acc_x1 += w_s * hx.sum()
            acc_x2 += w_s * hy.sum()
        # s = t* boundary values for phi_t
        r_star = np.sqrt(max(tstar * tstar - x3 * x3, 0.0))
        h_star = mat.gather(t - tstar, x1 - U * tstar - r_star * sth,
                            x2 - r_star * cth)[0]
        # weakly singular part: s = x3 cosh(sigma) for x3 > 0
        acc_sing_t = 0.0     # int (s/r) (M_th h)^
        acc_sing_3 = 0.0     # int (x3/r) (M_th h)^
        if x3 > 0.0:
            sig_max = np.arccosh(tstar / x3)
            sig = np.linspace(0.0, sig_max, quad.n_s)
            wsig = _trap_w(sig)
            for sg, w_s in zip(sig, wsig):
                s = x3 * np.cosh(sg)
                r = x3 * np.sinh(sg)
                px = x1 - U * s - r * sth
                py = x2 - r * cth
                _, hx, hy = mat.gather(t - s, px, py)
                mth = (sth * hx + cth * hy).sum()
                acc_sing_t += w_s * x3 * np.cosh(sg) * mth
                acc_sing_3 += w_s * x3 * mth
        else:
            for s, w_s in zip(s_nodes, ws):
                px = x1 - U * s - s * sth
                py = x2 - s * cth
                _, hx, hy = mat.gather(t - s, px, py)
                acc_sing_t += w_s * (sth * hx + cth * hy).sum()

        phi[ip] = -acc_phi * wth / (2.0 * np.pi)
        grad[ip, 0] = -acc_x1 * wth / (2.0 * np.pi)
        grad[ip, 1] = -acc_x2 * wth / (2.0 * np.pi)
        grad[ip, 2] = h0 - acc_sing_3 * wth / (2.0 * np.pi)
        phi_t[ip] = (-(h0 - h_star.sum() * wth / (2.0 * np.pi))
                     + (U * acc_x1 + acc_sing_t) * wth / (2.0 * np.pi))
    return FlowSampleSet(points, t, phi, phi_t, grad)


def trace_material_derivative(history: HistoryBuffer, t: float, cfg: AeroConfig,
                              quad: QuadratureSpec | None = None):
    """Cross-check of the plate/flow coupling on the plate surface:

        (d_t + U d1) phi |_{x3=0}  ==  -(u_t + U u_x1) - q(u^t).

    The left side is assembled from the reconstructed phi_t and phi_x1 at
    x3 = 0 (shared-offset fast path over all grid nodes); the right side uses
    the delay potential.  Returns (lhs, rhs, relative L2 residual).
    """
    g = history.grid
    quad = quad or cfg.quad
    mat = MaterialFields(history, cfg.U)
    U = cfg.U
    tstar = cfg.t_star
    th = np.arange(quad.n_theta) * (2.0 * np.pi / quad.n_theta)
    sth, cth = np.sin(th), np.cos(th)
    wth = 2.0 * np.pi / quad.n_theta
    s_nodes = np.linspace(0.0, tstar, quad.n_s)
    ws = _trap_w(s_nodes)

    h_now = mat.combined(t)[0]
    int_mth = g.zeros()      # int int (M_th h)^
    int_hx1 = g.zeros()      # int int h_x1^
    for s, w_s in zip(s_nodes, ws):
        _, hx, hy = mat.combined(t - s)
        for m in range(quad.n_theta):
            ax = (U + sth[m]) * s
            ay = cth[m] * s
            sx = gr.shift_sample(hx, g, ax, ay)
            sy = gr.shift_sample(hy, g, ax, ay)
            coef = w_s * wth
            int_mth += coef * (sth[m] * sx + cth[m] * sy)
            int_hx1 += coef * sx
    h_star, _, _ = mat.combined(t - tstar)
    bdry = g.zeros()
    for m in range(quad.n_theta):
        bdry += wth * gr.shift_sample(h_star, g, (U + sth[m]) * tstar, cth[m] * tstar)

    phi_t = -(h_now - bdry / (2.0 * np.pi)) + (U * int_hx1 + int_mth) / (2.0 * np.pi)
    phi_x1 = -int_hx1 / (2.0 * np.pi)
    lhs = phi_t + U * phi_x1

    aero_quad_cfg = AeroConfig(U, tstar, quad)
    rhs = -h_now - q_eval(history, t, aero_quad_cfg, g)
    num = gr.norm_l2(lhs - rhs, g)
    den = gr.norm_l2(rhs, g)
    rel = num / den if den > 0 else num
    return lhs, rhs, float(rel)


def reconstruct_box(history: HistoryBuffer, t: float, cfg: AeroConfig,
                    box, dims, quad: QuadratureSpec | None = None):
    """Reconstruct on a tensor grid over box = (x0, x1, y0, y1, z0, z1) with
    dims = (nx, ny, nz) nodes.  Returns (FlowSampleSet, axes)."""
    x0, x1, y0, y1, z0, z1 = box
    nx, ny, nz = dims
    xs = np.linspace(x0, x1, nx)
    ys = np.linspace(y0, y1, ny)
    zs = np.linspace(z0, z1, nz)
    X, Y, Z = np.meshgrid(xs, ys, zs, indexing="ij")
    pts = np.column_stack([X.ravel(), Y.ravel(), Z.ravel()])
    fs = reconstruct(history, pts, t, cfg, quad)
    return fs, (xs, ys, zs)


def flow_energy_box(fs: FlowSampleSet, axes, cfg: AeroConfig,
                    u: np.ndarray | None = None, g: GridSpec | None = None):
    """Truncated flow energy over the sampled box and the plate/flow
    interaction term (the latter only when the box touches x3 = 0).

        E_fl  = 1/2 int_box ( phi_t^2 + |grad phi|^2 - U^2 phi_x1^2 )
        E_int = 2 U int_{x3=0 face} phi * u_x1
    """
    xs, ys, zs = axes
    dims = (len(xs), len(ys), len(zs))
    wx, wy, wz = (_trap_w(a) for a in (xs, ys, zs))
    dens = (fs.phi_t ** 2 + np.sum(fs.grad ** 2, axis=1)
            - cfg.U ** 2 * fs.grad[:, 0] ** 2).reshape(dims)
    e_fl = 0.5 * float(np.einsum("i,j,k,ijk->", wx, wy, wz, dens))
    e_int = None
    if zs[0] == 0.0 and u is not None and g is not None:
        phi_face = fs.phi.reshape(dims)[:, :, 0]
        X, Y = np.meshgrid(xs, ys, indexing="ij")
        ux1 = gr.sample_bilinear_pts(gr.d1x(u, g), g, X.ravel(), Y.ravel())
        integrand = phi_face * ux1.reshape(len(xs), len(ys))
        e_int = 2.0 * cfg.U * float(np.einsum("i,j,ij->", wx, wy, integrand))
    return e_fl, e_int
