"""Aerodynamic memory: characteristic rays, escape time, displacement history,
and the delay potential

    q(u^t)(x) = 1/(2 pi) int_0^{t*} ds int_0^{2 pi} dtheta
                [M_theta^2 u]_ext ( x1 - (U + sin th) s, x2 - s cos th, t - s ),

with M_theta = sin(th) d1 + cos(th) d2 and u extended by zero outside the
plate.  t* is the first time after which every ray has left the rectangle.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import grid as gr
from .grid import GridSpec


class HistoryError(RuntimeError):
    pass


@dataclass(frozen=True)
class QuadratureSpec:
    """Trapezoid quadrature resolution: n_theta uniform angles (periodic),
    n_s nodes on [0, t*]."""

    n_theta: int = 16
    n_s: int = 64

    def __post_init__(self):
        if self.n_theta < 8 or self.n_theta % 2 != 0:
            raise ValueError("n_theta must be an even integer >= 8")
        if self.n_s < 16:
            raise ValueError("n_s must be >= 16")


@dataclass(frozen=True)
class AeroConfig:
    U: float
    t_star: float
    quad: QuadratureSpec = QuadratureSpec()

    def __post_init__(self):
        if not (0.0 <= self.U < 1.0):
            raise ValueError("flow speed U must lie in [0, 1)")
        if self.t_star <= 0.0:
            raise ValueError("t_star must be positive")


def characteristic_point(x1: float, x2: float, U: float,
                         theta: float, s: float) -> tuple[float, float]:
    """Foot of the ray through (x1, x2) after backward time s."""
    return (x1 - (U + np.sin(theta)) * s, x2 - s * np.cos(theta))


def escape_time(g: GridSpec, U: float, n_theta: int = 200000) -> float:
    """Supremum over starting points and angles of the ray exit time from the
    rectangle, padded by a relative safety factor of 1e-6.

    For fixed theta the exit time is min over the two coordinates of a linear
    travel time, so its sup over the rectangle is min(lx/|U+sin|, ly/|cos|);
    the theta sweep is dense sampling of that closed form.
    """
    if not (0.0 <= U < 1.0):
        raise ValueError("flow speed U must lie in [0, 1)")
    th = np.linspace(0.0, 2.0 * np.pi, n_theta, endpoint=False)
    vx = np.abs(U + np.sin(th))
    vy = np.abs(np.cos(th))
    cap = g.diameter / (1.0 - U)
    with np.errstate(divide="ignore"):
        tx = np.where(vx > 0.0, g.lx / vx, np.inf)
        ty = np.where(vy > 0.0, g.ly / vy, np.inf)
    t = float(np.max(np.minimum(tx, ty)))
    return min(t, cap) * (1.0 + 1e-6)


def extension_deriv2(u: np.ndarray, g: GridSpec):
    """Second-derivative fields of the extension of u by zero off the plate.

    Interior values follow the clamped ghost rule.  On the boundary ring the
    extended derivative jumps from its interior limit to zero, so the nodal
    value uses the mean-value convention (half the interior limit); this keeps
    the bilinearly sampled field mass-consistent with the jump and removes an
    O(h) one-sided smearing error from the delay-potential quadrature.
    """
    d = gr.deriv2(u, g, clamped=gr.is_clamped(u))
    out = []
    for a in d:
        a = a.copy()
        a[0, :] *= 0.5
        a[-1, :] *= 0.5
        a[:, 0] *= 0.5
        a[:, -1] *= 0.5
        out.append(a)
    return gr.Deriv2(*out)


# ---------------------------------------------------------------------------
# history buffer
# ---------------------------------------------------------------------------

@dataclass
class Snapshot:
    t: float
    u: np.ndarray
    d11: np.ndarray
    d12: np.ndarray
    d22: np.ndarray
    pi_star: float | None = field(default=None, compare=False)
    extras: dict = field(default_factory=dict, compare=False)


class HistoryBuffer:
    """Uniformly spaced displacement snapshots with cached second derivatives.

    Snapshots older than newest - t_star - 2*dt_hist are evicted on push.
    """

    def __init__(self, dt_hist: float, t_star: float, g: GridSpec):
        if dt_hist <= 0.0:
            raise HistoryError("dt_hist must be positive")
        self.dt_hist = dt_hist
        self.t_star = t_star
        self.grid = g
        self.snaps: list[Snapshot] = []

    def __len__(self):
        return len(self.snaps)

    @property
    def newest_t(self) -> float:
        if not self.snaps:
            raise HistoryError("empty history")
        return self.snaps[-1].t

    @property
    def oldest_t(self) -> float:
        if not self.snaps:
            raise HistoryError("empty history")
        return self.snaps[0].t

    @property
    def span(self) -> float:
        return self.newest_t - self.oldest_t

    def push(self, t: float, u: np.ndarray) -> None:
        gr.check_field(u, self.grid)
        if self.snaps:
            gap = t - self.newest_t
            if abs(gap - self.dt_hist) > 1e-9 * max(1.0, abs(t)):
                raise HistoryError(
                    f"push at t={t} breaks uniform spacing dt_hist={self.dt_hist}")
        d = extension_deriv2(u, self.grid)
        self.snaps.append(Snapshot(t, u, d.d11, d.d12, d.d22))
        cutoff = t - self.t_star - 2.0 * self.dt_hist
        while self.snaps and self.snaps[0].t < cutoff:
            self.snaps.pop(0)

    @classmethod
    def constant(cls, u: np.ndarray, t: float, t_star: float, g: GridSpec,
                 n: int = 5) -> "HistoryBuffer":
        """Synthetic history frozen at u, spanning [t - t* - 2 dt, t]."""
        dt_hist = (t_star + 2.0) / n
        buf = cls(dt_hist, t_star, g)
        d = extension_deriv2(u, g)
        for j in range(n, -1, -1):
            buf.snaps.append(Snapshot(t - j * dt_hist, u, d.d11, d.d12, d.d22))
        return buf

    def _bracket(self, tq: float) -> tuple[Snapshot, Snapshot, float]:
        t0 = self.oldest_t
        t1 = self.newest_t
        tol = 1e-9 * max(1.0, abs(t1))
        if tq < t0 - tol or tq > t1 + tol:
            raise HistoryError(
                f"time {tq} outside history span [{t0}, {t1}]")
        j = int(np.floor((tq - t0) / self.dt_hist))
        j = min(max(j, 0), len(self.snaps) - 2) if len(self.snaps) > 1 else 0
        if len(self.snaps) == 1:
            return self.snaps[0], self.snaps[0], 0.0
        a = self.snaps[j]
        b = self.snaps[j + 1]
        w = (tq - a.t) / (b.t - a.t)
        w = min(max(w, 0.0), 1.0)
        return a, b, w

    def deriv2_at(self, tq: float):
        """Linearly interpolated cached second-derivative fields at time tq."""
        a, b, w = self._bracket(tq)
        if w == 0.0:
            return a.d11, a.d12, a.d22
        if w == 1.0:
            return b.d11, b.d12, b.d22
        wa = 1.0 - w
        return (wa * a.d11 + w * b.d11,
                wa * a.d12 + w * b.d12,
                wa * a.d22 + w * b.d22)

    def u_at(self, tq: float) -> np.ndarray:
        a, b, w = self._bracket(tq)
        if w == 0.0:
            return a.u
        if w == 1.0:
            return b.u
        return (1.0 - w) * a.u + w * b.u

    def snapshot_index(self, tq: float) -> int:
        return int(round((tq - self.oldest_t) / self.dt_hist))


# ---------------------------------------------------------------------------
# delay potential
# ---------------------------------------------------------------------------

def _s_nodes(t_star: float, n_s: int):
    s = np.linspace(0.0, t_star, n_s)
    w = np.full(n_s, s[1] - s[0])
    w[0] *= 0.5
    w[-1] *= 0.5
    return s, w


def q_eval(history: HistoryBuffer, t: float, cfg: AeroConfig,
           g: GridSpec) -> np.ndarray:
    """Delay potential on all grid nodes at time t.

    Trapezoid in s on [0, t*], uniform periodic rule in theta.  The cached
    second-derivative fields are bilinearly sampled (zero outside the plate);
    for a fixed (s, theta) every node shares one offset, so each sample is a
    shifted-copy combination of whole fields.
    """
    if cfg.t_star > history.t_star + 1e-12:
        raise HistoryError("history buffer was built for a shorter delay horizon")
    tol = 1e-9 * max(1.0, abs(t))
    if t - cfg.t_star < history.oldest_t - history.dt_hist - tol:
        raise HistoryError("history span does not cover [t - t*, t]")
    s_nodes, ws = _s_nodes(cfg.t_star, cfg.quad.n_s)
    th = np.arange(cfg.quad.n_theta) * (2.0 * np.pi / cfg.quad.n_theta)
    sth = np.sin(th)
    cth = np.cos(th)
    c_ss = sth * sth
    c_sc = 2.0 * sth * cth
    c_cc = cth * cth
    wth = 2.0 * np.pi / cfg.quad.n_theta
    acc = g.zeros()
    for s, w_s in zip(s_nodes, ws):
        tq = t - s
        if tq < history.oldest_t - tol:
            tq = history.oldest_t
        d11, d12, d22 = history.deriv2_at(tq)
        coef = w_s * wth
        for m in range(cfg.quad.n_theta):
            integrand = c_ss[m] * d11 + c_sc[m] * d12 + c_cc[m] * d22
            ax = (cfg.U + sth[m]) * s
            ay = cth[m] * s
            acc += coef * gr.shift_sample(integrand, g, ax, ay)
    return acc / (2.0 * np.pi)


def q_static(u: np.ndarray, cfg: AeroConfig, g: GridSpec) -> np.ndarray:
    """Delay potential of a time-constant history equal to u."""
    buf = HistoryBuffer.constant(u, 0.0, cfg.t_star, g)
    return q_eval(buf, 0.0, cfg, g)
