"""Von Karman bracket, Airy stress solve, and the nonlinear plate force.

The nonlinearity of the clamped plate is
    f_v(u) = -[u, v(u) + F0],      lap^2 v(u) = -[u, u]  (clamped),
with the bracket [u, w] = u_xx w_yy + u_yy w_xx - 2 u_xy w_xy and F0 a
prescribed in-plane prestress profile.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import grid as gr
from .grid import Deriv2, GridSpec


@dataclass
class LoadSet:
    """Transverse load p0 and in-plane prestress profile F0 (with cached
    second derivatives of F0, which is generally not clamped)."""

    p0: np.ndarray
    F0: np.ndarray
    _dF0: Deriv2 | None = field(default=None, repr=False, compare=False)

    def validate(self, g: GridSpec) -> None:
        gr.check_field(self.p0, g)
        gr.check_field(self.F0, g)

    def dF0(self, g: GridSpec) -> Deriv2:
        if self._dF0 is None:
            self._dF0 = gr.deriv2(self.F0, g, clamped=gr.is_clamped(self.F0))
        return self._dF0

    @property
    def is_zero(self) -> bool:
        return not (self.p0.any() or self.F0.any())


def zero_loads(g: GridSpec) -> LoadSet:
    return LoadSet(g.zeros(), g.zeros())


def radial_prestress(beta: float, g: GridSpec) -> np.ndarray:
    """F0 = -beta (x1^2 + x2^2); compressive for beta > 0."""
    x, y = g.mesh()
    return -beta * (x * x + y * y)


def bracket_from(da: Deriv2, db: Deriv2) -> np.ndarray:
    return da.d11 * db.d22 + da.d22 * db.d11 - 2.0 * da.d12 * db.d12


def vk_bracket(u: np.ndarray, w: np.ndarray, g: GridSpec) -> np.ndarray:
    """[u, w] with centered second derivatives (clamped ghost rule per input)."""
    gr.check_field(u, g)
    gr.check_field(w, g)
    return bracket_from(gr.deriv2(u, g), gr.deriv2(w, g))


@dataclass
class AirySolution:
    v: np.ndarray
    residual_norm: float


def airy_solve(u: np.ndarray, g: GridSpec) -> AirySolution:
    """Airy stress function: lap^2 v = -[u, u], clamped."""
    if not gr.is_clamped(u):
        raise gr.GridError("airy_solve requires a clamped displacement")
    rhs = -vk_bracket(u, u, g)
    v, rel = gr.biharmonic_solve(rhs, g, rtol=1e-10)
    return AirySolution(v, rel)


def fv(u: np.ndarray, loads: LoadSet, g: GridSpec,
       v: np.ndarray | None = None) -> np.ndarray:
    """Nonlinear plate force -[u, v(u) + F0].  Pass v to reuse an Airy solve."""
    if v is None:
        v = airy_solve(u, g).v
    du = gr.deriv2(u, g)
    out = bracket_from(du, gr.deriv2(v, g)) + bracket_from(du, loads.dF0(g))
    return -out


def fv_jacobian_apply(u: np.ndarray, h: np.ndarray, loads: LoadSet, g: GridSpec,
                      v: np.ndarray | None = None) -> np.ndarray:
    """Directional derivative of f_v at u in direction h:
    -[h, v(u) + F0] - [u, dv],   lap^2 dv = -2 [u, h]."""
    if v is None:
        v = airy_solve(u, g).v
    dv, _ = gr.biharmonic_solve(-2.0 * vk_bracket(u, h, g), g, rtol=1e-10)
    dh = gr.deriv2(h, g)
    du = gr.deriv2(u, g)
    out = (bracket_from(dh, gr.deriv2(v, g)) + bracket_from(dh, loads.dF0(g))
           + bracket_from(du, gr.deriv2(dv, g)))
    return -out


def potential_energy(u: np.ndarray, loads: LoadSet, g: GridSpec,
                     v: np.ndarray | None = None) -> float:
    """Gradient-consistent discrete potential of the nonlinearity and loads:
    1/4 ||lap v(u)||^2 - 1/2 <[u,u], F0> - <p0, u>."""
    if v is None:
        v = airy_solve(u, g).v
    lv = gr.laplacian(v, g)
    buu = vk_bracket(u, u, g)
    return (0.25 * gr.inner_l2(lv, lv, g)
            - 0.5 * gr.inner_l2(buu, loads.F0, g)
            - gr.inner_l2(loads.p0, u, g))


def pi_star(u: np.ndarray, g: GridSpec, v: np.ndarray | None = None) -> float:
    """Load-free positive part of the plate potential:
    1/2 (||lap u||^2 + 1/2 ||lap v(u)||^2)."""
    if v is None:
        v = airy_solve(u, g).v
    lu = gr.laplacian(u, g)
    lv = gr.laplacian(v, g)
    return 0.5 * (gr.inner_l2(lu, lu, g) + 0.5 * gr.inner_l2(lv, lv, g))
