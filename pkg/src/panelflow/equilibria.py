"""Stationary states of the delayed plate equation and buckling analysis.

The stationary residual is
    G(u) = lap^2 u + f_v(u) + U d1 u + q_static(u; U) - p0,
solved by Newton with a matrix-free Jacobian (Krylov inner solves,
biharmonic-preconditioned).  For the compressive prestress family
F0 = -beta (x1^2 + x2^2) the trivial branch loses stability at
beta0 = lambda_1 / 2, where lambda_1 is the smallest eigenvalue of the
clamped buckling pencil lap^2 h = lambda (-lap) h.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse.linalg as spla

from . import grid as gr
from . import vonkarman as vk
from .aero import AeroConfig, q_static
from .grid import GridSpec
from .vonkarman import LoadSet


def stationary_residual(u: np.ndarray, p, cfg: AeroConfig, g: GridSpec) -> np.ndarray:
    loads = p.loads or vk.zero_loads(g)
    r = (gr.biharmonic_clamped(u, g) + vk.fv(u, loads, g)
         + p.U * gr.d1x(u, g) + q_static(u, cfg, g) - loads.p0)
    r[0, :] = 0.0
    r[-1, :] = 0.0
    r[:, 0] = 0.0
    r[:, -1] = 0.0
    return r


@dataclass
class NewtonResult:
    u: np.ndarray
    residual_norm: float
    iterations: int
    converged: bool


def newton_solve(guess: np.ndarray, p, cfg: AeroConfig, g: GridSpec,
                 tol: float = 1e-10, max_iter: int = 30,
                 krylov_tol: float = 1e-8, max_halvings: int = 30) -> NewtonResult:
    """Damped Newton iteration on the stationary residual.

    Convergence is relative: the residual is compared against the magnitude
    of the stiffest term at the current iterate, so large-amplitude buckled
    states (where individual terms reach O(1e3)) converge to the rounding
    floor of the residual evaluation rather than an unreachable absolute
    threshold.
    """
    loads = p.loads or vk.zero_loads(g)
    u = guess.copy()
    n_int = (g.nx - 2) * (g.ny - 2)
    b_lu = gr.biharmonic_solver(g)
    precond = spla.LinearOperator((n_int, n_int), matvec=b_lu.solve)

    def res_scale(w):
        return (1.0 + gr.norm_l2(loads.p0, g)
                + gr.norm_l2(gr.biharmonic_clamped(w, g), g))

    res = stationary_residual(u, p, cfg, g)
    rnorm = gr.norm_l2(res, g)
    for it in range(1, max_iter + 1):
        if rnorm <= tol * res_scale(u):
            return NewtonResult(u, rnorm, it - 1, True)
        v_u = vk.airy_solve(u, g).v

        def jmv(h_int):
            h = gr.embed_interior(h_int, g)
            jh = (gr.biharmonic_clamped(h, g)
                  + vk.fv_jacobian_apply(u, h, loads, g, v=v_u)
                  + p.U * gr.d1x(h, g) + q_static(h, cfg, g))
            return gr.interior(jh)

        jac = spla.LinearOperator((n_int, n_int), matvec=jmv)
        rhs = -gr.interior(res)
        # info != 0 (no Krylov convergence, e.g. near-singular Jacobian at a
        # bifurcation point) still yields the best available iterate; the
        # line search below rejects it if it is not a descent direction.
        step_int, _ = spla.lgmres(jac, rhs, M=precond, rtol=krylov_tol,
                                  atol=0.0, maxiter=200)
        step = gr.embed_interior(step_int, g)
        lam = 1.0
        for _ in range(max_halvings):
            trial = u + lam * step
            res_t = stationary_residual(trial, p, cfg, g)
            rn_t = gr.norm_l2(res_t, g)
            if rn_t < (1.0 - 1e-4 * lam) * rnorm:
                break
            lam *= 0.5
        else:
            return NewtonResult(u, rnorm, it, rnorm <= tol * res_scale(u))
        u, res, rnorm = trial, res_t, rn_t
    return NewtonResult(u, rnorm, max_iter, rnorm <= tol * res_scale(u))


def buckling_critical_load(g: GridSpec, tol: float = 1e-10,
                           max_iter: int = 400):
    """Smallest eigenvalue of lap^2 h = lambda (-lap) h (clamped), by inverse
    iteration with the factorized biharmonic.  Returns (beta0, eigvec) with
    beta0 = lambda_1 / 2 and the eigenvector normalized to unit bending norm."""
    b_lu = gr.biharmonic_solver(g)
    b_mat = gr.biharmonic_matrix(g)
    c_mat = -gr.laplacian_interior_matrix(g)
    rng = np.random.default_rng(7)
    x = rng.standard_normal(b_mat.shape[0])
    lam_old = np.inf
    for _ in range(max_iter):
        y = b_lu.solve(c_mat @ x)
        x = y / np.linalg.norm(y)
        lam = float((x @ (b_mat @ x)) / (x @ (c_mat @ x)))
        if abs(lam - lam_old) <= tol * abs(lam):
            break
        lam_old = lam
    vec = gr.embed_interior(x, g)
    vec /= gr.seminorm_h2(vec, g)
    return 0.5 * lam, vec


def buckling_seed(beta: float, beta0: float, psi: np.ndarray,
                  g: GridSpec) -> np.ndarray:
    """Newton seed on the buckled branch from the reduced single-mode model.

    Projecting the stationary equation onto the critical mode psi gives the
    pitchfork balance (2 beta0 - 2 beta) c a + d a^3 = 0 with
    c = <-lap psi, psi> and d = ||lap v(psi)||^2, so the bifurcating branch
    has amplitude a = sqrt(2 (beta - beta0) c / d).  Seeding at that
    amplitude lands inside the Newton basin of the nontrivial state; small
    seeds fall back to the flat state because the linearization there is
    invertible.
    """
    c = gr.inner_l2(-gr.laplacian(psi, g), psi, g)
    d = gr.norm_l2(gr.laplacian(vk.airy_solve(psi, g).v, g), g) ** 2
    a = np.sqrt(max(2.0 * (beta - beta0) * c / d, 0.0))
    return a * psi


def trivial_branch_eig(beta: float, g: GridSpec) -> float:
    """Smallest eigenvalue of the linearization at u = 0 for the radial
    prestress family (lap^2 + 2 beta lap); negative means the flat state has
    buckled."""
    a = (gr.biharmonic_matrix(g) + 2.0 * beta * gr.laplacian_interior_matrix(g)).tocsc()
    vals = spla.eigsh(a, k=1, sigma=0.0, which="LM", return_eigenvectors=False)
    return float(vals[0])


@dataclass
class BranchPoint:
    param: float
    u: np.ndarray
    norm_h2: float
    residual: float
    iterations: int
    smallest_eig: float | None


def continuation_sweep(betas, p_template, cfg: AeroConfig, g: GridSpec,
                       seed_amp: float = 0.05, tol: float = 1e-10,
                       track_eig: bool = True) -> list[BranchPoint]:
    """Natural-parameter continuation along the radial prestress family.

    Warm-starts each solve from the previous solution; when the trivial branch
    goes unstable and the current iterate is still flat, the solve is re-seeded
    with +- the critical eigenvector and the nontrivial branch (if any) is kept.
    """
    from .integrate import PhysParams

    beta0, psi = buckling_critical_load(g)
    points: list[BranchPoint] = []
    u_prev = g.zeros()
    for beta in betas:
        loads = LoadSet(p_template.loads.p0.copy() if p_template.loads else g.zeros(),
                        vk.radial_prestress(beta, g))
        p = PhysParams(U=p_template.U, alpha=p_template.alpha,
                       k=p_template.k, loads=loads)
        eig = trivial_branch_eig(beta, g) if track_eig else None
        guess = u_prev
        if gr.seminorm_h2(u_prev, g) < 1e-8 and eig is not None and eig < 0.0:
            guess = buckling_seed(beta, beta0, psi, g)
        res = newton_solve(guess, p, cfg, g, tol=tol)
        if not res.converged:
            res = newton_solve(g.zeros(), p, cfg, g, tol=tol)
        points.append(BranchPoint(beta, res.u, gr.seminorm_h2(res.u, g),
                                  res.residual_norm, res.iterations, eig))
        u_prev = res.u
    return points


def locate_buckling_bisection(g: GridSpec, cfg: AeroConfig, beta_lo: float,
                              beta_hi: float, p_template=None,
                              rel_tol: float = 5e-3,
                              detect: float = 1e-6) -> float:
    """Bracket the critical load by bisection on "does Newton, seeded with the
    critical eigenvector, land on a nontrivial state"."""
    from .integrate import PhysParams

    beta0_est, psi = buckling_critical_load(g)

    def nontrivial(beta: float) -> bool:
        loads = LoadSet(g.zeros(), vk.radial_prestress(beta, g))
        p = PhysParams(U=cfg.U, alpha=0.1, k=0.1, loads=loads)
        seed = buckling_seed(beta, beta_lo, psi, g)
        if gr.seminorm_h2(seed, g) < detect:
            seed = 0.05 * psi
        res = newton_solve(seed, p, cfg, g, tol=1e-10)
        return res.converged and gr.seminorm_h2(res.u, g) > detect

    lo, hi = beta_lo, beta_hi
    if nontrivial(lo):
        raise ValueError("beta_lo already supercritical")
    if not nontrivial(hi):
        raise ValueError("beta_hi still subcritical")
    while (hi - lo) > rel_tol * hi:
        mid = 0.5 * (lo + hi)
        if nontrivial(mid):
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)
