"""Energy bookkeeping, the Lyapunov functional, and trajectory probes.

Energies (gradient-consistent discrete conventions):

    ke      = 1/2 ||u_t||^2 + alpha/2 ||grad u_t||^2
    Pi*     = 1/2 ( ||lap u||^2 + 1/2 ||lap v(u)||^2 )
    E*      = ke + Pi*
    E_pl    = E* - 1/2 <[u,u], F0> - <p0, u>
    V       = E_pl + nu ( <u_t, u>_a + k <u, u>_a )
              + mu int_0^{t*} int_{t-s}^{t} Pi*(u(tau)) dtau ds

with <a, b>_a = <a, b> + alpha <grad a, grad b>.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import grid as gr
from . import vonkarman as vk
from .grid import GridSpec


@dataclass(frozen=True)
class LyapunovWeights:
    nu: float = 0.01
    mu: float = 0.01


@dataclass
class EnergyReport:
    t: float
    e_pl: float
    e_star: float
    pi_star: float
    v_lyap: float
    ke: float
    ut_l2alpha: float
    diss_accum: float
    power_residual: float
    u_center: float

    CSV_COLUMNS = ("t", "E_pl", "E_star", "Pi_star", "V", "ke",
                   "ut_l2alpha", "diss_accum", "power_residual", "u_center")

    def csv_row(self):
        return (self.t, self.e_pl, self.e_star, self.pi_star, self.v_lyap,
                self.ke, self.ut_l2alpha, self.diss_accum,
                self.power_residual, self.u_center)


def kinetic_energy(ut: np.ndarray, alpha: float, g: GridSpec) -> float:
    return 0.5 * gr.norm_l2alpha(ut, alpha, g) ** 2


def grad_inner(a: np.ndarray, b: np.ndarray, g: GridSpec) -> float:
    """<grad a, grad b> by polarization of the edge-midpoint gradient energy."""
    return 0.25 * (gr.grad_energy(a + b, g) - gr.grad_energy(a - b, g))


def inner_alpha(a: np.ndarray, b: np.ndarray, alpha: float, g: GridSpec) -> float:
    return gr.inner_l2(a, b, g) + alpha * grad_inner(a, b, g)


def _snapshot_pi_star(snap, g: GridSpec) -> float:
    if snap.pi_star is None:
        snap.pi_star = vk.pi_star(snap.u, g)
    return snap.pi_star


def history_potential_integral(history, t: float, g: GridSpec) -> float:
    """int_0^{t*} int_{t-s}^{t} Pi*(u(tau)) dtau ds, by swapping the order:
    int_{t-t*}^{t} Pi*(tau) (t* - (t - tau)) dtau over the buffered snapshots."""
    tstar = history.t_star
    taus, vals = [], []
    for snap in history.snaps:
        if snap.t < t - tstar - 1e-12 or snap.t > t + 1e-12:
            continue
        taus.append(snap.t)
        vals.append(_snapshot_pi_star(snap, g) * (tstar - (t - snap.t)))
    if len(taus) < 2:
        return 0.0
    return float(np.trapezoid(vals, taus))


def energy_report(state, history, p, loads, weights: LyapunovWeights,
                  g: GridSpec, diss_accum: float = 0.0,
                  power_residual: float = 0.0) -> EnergyReport:
    v_airy = vk.airy_solve(state.u, g).v
    ke = kinetic_energy(state.ut, p.alpha, g)
    pis = vk.pi_star(state.u, g, v=v_airy)
    e_star = ke + pis
    buu = vk.vk_bracket(state.u, state.u, g)
    e_pl = (e_star - 0.5 * gr.inner_l2(buu, loads.F0, g)
            - gr.inner_l2(loads.p0, state.u, g))
    cross = (inner_alpha(state.ut, state.u, p.alpha, g)
             + p.k * inner_alpha(state.u, state.u, p.alpha, g))
    v_lyap = (e_pl + weights.nu * cross
              + weights.mu * history_potential_integral(history, state.t, g))
    return EnergyReport(
        t=state.t, e_pl=e_pl, e_star=e_star, pi_star=pis, v_lyap=v_lyap,
        ke=ke, ut_l2alpha=gr.norm_l2alpha(state.ut, p.alpha, g),
        diss_accum=diss_accum, power_residual=power_residual,
        u_center=float(state.u[g.nx // 2, g.ny // 2]))


def convergence_monitor(states, equilibria, g: GridSpec) -> np.ndarray:
    """Distance of each state to the nearest listed equilibrium:
    min_j ||u - ubar_j||_2^2 + ||u_t||_1^2."""
    out = np.empty(len(states))
    for i, st in enumerate(states):
        d2 = min(gr.seminorm_h2(st.u - ub, g) ** 2 for ub in equilibria)
        out[i] = d2 + gr.norm_h1(st.ut, g) ** 2
    return out


# ---------------------------------------------------------------------------
# probes: minimal-constant fits against the model's stability estimates
# ---------------------------------------------------------------------------

@dataclass
class ProbeReport:
    name: str
    constants: dict
    passed: bool
    details: dict = field(default_factory=dict)


def difference_energy(sa, sb, alpha: float, g: GridSpec) -> float:
    """E_z = ||z_t||_{L2_a}^2 + ||lap z||^2 for z = u_a - u_b."""
    z = sa.u - sb.u
    zt = sa.ut - sb.ut
    return gr.norm_l2alpha(zt, alpha, g) ** 2 + gr.seminorm_h2(z, g) ** 2


def lipschitz_fit(times, ez, a_max: float = 10.0, n_grid: int = 400):
    """Minimal (C, a >= 0) with E_z(t) <= C e^{a t} E_z(0) on all samples.

    Among admissible exponents the fit picks the one minimizing the bound at
    the final time, i.e. log C(a) + a T.
    """
    times = np.asarray(times, float)
    ez = np.asarray(ez, float)
    if ez[0] <= 0.0:
        raise ValueError("difference energy at t=0 must be positive")
    rel = np.log(ez / ez[0])
    best = None
    for a in np.linspace(0.0, a_max, n_grid):
        logc = float(np.max(rel - a * times))
        obj = logc + a * times[-1]
        if best is None or obj < best[0]:
            best = (obj, a, logc)
    _, a, logc = best
    return float(np.exp(max(logc, 0.0))), float(a)


def lipschitz_probe(pairs_train, pairs_holdout, alpha, g, margin=2.0) -> ProbeReport:
    """pairs_*: lists of (traj_a, traj_b) with matching record times."""
    samples = []
    for ta, tb in pairs_train:
        ez = [difference_energy(sa, sb, alpha, g)
              for sa, sb in zip(ta.states, tb.states)]
        samples.append((np.asarray(ta.times), np.asarray(ez)))
    c_fit, a_fit = 1.0, 0.0
    for times, ez in samples:
        c, a = lipschitz_fit(times, ez)
        c_fit = max(c_fit, c)
        a_fit = max(a_fit, a)
    ok = True
    worst = 0.0
    for ta, tb in pairs_holdout:
        ez = np.asarray([difference_energy(sa, sb, alpha, g)
                         for sa, sb in zip(ta.states, tb.states)])
        bound = margin * c_fit * np.exp(a_fit * np.asarray(ta.times)) * ez[0]
        ratio = float(np.max(ez / bound))
        worst = max(worst, ratio)
        ok = ok and ratio <= 1.0
    return ProbeReport("lipschitz", {"C": c_fit, "a": a_fit}, ok,
                       {"holdout_worst_ratio": worst})


def _quasi_terms(ta, tb, alpha, t_star, delta, g):
    """LHS, RHS0 and lower-order sup for one trajectory pair."""
    times = np.asarray(ta.times)
    z_states = [(sa.u - sb.u, sa.ut - sb.ut)
                for sa, sb in zip(ta.states, tb.states)]
    h2 = np.array([gr.seminorm_h2(z, g) for z, _ in z_states])
    h1 = np.array([gr.norm_h1(z, g) for z, _ in z_states])
    ez_end = difference_energy(ta.states[-1], tb.states[-1], alpha, g)
    ez_0 = difference_energy(ta.states[0], tb.states[0], alpha, g)
    t_end = times[-1]
    tail = times >= t_end - t_star - 1e-12
    tail_int = float(np.trapezoid(h2[tail] ** 2, times[tail]))
    # constant prehistory difference: the backward integral is t* ||z(0)||_2^2
    rhs0 = ez_0 + t_star * h2[0] ** 2
    lower = float(np.max((h1 ** delta * h2 ** (1.0 - delta)) ** 2))
    return ez_end + tail_int, rhs0, lower


def quasistability_probe(pairs_train, pairs_holdout, alpha, t_star, g,
                         delta: float = 0.5, margin: float = 2.0) -> ProbeReport:
    """Fit minimal (beta, C_q) with
        E_z(T) + int_{T-t*}^T ||z||_2^2 <= beta (E_z(0) + int_pre) + C_q sup ||z||_{2-d}^2
    over the training pairs; the interpolation norm is ||z||_1^d ||z||_2^{1-d}.
    Passes when beta < 1 and the bound holds with the given margin on the
    held-out pairs."""
    terms = [_quasi_terms(ta, tb, alpha, t_star, delta, g)
             for ta, tb in pairs_train]
    lhs = np.array([x[0] for x in terms])
    rhs = np.array([x[1] for x in terms])
    low = np.array([x[2] for x in terms])
    # 1-D scan over C_q; beta(C) = max_i (lhs - C*low)+ / rhs
    c_max = float(np.max(lhs / np.maximum(low, 1e-300)))
    scale = float(np.median(low) / np.median(rhs)) if np.median(rhs) > 0 else 1.0
    best = None
    for c in np.linspace(0.0, c_max, 400):
        beta = float(np.max(np.maximum(lhs - c * low, 0.0) / rhs))
        obj = beta + 0.05 * c * scale
        if best is None or obj < best[0]:
            best = (obj, beta, c)
    _, beta, c_q = best
    ok = beta < 1.0
    worst = 0.0
    for ta, tb in pairs_holdout:
        l, r, s = _quasi_terms(ta, tb, alpha, t_star, delta, g)
        ratio = l / (margin * (beta * r + c_q * s)) if (beta * r + c_q * s) > 0 else np.inf
        worst = max(worst, float(ratio))
        ok = ok and ratio <= 1.0
    return ProbeReport("quasistability", {"beta": beta, "C_q": c_q}, ok,
                       {"holdout_worst_ratio": worst, "delta": delta})


def lyapunov_fit(times, v, n_grid: int = 200):
    """Largest decay rate delta with
        V(t) <= V(0) e^{-d t} + (C_V/d)(1 - e^{-d t}),
    subject to the asymptote C_V/d not exceeding the initial level (so the
    fit is a genuine decay-to-a-ball statement).  Returns (delta, C_V);
    delta = 0 signals a degenerate fit."""
    times = np.asarray(times, float)
    v = np.asarray(v, float)
    v0 = v[0]
    spread = max(np.max(np.abs(v)), 1e-300)
    cap = v0 + 1e-9 * spread
    pos = times > 0
    best = (0.0, 0.0)
    for d in np.logspace(-4, 2, n_grid):
        decay = np.exp(-d * times[pos])
        need = d * (v[pos] - v0 * decay) / (1.0 - decay)
        c = float(max(np.max(need), 0.0))
        if c / d <= cap and d > best[0]:
            best = (d, c)
    return best


def lyapunov_probe(times, v_values, holdout=None, margin: float = 2.0) -> ProbeReport:
    delta, c_v = lyapunov_fit(times, v_values)
    ok = delta > 0.0
    details = {}
    if holdout is not None and ok:
        ht, hv = holdout
        ht = np.asarray(ht, float)
        hv = np.asarray(hv, float)
        v0 = hv[0]
        bound = v0 * np.exp(-delta * ht) + (c_v / delta) * (1.0 - np.exp(-delta * ht))
        slack = margin * max(abs(v0), c_v / delta, 1e-300)
        worst = float(np.max(hv - bound) / slack)
        details["holdout_excess"] = worst
        ok = ok and np.all(hv <= bound + slack)
    return ProbeReport("lyapunov", {"delta": delta, "C_V": c_v}, ok, details)
