"""Fast self-checks for the CLI `check` subcommand and the probe driver."""
from __future__ import annotations

import numpy as np

from . import config as cfgmod
from . import diagnostics as dg
from . import flowrecon as fr
from . import grid as gr
from . import integrate as it
from . import vonkarman as vk
from .aero import AeroConfig, HistoryBuffer, QuadratureSpec, escape_time, q_eval


def _bubble(g, ax=1, ay=1, amp=1.0):
    x, y = g.mesh()
    out = amp * np.sin(ax * np.pi * x / g.lx) ** 2 * np.sin(ay * np.pi * y / g.ly) ** 2
    return gr.clamp_ring(out)


def run_invariant_checks():
    """Quick battery of kernel invariants on small grids.

    Returns a list of (name, passed, detail) tuples.
    """
    results = []
    g = gr.GridSpec(1.0, 1.0, 17, 17)

    b = gr.biharmonic_matrix(g).toarray()
    asym = np.max(np.abs(b - b.T)) / np.max(np.abs(b))
    eig_min = float(np.linalg.eigvalsh(0.5 * (b + b.T)).min())
    results.append(("biharmonic symmetric positive definite",
                    asym < 1e-13 and eig_min > 0.0,
                    f"asym={asym:.2e} eig_min={eig_min:.4g}"))

    u = _bubble(g, 1, 2, 0.5) + _bubble(g, 2, 1, 0.3)
    w = gr.helmholtz_malpha_solve(u, 0.1, g)
    diff = gr.malpha_apply(w, 0.1, g)[1:-1, 1:-1] - u[1:-1, 1:-1]
    rel = np.linalg.norm(diff) / np.linalg.norm(u[1:-1, 1:-1])
    results.append(("Helmholtz (1 - a lap) solve residual", rel < 1e-12,
                    f"rel={rel:.2e}"))

    w2 = _bubble(g, 2, 2, 0.7)
    br = np.max(np.abs(vk.vk_bracket(u, w2, g) - vk.vk_bracket(w2, u, g)))
    results.append(("bracket symmetry [u,w] = [w,u]", br == 0.0, f"max diff={br:.2e}"))

    sol = vk.airy_solve(u, g)
    results.append(("Airy solve residual", sol.residual_norm <= 1e-10,
                    f"rel={sol.residual_norm:.2e}"))

    ts = escape_time(g, 0.0)
    results.append(("escape time, unit square, U=0",
                    abs(ts - np.sqrt(2.0)) < 1e-3, f"t*={ts:.6f}"))

    cfg = AeroConfig(0.0, ts, QuadratureSpec(16, 32))
    buf = HistoryBuffer.constant(u, 0.0, ts, g)
    ua, ub = _bubble(g, 1, 1, 0.4), _bubble(g, 2, 2, 0.3)
    qa = q_eval(HistoryBuffer.constant(ua, 0.0, ts, g), 0.0, cfg, g)
    qb = q_eval(HistoryBuffer.constant(ub, 0.0, ts, g), 0.0, cfg, g)
    qab = q_eval(HistoryBuffer.constant(ua + ub, 0.0, ts, g), 0.0, cfg, g)
    lin = np.max(np.abs(qab - qa - qb)) / max(np.max(np.abs(qab)), 1e-300)
    results.append(("delay potential linearity", lin < 1e-12, f"rel={lin:.2e}"))

    # causality of the reconstructed potential
    dt = 0.1
    hist = HistoryBuffer(dt, ts, g)
    for j in range(int(np.ceil(ts / dt)) + 3):
        t = j * dt
        hist.push(t, u * np.sin(1.3 * t))
    t_now = hist.newest_t
    pts = np.array([[0.5, 0.5, t_now + 0.1], [0.3, 0.7, t_now + 1.0]])
    fs = fr.reconstruct(hist, pts, t_now, cfg)
    quiet = (np.all(fs.phi == 0.0) and np.all(fs.phi_t == 0.0)
             and np.all(fs.grad == 0.0))
    results.append(("causality: phi = 0 for x3 > t", quiet, "exact"))

    # zero data, zero loads -> identically zero trajectory
    sim = it.SimConfig(dt=0.05, horizon=0.5, quad=QuadratureSpec(8, 16),
                       power_every=0)
    p = it.PhysParams(U=0.0, alpha=0.1, k=0.1)
    traj = it.simulate(sim, p, g.zeros(), g.zeros(), g)
    flat = gr.norm_l2(traj.final.u, g) == 0.0 and gr.norm_l2(traj.final.ut, g) == 0.0
    results.append(("zero data -> zero trajectory", flat, "exact"))
    return results


# ---------------------------------------------------------------------------
# probe driver for the CLI
# ---------------------------------------------------------------------------

def _run(rc, p, u0, u1, cadence):
    sim = it.SimConfig(dt=rc.dt, horizon=rc.horizon, quad=rc.quad,
                       cadence=cadence, power_every=0)
    return it.simulate(sim, p, u0, u1, rc.grid, collect_states=True)


def run_probe_from_config(rc) -> dg.ProbeReport:
    sec = dict(rc.probe)
    kind = sec.pop("kind", None)
    if kind not in ("lipschitz", "quasistability", "lyapunov"):
        raise cfgmod.ConfigError("probe.kind must be lipschitz, quasistability, or lyapunov")
    n_pairs = int(sec.pop("pairs", 2))
    n_hold = int(sec.pop("holdout", 1))
    eps = float(sec.pop("perturb", 1e-3))
    cadence = int(sec.pop("cadence", rc.cadence))
    if sec:
        raise cfgmod.ConfigError(f"unknown probe keys {sorted(sec)}")

    p = it.PhysParams(U=rc.U, alpha=rc.alpha, k=rc.k, loads=rc.loads)
    rng = np.random.default_rng(rc.seed + 1)
    g = rc.grid

    if kind == "lyapunov":
        runs = []
        for _ in range(2):
            du = eps * cfgmod.random_smooth_field(g, rng, 1.0)
            traj = _run(rc, p, rc.u0 + du, rc.u1, cadence)
            runs.append((traj.times, [r.v_lyap for r in traj.reports]))
        return dg.lyapunov_probe(runs[0][0], runs[0][1], holdout=runs[1])

    def make_pair():
        du = eps * cfgmod.random_smooth_field(g, rng, 1.0)
        ta = _run(rc, p, rc.u0, rc.u1, cadence)
        tb = _run(rc, p, rc.u0 + du, rc.u1, cadence)
        return ta, tb

    train = [make_pair() for _ in range(n_pairs)]
    hold = [make_pair() for _ in range(n_hold)]
    if kind == "lipschitz":
        return dg.lipschitz_probe(train, hold, rc.alpha, g)
    t_star = escape_time(g, rc.U)
    return dg.quasistability_probe(train, hold, rc.alpha, t_star, g)
