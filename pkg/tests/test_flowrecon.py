"""Flow reconstruction: causality, wall trace, box sampling."""
import numpy as np
import pytest

from panelflow import grid as gr
from panelflow import flowrecon as fr
from panelflow.aero import AeroConfig, HistoryBuffer, QuadratureSpec, escape_time
from conftest import bubble


def oscillating_history(g, t_star, dt_hist, t_end=1.0):
    buf = HistoryBuffer(dt_hist, t_star, g)
    b1 = bubble(g, 1, 1)
    b2 = bubble(g, 2, 1)
    n_back = int(np.ceil(t_star / dt_hist)) + 4
    for j in range(n_back, -1, -1):
        t = t_end - j * dt_hist
        buf.push(t, 0.1 * np.cos(1.3 * t) * b1 + 0.05 * np.sin(2.1 * t + 0.4) * b2)
    return buf, t_end


def test_causality_exact(g17):
    cfg = AeroConfig(0.4, escape_time(g17, 0.4), QuadratureSpec(16, 32))
    buf, t_end = oscillating_history(g17, cfg.t_star, 0.05)
    pts = np.array([[0.5, 0.5, t_end + 0.1],
                    [0.3, 0.7, t_end + 1.0],
                    [0.5, 0.5, cfg.t_star + 0.05]])
    fs = fr.reconstruct(buf, pts, t_end, cfg)
    assert np.all(fs.phi == 0.0)
    assert np.all(fs.phi_t == 0.0)
    assert np.all(fs.grad == 0.0)


def test_reconstruct_decays_with_height(g17):
    cfg = AeroConfig(0.4, escape_time(g17, 0.4), QuadratureSpec(16, 48))
    buf, t_end = oscillating_history(g17, cfg.t_star, 0.05)
    heights = [0.05, 0.5, 0.95 * cfg.t_star]
    pts = np.array([[0.5, 0.5, z] for z in heights])
    fs = fr.reconstruct(buf, pts, t_end, cfg)
    mags = np.abs(fs.phi)
    assert mags[0] > mags[-1]


def test_trace_identity_moderate_resolution():
    """Wall trace of the reconstruction matches the downwash + delay
    forcing; the residual shrinks under joint refinement."""
    rels = []
    for n, nth, ns, dth in ((17, 16, 64, 0.04), (33, 32, 128, 0.02)):
        g = gr.GridSpec(1.0, 1.0, n, n)
        cfg = AeroConfig(0.5, escape_time(g, 0.5), QuadratureSpec(nth, ns))
        buf, t_end = oscillating_history(g, cfg.t_star, dth)
        _, _, rel = fr.trace_material_derivative(buf, t_end, cfg)
        rels.append(rel)
    assert rels[1] < rels[0]
    assert rels[1] <= 5e-2


def test_reconstruct_box_shapes(g17):
    cfg = AeroConfig(0.3, escape_time(g17, 0.3), QuadratureSpec(16, 32))
    buf, t_end = oscillating_history(g17, cfg.t_star, 0.05)
    fs, axes = fr.reconstruct_box(buf, t_end, cfg, (0.2, 0.8, 0.2, 0.8, 0.0, 0.4),
                                  (3, 4, 5))
    assert fs.points.shape == (3 * 4 * 5, 3)
    assert fs.phi.shape == (60,)
    assert fs.grad.shape == (60, 3)
    xs, ys, zs = axes
    assert len(xs) == 3 and len(ys) == 4 and len(zs) == 5


def test_flow_energy_box_nonnegative(g17):
    cfg = AeroConfig(0.3, escape_time(g17, 0.3), QuadratureSpec(16, 32))
    buf, t_end = oscillating_history(g17, cfg.t_star, 0.05)
    fs, axes = fr.reconstruct_box(buf, t_end, cfg, (0.1, 0.9, 0.1, 0.9, 0.0, 0.5),
                                  (5, 5, 4))
    e_fl, e_int = fr.flow_energy_box(fs, axes, cfg, u=buf.snaps[-1].u, g=g17)
    assert e_fl >= 0.0
    assert e_int is not None
