"""Geometric nonlinearity: bracket, stress solve, force and energy consistency."""
import numpy as np
import pytest

from panelflow import grid as gr
from panelflow import vonkarman as vk
from conftest import bubble, random_clamped


def test_bracket_symmetry_exact(g17, rng):
    u = random_clamped(g17, rng)
    w = random_clamped(g17, rng)
    assert np.max(np.abs(vk.vk_bracket(u, w, g17) - vk.vk_bracket(w, u, g17))) == 0.0


def test_bracket_bilinear(g17, rng):
    u = random_clamped(g17, rng)
    w = random_clamped(g17, rng)
    z = random_clamped(g17, rng)
    left = vk.vk_bracket(u, 2.0 * w + z, g17)
    right = 2.0 * vk.vk_bracket(u, w, g17) + vk.vk_bracket(u, z, g17)
    assert np.allclose(left, right, rtol=1e-12, atol=1e-12)


def test_airy_solve_residual_and_sign(g33, rng):
    u = random_clamped(g33, rng)
    sol = vk.airy_solve(u, g33)
    assert sol.residual_norm <= 1e-10
    res = gr.biharmonic_clamped(sol.v, g33) + vk.vk_bracket(u, u, g33)
    res[0, :] = res[-1, :] = 0.0
    res[:, 0] = res[:, -1] = 0.0
    assert gr.norm_l2(res, g33) <= 1e-8 * max(gr.norm_l2(vk.vk_bracket(u, u, g33), g33), 1.0)


def test_airy_requires_clamped(g17):
    with pytest.raises(gr.GridError):
        vk.airy_solve(np.ones((17, 17)), g17)


def test_radial_prestress_bracket_is_scaled_laplacian(g17, rng):
    """[h, F0] = -2 beta lap h for the quadratic radial prestress."""
    beta = 3.0
    f0 = vk.radial_prestress(beta, g17)
    h = random_clamped(g17, rng)
    lhs = vk.vk_bracket(h, f0, g17)
    rhs = -2.0 * beta * gr.laplacian(h, g17)
    inner = (slice(1, -1), slice(1, -1))
    assert np.allclose(lhs[inner], rhs[inner], rtol=1e-10, atol=1e-8)


def test_fv_is_gradient_of_potential():
    """<fv(u), h> approaches the directional derivative of the nonlinear
    potential at second order in h (the defect is the boundary-ring part of
    the trilinear symmetry error)."""
    rels = []
    for n in (17, 33):
        g = gr.GridSpec(1.0, 1.0, n, n)
        loads = vk.LoadSet(p0=g.zeros(), F0=vk.radial_prestress(1.0, g))
        u = 0.5 * bubble(g, 1, 1)
        h = bubble(g, 2, 1)

        def nonlinear_part(w):
            return vk.potential_energy(w, loads, g)

        eps = 1e-5
        fd = (nonlinear_part(u + eps * h) - nonlinear_part(u - eps * h)) / (2.0 * eps)
        an = gr.inner_l2(vk.fv(u, loads, g), h, g)
        rels.append(abs(fd - an) / max(abs(an), 1e-12))
    assert rels[1] < rels[0] / 3.0
    assert rels[1] < 0.05


def test_fv_jacobian_matches_finite_difference(g17, rng):
    loads = vk.LoadSet(p0=g17.zeros(), F0=vk.radial_prestress(2.0, g17))
    u = random_clamped(g17, rng)
    h = random_clamped(g17, rng)
    eps = 1e-5
    fd = (vk.fv(u + eps * h, loads, g17) - vk.fv(u - eps * h, loads, g17)) / (2.0 * eps)
    an = vk.fv_jacobian_apply(u, h, loads, g17)
    assert gr.norm_l2(fd - an, g17) <= 1e-6 * max(gr.norm_l2(an, g17), 1.0)


def test_fv_odd_in_u_without_loads(g17, rng):
    loads = vk.zero_loads(g17)
    u = random_clamped(g17, rng)
    assert np.array_equal(vk.fv(-u, loads, g17), -vk.fv(u, loads, g17))


def test_pi_star_nonnegative(g17, rng):
    u = random_clamped(g17, rng)
    assert vk.pi_star(u, g17) >= 0.0
    assert vk.pi_star(g17.zeros(), g17) == 0.0
