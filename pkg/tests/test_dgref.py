import math

import numpy as np
import pytest
from numpy.polynomial import Legendre
from scipy.integrate import solve_ivp

from pcq import cqengine, dgref
from pcq.dgref import (ode_solve, radau_cq_apply, radau_cq_solve, radau_equivalence_check,
                       radau_stage_times, radau_symbol, radau_tableau, stability_csv,
                       stability_probe, stability_sweep)
from pcq.cqsymbol import delta
from pcq.symbols import sphere_sV, sphere_V, sym_identity, sym_resolvent, sym_s_inv
from pcq.timebasis import PiecewisePolynomial, TimeGrid, basis_eval, interpolate

ROT = np.array([[0.0, 1.0], [-1.0, 0.0]])


def sin_forcing(t):
    return np.array([np.sin(t), 0.0])


def test_trivial_solutions():
    grid = TimeGrid(0.5, 6, 2)
    y = ode_solve(0, lambda t: np.ones_like(t), grid)
    assert np.max(np.abs(y.node_values() - grid.nodes[1:])) <= 1e-13
    assert np.max(np.abs(ode_solve(0, lambda t: 0 * t, grid).coeffs)) == 0


def test_damped_sine_against_closed_form():
    grid = TimeGrid(0.5, 8, 6)
    y = ode_solve(-1, np.sin, grid)
    t = grid.nodes[1:]
    exact = (np.sin(t) - np.cos(t) + np.exp(-t)) / 2
    assert np.max(np.abs(y.node_values() - exact)) < 1e-8


def test_system_matches_decoupled_scalars():
    grid = TimeGrid(0.25, 8, 4)
    A = np.diag([-1.0, -2 + 1j])
    f = lambda t: np.stack([np.cos(t), t], axis=-1)
    y = ode_solve(A, f, grid)
    y0 = ode_solve(-1.0, np.cos, grid)
    y1 = ode_solve(-2 + 1j, lambda t: t, grid)
    assert np.allclose(y.coeffs[..., 0], y0.coeffs, atol=1e-13)
    assert np.allclose(y.coeffs[..., 1], y1.coeffs, atol=1e-13)


@pytest.mark.parametrize("A", [ROT, np.array([[-1.0, 1.0], [0.0, -1.0]])])
def test_system_against_ivp_solver(A):
    # the second matrix is a Jordan block, which takes the Sylvester path
    grid = TimeGrid(0.5, 8, 10)
    f = lambda t: np.array([np.sin(t), np.cos(2 * t)])
    y = ode_solve(A, f, grid)
    sol = solve_ivp(lambda t, u: A @ u + f(t), (0, grid.T), [0, 0], t_eval=grid.nodes[1:],
                    rtol=1e-12, atol=1e-14, method="DOP853")
    assert np.max(np.abs(y.node_values() - sol.y.T)) <= 1e-9


def test_system_shape_check():
    with pytest.raises(ValueError):
        ode_solve(np.eye(3), lambda t: np.array([t, t]), TimeGrid(0.5, 2, 1))


def antiderivative(psi):
    """Oracle: exact antiderivative of a piecewise polynomial via numpy Legendre series."""
    grid = psi.grid
    scale = np.sqrt(2 * np.arange(grid.p + 1) + 1)
    polys = [Legendre(psi.coeffs[n].real * scale, domain=[0, 1]).integ(lbnd=0) for n in range(grid.N)]
    offsets = np.concatenate([[0], np.cumsum([grid.h * P(1) for P in polys])])

    def F(t):
        t = np.asarray(t, float)
        flat = t.ravel()
        n = np.clip(np.ceil(flat / grid.h - 1e-12).astype(int) - 1, 0, grid.N - 1)
        vals = [offsets[k] + grid.h * polys[k](ti / grid.h - k) for k, ti in zip(n, flat)]
        return np.array(vals).reshape(t.shape)

    return F


def test_discrete_integral_identity(rng):
    grid = TimeGrid(0.4, 7, 5)
    psi = PiecewisePolynomial(grid, rng.normal(size=(7, 6)))
    y = ode_solve(0, psi, grid)
    ref = interpolate(antiderivative(psi), grid)
    assert np.max(np.abs(y.coeffs - ref.coeffs)) <= 1e-12


def test_jump_decay_in_degree():
    grid = TimeGrid(0.5, 8, 1)
    jumps = []
    for p in range(1, 11):
        y = ode_solve(-1, lambda t: np.cos(3 * t), grid.with_degree(p))
        jumps.append(np.max(np.abs(y.jumps())))
    jumps = np.array(jumps)
    assert np.all(np.diff(jumps) <= 1e-13)


def test_radau_tableau():
    tab = radau_tableau()
    s6 = math.sqrt(6)
    # classical closed form of the RadauIIa(5) coefficients
    ref = np.array([
        [(88 - 7 * s6) / 360, (296 - 169 * s6) / 1800, (-2 + 3 * s6) / 225],
        [(296 + 169 * s6) / 1800, (88 + 7 * s6) / 360, (-2 - 3 * s6) / 225],
        [(16 - s6) / 36, (16 + s6) / 36, 1 / 9],
    ])
    assert np.allclose(tab.A, ref, atol=1e-15)
    assert np.array_equal(tab.b, tab.A[-1]) and tab.c[-1] == 1.0 and tab.stages == 3
    assert abs(tab.b.sum() - 1) <= 1e-14 and abs(tab.b @ tab.c - 0.5) <= 1e-14


def test_radau_symbol_is_similar_to_dg():
    V = basis_eval(2, radau_tableau().c)
    for z in (0, 0.4, -0.3 + 0.5j):
        D = radau_symbol(z).matrix
        assert np.max(np.abs(D - V @ delta(2, z).matrix @ np.linalg.inv(V))) <= 1e-12


def test_radau_trivial_cases():
    grid = TimeGrid(0.25, 8, 2)
    W = dgref.radau_cq_weights(sym_identity(), grid, oversample=16).weights
    assert np.allclose(W[0], np.eye(3), atol=1e-12) and np.max(np.abs(W[1:])) <= 1e-12
    y = radau_cq_apply(sym_s_inv(), lambda t: np.ones_like(t), grid, oversample=16)
    assert np.max(np.abs(y - radau_stage_times(grid))) <= 1e-13


def test_radau_order():
    errs = []
    hs = [0.5, 0.25, 0.125]
    for h in hs:
        grid = TimeGrid(h, int(round(4 / h)), 2)
        y = radau_cq_apply(sym_resolvent(-1), np.sin, grid, oversample=16)[:, -1]
        t = h * np.arange(1, grid.N + 1)
        errs.append(np.max(np.abs(y - (np.sin(t) - np.cos(t) + np.exp(-t)) / 2)))
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert rates.min() >= 4.7


def test_radau_solve_round_trip():
    grid = TimeGrid(0.25, 16, 2)
    rhs = np.sin(radau_stage_times(grid)) * radau_stage_times(grid)
    for solver in ("allatonce", "marching"):
        lam = radau_cq_solve(sphere_sV(), rhs, grid, solver=solver, oversample=4)
        back = radau_cq_apply(sphere_sV(), lam, grid, oversample=4)
        assert np.max(np.abs(back - rhs)) <= 1e-9
    with pytest.raises(ValueError):
        radau_cq_solve(sphere_sV(), rhs, grid, solver="newton")


def test_radau_equivalence():
    grid = TimeGrid(0.25, 16, 2)
    assert radau_equivalence_check(np.sin, grid, sym_identity(), oversample=16) <= 1e-13
    g = lambda t: np.sin(2 * t)
    assert radau_equivalence_check(g, grid, sym_resolvent(-1), oversample=16) <= 1e-9
    assert radau_equivalence_check(g, grid, sphere_sV()) <= 1e-8
    with pytest.raises(ValueError):
        radau_equivalence_check(np.sin, TimeGrid(0.25, 4, 3), sphere_V())


def test_stability_probe_zero_forcing():
    r = stability_probe(ROT, lambda t: np.array([0.0, 0.0]), TimeGrid(0.5, 16, 3))
    assert (r.ratio_nodal, r.ratio_L2, r.ratio_pointwise) == (0.0, 0.0, 0.0)


def test_stability_probe_rejects_dissipative_matrix():
    with pytest.raises(ValueError, match="skew"):
        stability_probe(-np.eye(2), sin_forcing, TimeGrid(0.5, 4, 1))


def test_stability_ratios_against_ivp():
    T = 8.0
    grid = TimeGrid(0.25, 32, 16)
    r = stability_probe(ROT, sin_forcing, grid)
    t = np.linspace(0, T, 4001)
    sol = solve_ivp(lambda t, u: ROT @ u + sin_forcing(t), (0, T), [0, 0], t_eval=t,
                    rtol=1e-12, atol=1e-14, method="DOP853")
    F = T / 2 - np.sin(2 * T) / 4
    sup = np.max(np.sum(sol.y ** 2, axis=0)) / (T * F)
    assert abs(r.ratio_pointwise - sup) <= 1e-6
    nodal = np.max(np.sum(sol.y[:, ::125] ** 2, axis=0)) / (T * F)
    assert abs(r.ratio_nodal - nodal) <= 1e-6


def test_stability_sweep_and_csv():
    res = stability_sweep(ROT, sin_forcing, 2.0, [0.5, 0.25], [1, 2])
    assert len(res) == 4
    text = stability_csv(res)
    assert text.splitlines()[0] == "p,h,T,ratio_nodal,ratio_L2,ratio_pointwise"
    assert len(text.splitlines()) == 5
