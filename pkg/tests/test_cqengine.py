import numpy as np
import pytest
from numpy.polynomial import Polynomial

from pcq import cqengine
from pcq.cqengine import (apply, compute_weights, solve_allatonce, solve_marching,
                          stabilized_first_weight)
from pcq.cqsymbol import AbscissaError, delta, matrix_function, sampling_radius
from pcq.dgref import ode_solve
from pcq.symbols import (TransferFunction, sphere_sV, sphere_V, sym_identity, sym_product,
                         sym_resolvent, sym_s, sym_s_inv)
from pcq.timebasis import (PiecewisePolynomial, TimeGrid, dg_matrices, interpolate,
                           polynomial_signal)

OVER = 16  # oversampled weights reach close to machine precision


def integral_weights(p, h, N):
    """Oracle: h (S^-1 J)^n S^-1 from the geometric series of (S - z J)^-1."""
    m = dg_matrices(p)
    Sinv = np.linalg.inv(m.stiffness)
    M = Sinv @ m.jump
    return np.array([h * np.linalg.matrix_power(M, n) @ Sinv for n in range(N + 1)])


def test_identity_symbol():
    W = compute_weights(sym_identity(), TimeGrid(0.3, 10, 3), oversample=OVER).weights
    assert np.allclose(W[0], np.eye(4), atol=1e-12)
    assert np.max(np.abs(W[1:])) <= 1e-12
    # the default radius amplifies transform roundoff by r**-N = 1e8
    W = compute_weights(sym_identity(), TimeGrid(0.3, 10, 3)).weights
    assert np.max(np.abs(W[1:])) <= 1e-7


@pytest.mark.parametrize("oversample, tol", [(1, 1e-7), (OVER, 1e-11)])
def test_derivative_weights(oversample, tol):
    grid = TimeGrid(0.25, 12, 4)
    m = dg_matrices(4)
    W = compute_weights(sym_s(), grid, oversample=oversample).weights
    scale = np.abs(m.stiffness).max() / grid.h
    assert np.max(np.abs(W[0] - m.stiffness / grid.h)) <= tol * scale
    assert np.max(np.abs(W[1] + m.jump / grid.h)) <= tol * scale
    assert np.max(np.abs(W[2:])) <= tol * scale


@pytest.mark.parametrize("p, h, N", [(1, 0.5, 4), (3, 0.2, 10), (6, 1.0, 15)])
def test_integral_weights_against_geometric_series(p, h, N):
    W = compute_weights(sym_s_inv(), TimeGrid(h, N, p), oversample=OVER).weights
    ref = integral_weights(p, h, N)
    assert np.max(np.abs(W - ref)) <= 1e-12 * max(1, np.abs(ref).max())


def test_fft_matches_direct_transform():
    for N in (15, 16):  # 16 and 17 samples
        grid = TimeGrid(0.25, N, 3)
        W = compute_weights(sphere_V(), grid)
        L = N + 1
        zs = W.r * np.exp(-2j * np.pi * np.arange(L) / L)
        F = np.array([matrix_function(sphere_V(), delta(3, z), grid.h) for z in zs])
        n = np.arange(N + 1)
        phase = np.exp(2j * np.pi * np.outer(n, np.arange(L)) / L)
        direct = np.einsum("nl,lij->nij", phase, F) / L * (W.r ** -n)[:, None, None]
        assert np.max(np.abs(W.weights - direct)) <= 1e-11 * np.abs(direct).max() * W.r ** -N


def test_threaded_weights_identical():
    grid = TimeGrid(0.25, 9, 4)
    a = compute_weights(sphere_sV(), grid).weights
    b = compute_weights(sphere_sV(), grid, jobs=3).weights
    assert np.array_equal(a, b)


@pytest.mark.parametrize("K", [sym_s(), sym_s_inv(), sphere_sV()])
@pytest.mark.parametrize("oversample, tol", [(1, 1e-8), (OVER, 1e-12)])
def test_weight_series_consistency(K, oversample, tol):
    grid = TimeGrid(0.25, 16, 5)
    W = compute_weights(K, grid, oversample=oversample)
    z = 0.5 * sampling_radius(grid.N) * np.exp(0.7j)
    ref = W.generating(z)
    assert np.max(np.abs(W.series(z) - ref)) <= tol * np.abs(ref).max()


def test_resolvent_application_matches_dg():
    grid = TimeGrid(0.25, 16, 2)
    g = lambda t: np.sin(3 * t) + t
    y = apply(sym_resolvent(-1), g, grid, oversample=OVER)
    ref = ode_solve(-1, g, grid)
    assert np.max(np.abs(y.coeffs - ref.coeffs)) <= 1e-10


def test_discrete_integral_of_one():
    for p in (1, 2, 5):
        grid = TimeGrid(0.5, 8, p)
        y = apply(sym_s_inv(), lambda t: np.ones_like(t), grid, oversample=OVER)
        assert np.max(np.abs(y.node_values() - grid.nodes[1:])) <= 1e-12


def test_discrete_derivative_of_square():
    grid = TimeGrid(0.5, 6, 3)
    y = apply(sym_s(), polynomial_signal(grid, Polynomial([0, 0, 1])), grid, oversample=OVER)
    ref = polynomial_signal(grid, Polynomial([0, 2]))
    assert np.max(np.abs(y.coeffs - ref.coeffs)) <= 1e-12


def test_integral_then_derivative_recovers_projection():
    grid = TimeGrid(0.25, 16, 6)
    g = lambda t: np.exp(-t) * np.sin(4 * t)
    ig = interpolate(g, grid)
    back = apply(sym_s(), apply(sym_s_inv(), g, grid, oversample=OVER), grid, oversample=OVER)
    assert np.max(np.abs(back.coeffs - ig.coeffs)) <= 1e-9


def test_composition_of_resolvents():
    grid = TimeGrid(0.2, 20, 5)
    g = lambda t: np.cos(2 * t)
    K1, K2 = sym_resolvent(-0.5 + 1j), sym_resolvent(-2.0)
    a = apply(K1, apply(K2, g, grid, oversample=OVER), grid, oversample=OVER)
    b = apply(sym_product(K1, K2), g, grid, oversample=OVER)
    assert np.max(np.abs(a.coeffs - b.coeffs)) <= 1e-9


def test_causality(rng):
    grid = TimeGrid(0.25, 12, 3)
    coeffs = np.zeros((12, 4), complex)
    coeffs[5:] = rng.normal(size=(7, 4))
    y = apply(sphere_sV(), PiecewisePolynomial(grid, coeffs), grid)
    assert np.max(np.abs(y.coeffs[:5])) <= 1e-12


def test_weights_must_match_grid():
    W = compute_weights(sym_s(), TimeGrid(0.25, 8, 2))
    with pytest.raises(ValueError):
        apply(sym_s(), lambda t: t, TimeGrid(0.25, 8, 3), weights=W)
    with pytest.raises(ValueError):
        apply(sym_s(), interpolate(np.sin, TimeGrid(0.5, 8, 2)), TimeGrid(0.25, 8, 2))


def test_abscissa_check():
    K = TransferFunction(lambda s: 1 / (s - 3), sigma=3.0)
    with pytest.raises(AbscissaError, match="need h <"):
        compute_weights(K, TimeGrid(1.0, 8, 1))
    compute_weights(K, TimeGrid(0.01, 8, 1))


def test_weights_csv():
    W = compute_weights(sym_s(), TimeGrid(0.5, 2, 1))
    lines = W.to_csv().splitlines()
    assert lines[0] == "n,row,col,re,im"
    assert len(lines) == 1 + 3 * 4


def test_marching_identity_and_derivative():
    grid = TimeGrid(0.25, 10, 4)
    rhs = interpolate(np.cos, grid)
    lam = solve_marching(sym_identity(), rhs, grid, oversample=OVER)
    assert np.allclose(lam.coeffs, rhs.coeffs, atol=1e-12)
    g = lambda t: t * np.sin(t)
    d = apply(sym_s(), g, grid, oversample=OVER)
    lam = solve_marching(sym_s(), d, grid, oversample=OVER)
    oracle = apply(sym_s_inv(), d, grid, oversample=OVER)
    assert np.max(np.abs(lam.coeffs - oracle.coeffs)) <= 1e-8
    assert np.max(np.abs(lam.coeffs - interpolate(g, grid).coeffs)) <= 1e-8


def test_stabilized_first_weight():
    grid = TimeGrid(0.25, 8, 6)
    W = compute_weights(sphere_sV(), grid)
    eps = np.finfo(float).eps
    assert np.allclose(stabilized_first_weight(W, 1), W.generating(np.sqrt(eps)), atol=1e-15)
    exact = W.generating(0.0)
    for q in (2, 4, 6):
        assert np.max(np.abs(stabilized_first_weight(W, q) - exact)) <= 1e-12
    with pytest.raises(ValueError):
        stabilized_first_weight(W, -1)


def test_marching_reports_residual():
    grid = TimeGrid(0.25, 16, 4)
    rhs = interpolate(lambda t: np.sin(5 * t) * t, grid)
    lam, info = solve_marching(sphere_sV(), rhs, grid, full_output=True)
    assert info["residual"] <= 1e-10 and info["stab_points"] == 4
    assert "warning" not in info


def test_marching_singular_diagonal():
    K = TransferFunction(lambda s: 0 * s)
    with pytest.raises(np.linalg.LinAlgError, match="stab_points"):
        solve_marching(K, interpolate(np.sin, TimeGrid(0.5, 4, 1)), TimeGrid(0.5, 4, 1))


def test_allatonce_identity_and_round_trip():
    grid = TimeGrid(0.25, 16, 5)
    rhs = interpolate(lambda t: np.exp(-t) * np.cos(3 * t), grid)
    lam = solve_allatonce(sym_identity(), rhs, grid, oversample=OVER)
    assert np.allclose(lam.coeffs, rhs.coeffs, atol=1e-12)
    K = sym_resolvent(-1)
    lam = solve_allatonce(K, rhs, grid, oversample=OVER)
    back = apply(K, lam, grid, oversample=OVER)
    assert np.max(np.abs(back.coeffs - rhs.coeffs)) <= 1e-9


def test_marching_and_allatonce_agree():
    grid = TimeGrid(0.25, 16, 8)
    rhs = interpolate(lambda t: np.sin(6 * t) * np.exp(-t), grid)
    a = solve_marching(sphere_sV(), rhs, grid)
    b = solve_allatonce(sphere_sV(), rhs, grid)
    assert np.max(np.abs(a.coeffs - b.coeffs)) <= 1e-8 * np.abs(b.coeffs).max()


def test_weights_from_generic_symbol_default_radius():
    W = cqengine.weights_from_symbol(sym_s(), lambda z: delta(0, z), 1, 0.5, 6)
    assert np.isclose(W.r, 10 ** (-8 / 6))
    assert np.allclose(W.weights[:2, 0, 0], [2, -2], atol=1e-7)
