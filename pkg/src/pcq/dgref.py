"""Reference DG time stepping, the 3-stage RadauIIa baseline and a stability probe.

`ode_solve` integrates ``y' = A y + g`` with the DG method directly, step
by step. Its output is what the convolution quadrature of the resolvent
``(s - zeta)^-1`` must reproduce, which makes it the main oracle for the
weight machinery. The RadauIIa convolution quadrature reuses the generic
weight and solver code of `cqengine` with the Runge-Kutta symbol.
"""
import csv
import io
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.linalg

from . import cqengine
from .cqsymbol import DeltaMatrix
from .timebasis import (PiecewisePolynomial, TimeGrid, as_signal, basis_eval, dg_matrices,
                        gauss_points, interpolate, l2_project)

SKEW_TOL = 1e-12
# eigenvector condition above which the system solve switches to Sylvester
DIAG_COND_LIMIT = 1e4


def _forcing(g, grid, projection):
    if isinstance(g, PiecewisePolynomial):
        return as_signal(g, grid)
    if projection == "interp":
        return interpolate(g, grid)
    if projection == "l2":
        return l2_project(g, grid)
    raise ValueError(f"unknown projection {projection!r}")


def ode_solve(A, g, grid, projection="interp"):
    """DG solution of ``y' = A y + g``, ``y(0) = 0``.

    Each step solves ``S Y^n - h Y^n A^t = T(0)^t T(1) Y^{n-1} + h G^n`` for
    the coefficient block ``Y^n``.

    Parameters
    ----------
    A : complex or (m, m) array_like
        Scalar ``zeta`` or system matrix.
    g : callable or PiecewisePolynomial
        Forcing; functions are projected with ``I_p`` (``'interp'``) or the
        L2 projection (``'l2'``).
    grid : TimeGrid

    Returns
    -------
    PiecewisePolynomial
        Scalar valued for scalar ``A``, otherwise with value shape ``(m,)``.
    """
    mats = dg_matrices(grid.p)
    G = _forcing(g, grid, projection).coeffs
    S, J, h = mats.stiffness, mats.jump, grid.h
    A = np.asarray(A, dtype=complex)
    Y = np.zeros_like(G)
    if A.ndim == 0:
        step = S - h * A * np.eye(grid.p + 1)
        if np.linalg.cond(step) > 1e14:
            raise np.linalg.LinAlgError(f"singular DG step matrix for zeta*h = {complex(A) * h}")
        lu = scipy.linalg.lu_factor(step)
        prev = np.zeros_like(G[0])
        for n in range(grid.N):
            Y[n] = scipy.linalg.lu_solve(lu, J @ prev + h * G[n])
            prev = Y[n]
        return PiecewisePolynomial(grid, Y)
    if G.ndim != 3 or A.shape != (G.shape[2], G.shape[2]):
        raise ValueError(f"matrix of shape {A.shape} does not fit forcing values {G.shape[2:]}")
    # Y A^t = (Y V^-t) D V^t with A = V D V^-1 decouples the columns
    d, V = np.linalg.eig(A)
    if np.linalg.cond(V) < DIAG_COND_LIMIT:
        Vt_inv = np.linalg.inv(V.T)
        lus = [scipy.linalg.lu_factor(S - h * dk * np.eye(grid.p + 1)) for dk in d]
        prev = np.zeros_like(G[0])
        for n in range(grid.N):
            rhs = (J @ prev + h * G[n]) @ Vt_inv
            Z = np.column_stack([scipy.linalg.lu_solve(lu, rhs[:, k]) for k, lu in enumerate(lus)])
            Y[n] = Z @ V.T
            prev = Y[n]
    else:
        # all operands complex: mixed real/complex input gives wrong results in scipy
        Sc, Bc = S.astype(complex), -h * A.T
        prev = np.zeros_like(G[0])
        for n in range(grid.N):
            Y[n] = scipy.linalg.solve_sylvester(Sc, Bc, J @ prev + h * G[n])
            prev = Y[n]
    return PiecewisePolynomial(grid, Y)


# ---------------------------------------------------------------- RadauIIa

@dataclass(frozen=True)
class RadauTableau:
    """Butcher tableau of the 3-stage RadauIIa method (collocation at Radau points)."""

    c: np.ndarray
    A: np.ndarray
    b: np.ndarray

    @property
    def stages(self):
        return len(self.c)


@lru_cache(maxsize=None)
def radau_tableau():
    """Build the tableau from the collocation conditions ``sum_j a_ij c_j^(k-1) = c_i^k / k``."""
    s6 = math.sqrt(6.0)
    c = np.array([(4 - s6) / 10, (4 + s6) / 10, 1.0])
    k = np.arange(1, 4)
    V = c[None, :] ** (k[:, None] - 1)  # V[k, j] = c_j^(k-1)
    rhs = c[:, None] ** k[None, :] / k[None, :]  # rhs[i, k] = c_i^k / k
    A = np.linalg.solve(V, rhs.T).T
    for arr in (c, A):
        arr.setflags(write=False)
    return RadauTableau(c=c, A=A, b=A[-1].copy())


def radau_symbol(z):
    """``Delta(z) = (A + z / (1 - z) 1 b^t)^-1`` as a `DeltaMatrix`."""
    tab = radau_tableau()
    z = complex(z)
    mat = np.linalg.inv(tab.A + z / (1 - z) * np.outer(np.ones(3), tab.b))
    return DeltaMatrix.from_matrix(mat, z, 2)


def radau_stage_times(grid):
    """Stage times ``t_n + c_i h``, shape ``(N, 3)``."""
    c = radau_tableau().c
    return grid.h * (np.arange(grid.N)[:, None] + c[None, :])


def _stage_values(g, grid):
    if isinstance(g, np.ndarray):
        return np.asarray(g, dtype=complex)
    t = radau_stage_times(grid)
    try:
        vals = np.asarray(g(t), dtype=complex)
    except (TypeError, ValueError):
        vals = None
    if vals is None or vals.shape[:2] != t.shape:
        vals = np.array([[g(ti) for ti in row] for row in t], dtype=complex)
    return vals


def radau_cq_weights(K, grid, r=None, oversample=1):
    """RadauIIa convolution weights ``sum_n W_n z^n = K(Delta(z) / h)``."""
    return cqengine.weights_from_symbol(K, radau_symbol, 3, grid.h, grid.N, r=r, oversample=oversample)


def radau_cq_apply(K, g, grid, weights=None, **weight_opts):
    """Stage values of the RadauIIa CQ approximation of ``K(d_t) g``, shape ``(N, 3)``."""
    if weights is None:
        weights = radau_cq_weights(K, grid, **weight_opts)
    return cqengine.convolve(weights.weights, _stage_values(g, grid))


def radau_cq_solve(K, rhs, grid, solver="allatonce", stab_points=cqengine.DEFAULT_STAB_POINTS,
                   r=None, oversample=1):
    """Solve ``K(d_t) lam = rhs`` in RadauIIa stage values."""
    b = _stage_values(rhs, grid)
    if solver == "allatonce":
        return cqengine.allatonce(K, radau_symbol, grid.h, b, r=r, oversample=oversample)
    if solver == "marching":
        weights = radau_cq_weights(K, grid, r=r, oversample=oversample)
        W0 = cqengine.stabilized_first_weight(weights, stab_points)
        return cqengine.march(weights.weights, W0, b)
    raise ValueError(f"unknown solver {solver!r}")


def radau_vandermonde():
    """``V[i, j] = phi_j(c_i)``: Legendre coefficients to values at the Radau nodes."""
    return basis_eval(2, radau_tableau().c)


def radau_interpolate(g, grid):
    """Degree 2 interpolant of ``g`` at the mapped Radau nodes, as a DG signal."""
    if grid.p != 2:
        raise ValueError("Radau interpolation needs p = 2")
    vals = _stage_values(g, grid)
    coeffs = np.linalg.solve(radau_vandermonde(), vals.T).T
    return PiecewisePolynomial(grid, coeffs)


def radau_equivalence_check(g, grid, K, **weight_opts):
    """Max deviation between p = 2 DG-CQ and RadauIIa CQ at the Radau nodes.

    The DG convolution acts on the Radau interpolant of ``g``; both results
    are compared at the stage times.
    """
    if grid.p != 2:
        raise ValueError("the equivalence holds for p = 2 only")
    dg = cqengine.apply(K, radau_interpolate(g, grid), grid, **weight_opts)
    at_nodes = dg.coeffs @ radau_vandermonde().T
    rk = radau_cq_apply(K, g, grid, **weight_opts)
    return float(np.max(np.abs(at_nodes - rk)))


# ---------------------------------------------------------------- stability

@dataclass(frozen=True)
class StabilityResult:
    p: int
    h: float
    T: float
    ratio_nodal: float
    ratio_L2: float
    ratio_pointwise: float


def _check_skew(A):
    A = np.asarray(A, dtype=complex)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("stability probe needs a square matrix")
    dev = np.linalg.norm(A + A.conj().T, 2)
    if dev > SKEW_TOL * max(1.0, np.linalg.norm(A, 2)):
        raise ValueError(f"matrix is not skew-Hermitian (|A + A^H| = {dev:.2e})")
    return A


def _forcing_energy(f, t_end, h):
    """``int_0^t_end |f|^2`` with 32-point Gauss rules on steps of length ``h``."""
    n = max(1, int(math.ceil(t_end / h - 1e-12)))
    edges = np.linspace(0.0, t_end, n + 1)
    x, w = gauss_points(32)
    t = edges[:-1, None] + np.diff(edges)[:, None] * x[None, :]
    vals = np.array([np.asarray(f(ti), dtype=complex) for ti in t.ravel()])
    sq = np.sum(np.abs(vals.reshape(t.shape + (-1,))) ** 2, axis=-1)
    return float(np.sum(sq * w[None, :] * np.diff(edges)[:, None]))


def _ratio(num, den):
    if num == 0:
        return 0.0
    return num / den if den > 0 else math.inf


def stability_probe(A, f, grid, samples_per_step=None):
    """Measured constants of the discrete stability estimates for ``u' = A u + f``.

    With ``t* = max(T, 1)`` and ``F = int_0^t* |f|^2`` the ratios are
    ``max_n |u(t_n^-)|^2 / (t* F)``, ``int_0^T |u|^2 / (t*^2 F)`` and
    ``sup_t |u(t)|^2 / (t* F)``. The forcing enters through its L2
    projection, which is the DG right-hand side ``(f, v)``.
    """
    A = _check_skew(A)
    u = ode_solve(A, f, grid, projection="l2")
    t_star = max(grid.h * math.ceil(grid.T / grid.h - 1e-12), 1.0)
    F = _forcing_energy(f, t_star, grid.h)
    nodal = float(np.max(np.sum(np.abs(u.node_values()) ** 2, axis=-1)))
    l2 = u.l2_norm_squared()
    m = samples_per_step or 4 * (grid.p + 1) + 8
    tau = np.linspace(0.0, 1.0, m)
    vals = np.einsum("qj,nj...->nq...", basis_eval(grid.p, tau), u.coeffs)
    sup = float(np.max(np.sum(np.abs(vals) ** 2, axis=-1)))
    return StabilityResult(grid.p, grid.h, grid.T, _ratio(nodal, t_star * F),
                           _ratio(l2, t_star ** 2 * F), _ratio(sup, t_star * F))


def stability_csv(results):
    """CSV text with header ``p,h,T,ratio_nodal,ratio_L2,ratio_pointwise``."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["p", "h", "T", "ratio_nodal", "ratio_L2", "ratio_pointwise"])
    for r in results:
        values = (r.h, r.T, r.ratio_nodal, r.ratio_L2, r.ratio_pointwise)
        writer.writerow([r.p] + [repr(float(v)) for v in values])
    return buf.getvalue()


def stability_sweep(A, f, T, hs, ps):
    """`stability_probe` over all ``(h, p)`` pairs; ``T / h`` is rounded up to whole steps."""
    out = []
    for h in hs:
        N = int(math.ceil(T / h - 1e-12))
        for p in ps:
            out.append(stability_probe(A, f, TimeGrid(h, N, p)))
    return out
