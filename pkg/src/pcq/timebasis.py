"""Shifted Legendre basis on the reference step and piecewise polynomial signals.

Every time step ``(t_n, t_n + h)`` is mapped affinely onto ``(0, 1)``. On the
reference element we use the normalized shifted Legendre polynomials

    phi_j(tau) = sqrt(2j + 1) * L_j(2 tau - 1),

which are orthonormal in L2(0, 1), so the DG mass matrix is the identity.
A signal in the discontinuous space of degree ``p`` is stored as one
coefficient vector per step (`PiecewisePolynomial`).
"""
import csv
import io
import logging
import math
from dataclasses import dataclass

import numpy as np

LOGGER = logging.getLogger(__name__)

QUAD_TOL = 1e-13
QUAD_MAX_POINTS = 2048


@dataclass(frozen=True)
class TimeGrid:
    """Uniform time grid ``t_j = j h``, ``j = 0..N``, with degree ``p`` per step."""

    h: float
    N: int
    p: int

    def __post_init__(self):
        if not (self.h > 0 and math.isfinite(self.h)):
            raise ValueError(f"timestep must be positive, got h={self.h}")
        if int(self.N) != self.N or self.N < 1:
            raise ValueError(f"number of steps must be a positive integer, got N={self.N}")
        if int(self.p) != self.p or self.p < 0:
            raise ValueError(f"degree must be a non-negative integer, got p={self.p}")
        object.__setattr__(self, "N", int(self.N))
        object.__setattr__(self, "p", int(self.p))
        object.__setattr__(self, "h", float(self.h))

    @classmethod
    def from_final_time(cls, T, N, p):
        return cls(h=T / N, N=N, p=p)

    @property
    def T(self):
        return self.N * self.h

    @property
    def nodes(self):
        return self.h * np.arange(self.N + 1)

    def with_degree(self, p):
        return TimeGrid(self.h, self.N, p)


@dataclass(frozen=True)
class DgMatrices:
    """Mass, stiffness and trace vectors of the DG step on ``(0, 1)``."""

    mass: np.ndarray
    stiffness: np.ndarray
    trace0: np.ndarray
    trace1: np.ndarray

    @property
    def jump(self):
        """Rank-one coupling ``T(0)^t T(1)`` to the previous step."""
        return np.outer(self.trace0, self.trace1)


def _as_tau(tau):
    tau = np.asarray(tau, dtype=float)
    if np.any(tau < 0) or np.any(tau > 1) or not np.all(np.isfinite(tau)):
        raise ValueError("reference coordinate tau must lie in [0, 1]")
    return tau


def basis_eval(p, tau):
    """Values ``phi_0(tau) .. phi_p(tau)`` of the normalized shifted Legendre basis.

    Parameters
    ----------
    p : int
        Polynomial degree.
    tau : float or array_like
        Points in ``[0, 1]``.

    Returns
    -------
    ndarray, shape ``tau.shape + (p + 1,)``
    """
    tau = _as_tau(tau)
    x = 2.0 * tau - 1.0
    out = np.empty(x.shape + (p + 1,))
    out[..., 0] = 1.0
    if p >= 1:
        out[..., 1] = x
    for j in range(1, p):
        out[..., j + 1] = ((2 * j + 1) * x * out[..., j] - j * out[..., j - 1]) / (j + 1)
    return out * np.sqrt(2.0 * np.arange(p + 1) + 1.0)


def basis_deriv(p, tau):
    """Derivatives ``phi_j'(tau)`` on the reference element, shape ``tau.shape + (p + 1,)``."""
    tau = _as_tau(tau)
    x = 2.0 * tau - 1.0
    leg = np.empty(x.shape + (p + 1,))
    dleg = np.zeros(x.shape + (p + 1,))
    leg[..., 0] = 1.0
    if p >= 1:
        leg[..., 1] = x
        dleg[..., 1] = 1.0
    for j in range(1, p):
        leg[..., j + 1] = ((2 * j + 1) * x * leg[..., j] - j * leg[..., j - 1]) / (j + 1)
        # L'_{j+1} = L'_{j-1} + (2j + 1) L_j
        dleg[..., j + 1] = dleg[..., j - 1] + (2 * j + 1) * leg[..., j]
    return 2.0 * dleg * np.sqrt(2.0 * np.arange(p + 1) + 1.0)


def gauss_points(n):
    """Gauss-Legendre nodes and weights mapped to ``(0, 1)``."""
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def dg_matrices(p):
    """Mass and stiffness matrices and trace vectors for degree ``p``.

    ``S[i, j] = int_0^1 phi_j' phi_i + phi_j(0) phi_i(0)`` (row = test index),
    evaluated in closed form.
    """
    if p < 0:
        raise ValueError("degree must be non-negative")
    j = np.arange(p + 1)
    scale = np.sqrt(2.0 * j + 1.0)
    row, col = j[:, None], j[None, :]
    mu = np.where(col > row, 1.0, (-1.0) ** (row + col))
    stiffness = scale[:, None] * scale[None, :] * mu
    return DgMatrices(
        mass=np.eye(p + 1),
        stiffness=stiffness,
        trace0=(-1.0) ** j * scale,
        trace1=scale.copy(),
    )


def _sample(g, t):
    """Evaluate ``g`` on an array of times, falling back to a loop for scalar callables."""
    try:
        vals = np.asarray(g(t))
    except (TypeError, ValueError):
        vals = None
    if vals is None or vals.shape[: t.ndim] != t.shape:
        vals = np.asarray([g(float(ti)) for ti in t.ravel()])
        vals = vals.reshape(t.shape + vals.shape[1:])
    return vals


def _check_finite(vals, h, what):
    bad = ~np.isfinite(vals)
    if np.any(bad):
        n = int(np.argwhere(bad)[0][0])
        raise ValueError(
            f"{what}: non-finite sample of g on element {n} "
            f"(t in ({n * h:g}, {(n + 1) * h:g}])"
        )


def _moments(g, grid, nmom):
    """``int_0^1 g(t_n + h tau) phi_j(tau) dtau`` for ``j < nmom`` on every element.

    Gauss-Legendre with ``max(2p + 8, 24)`` points, doubled until two
    successive levels agree to `QUAD_TOL`.
    """
    N, h = grid.N, grid.h
    npts = max(2 * grid.p + 8, 24)
    starts = h * np.arange(N)
    prev = None
    while True:
        x, w = gauss_points(npts)
        t = starts[:, None] + h * x[None, :]
        vals = _sample(g, t)
        _check_finite(vals, h, "quadrature")
        phi = basis_eval(nmom - 1, x) if nmom > 0 else np.zeros((npts, 0))
        mom = np.einsum("nq...,q,qj->nj...", vals, w, phi)
        if prev is not None:
            diff = np.max(np.abs(mom - prev), initial=0.0)
            if diff <= QUAD_TOL * max(1.0, np.max(np.abs(mom), initial=0.0)):
                return mom
        if 2 * npts > QUAD_MAX_POINTS:
            LOGGER.warning("quadrature not converged to %.0e with %d points", QUAD_TOL, npts)
            return mom
        prev = mom
        npts *= 2


class PiecewisePolynomial:
    """Discontinuous piecewise polynomial on a `TimeGrid`.

    ``coeffs[n, j, ...]`` is the coefficient of ``phi_j`` on the step
    ``(t_n, t_{n+1})``; trailing axes hold vector values. Evaluation is
    left-continuous at the nodes. Instances are immutable.
    """

    def __init__(self, grid, coeffs):
        coeffs = np.array(coeffs, dtype=complex)
        if coeffs.ndim < 2 or coeffs.shape[:2] != (grid.N, grid.p + 1):
            raise ValueError(
                f"coefficients of shape {coeffs.shape} do not fit grid "
                f"(N={grid.N}, p={grid.p})"
            )
        coeffs.setflags(write=False)
        self.grid = grid
        self.coeffs = coeffs

    @property
    def value_shape(self):
        return self.coeffs.shape[2:]

    def __repr__(self):
        g = self.grid
        return f"PiecewisePolynomial(h={g.h:g}, N={g.N}, p={g.p}, value_shape={self.value_shape})"

    def _check_compatible(self, other):
        if self.grid != other.grid:
            raise ValueError(f"grid mismatch: {self.grid} vs {other.grid}")

    def __add__(self, other):
        self._check_compatible(other)
        return PiecewisePolynomial(self.grid, self.coeffs + other.coeffs)

    def __sub__(self, other):
        self._check_compatible(other)
        return PiecewisePolynomial(self.grid, self.coeffs - other.coeffs)

    def __neg__(self):
        return PiecewisePolynomial(self.grid, -self.coeffs)

    def __mul__(self, c):
        return PiecewisePolynomial(self.grid, c * self.coeffs)

    __rmul__ = __mul__

    def __call__(self, t):
        return eval_pp(self, t)

    def node_values(self):
        """Left limits ``u(t_n^-)`` for ``n = 1..N``."""
        t1 = np.sqrt(2 * np.arange(self.grid.p + 1) + 1.0)
        return np.tensordot(self.coeffs, t1, axes=([1], [0]))

    def right_values(self):
        """Right limits ``u(t_n^+)`` for ``n = 0..N-1``."""
        j = np.arange(self.grid.p + 1)
        t0 = (-1.0) ** j * np.sqrt(2 * j + 1.0)
        return np.tensordot(self.coeffs, t0, axes=([1], [0]))

    def jumps(self):
        """Jumps ``u(t_n^+) - u(t_n^-)`` at the interior nodes ``n = 1..N-1``."""
        return self.right_values()[1:] - self.node_values()[:-1]

    def l2_norm_squared(self):
        """``int_0^T |u|^2`` (exact, orthonormal basis)."""
        return self.grid.h * float(np.sum(np.abs(self.coeffs) ** 2))

    def to_csv(self):
        """Serialize scalar signals as ``step,coeff_index,re,im`` rows."""
        if self.value_shape:
            raise ValueError("CSV export is defined for scalar signals only")
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["step", "coeff_index", "re", "im"])
        for n in range(self.grid.N):
            for j in range(self.grid.p + 1):
                c = self.coeffs[n, j]
                writer.writerow([n, j, repr(float(c.real)), repr(float(c.imag))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text, h):
        rows = list(csv.DictReader(io.StringIO(text)))
        if not rows:
            raise ValueError("empty signal file")
        N = 1 + max(int(r["step"]) for r in rows)
        p = max(int(r["coeff_index"]) for r in rows)
        coeffs = np.zeros((N, p + 1), dtype=complex)
        for r in rows:
            coeffs[int(r["step"]), int(r["coeff_index"])] = complex(float(r["re"]), float(r["im"]))
        return cls(TimeGrid(h, N, p), coeffs)


def zeros(grid, value_shape=()):
    return PiecewisePolynomial(grid, np.zeros((grid.N, grid.p + 1) + tuple(value_shape)))


def locate(grid, t):
    """Element index and reference coordinate for times in ``(0, T]`` (left-continuous)."""
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0) or np.any(t > grid.T * (1 + 1e-14)):
        raise ValueError(f"time outside (0, {grid.T:g}]")
    k = t / grid.h
    kr = np.round(k)
    on_node = np.abs(k - kr) <= 1e-12 * np.maximum(1.0, k)
    n = np.where(on_node, kr - 1, np.ceil(k) - 1).astype(int)
    n = np.clip(n, 0, grid.N - 1)
    tau = np.clip(k - n, 0.0, 1.0)
    return n, tau


def eval_pp(u, t):
    """Evaluate a `PiecewisePolynomial` at times ``t`` in ``(0, T]``.

    At an interior node the left limit is returned.
    """
    scalar = np.ndim(t) == 0
    n, tau = locate(u.grid, t)
    phi = basis_eval(u.grid.p, tau)
    coeffs = u.coeffs[n]  # shape t.shape + (p+1,) + value_shape
    phi = phi.reshape(phi.shape + (1,) * len(u.value_shape))
    vals = np.sum(phi * coeffs, axis=np.ndim(tau))
    if scalar:
        return vals[()] if np.ndim(vals) == 0 else vals
    return vals


def interpolate(g, grid):
    """Apply the DG projector ``I_p`` to a function of time.

    On each step the coefficients of ``phi_0 .. phi_{p-1}`` are L2 moments
    (orthogonality to degree ``p - 1``) and the last coefficient is fixed by
    matching ``g`` at the right end point. For ``p = 0`` this reduces to
    right end point interpolation.

    Parameters
    ----------
    g : callable
        Function of time, ideally vectorized; may return vectors.
    grid : TimeGrid

    Returns
    -------
    PiecewisePolynomial
    """
    p, h = grid.p, grid.h
    right = _sample(g, h * np.arange(1, grid.N + 1))
    _check_finite(right, h, "end point")
    coeffs = np.zeros((grid.N, p + 1) + right.shape[1:], dtype=complex)
    scale = np.sqrt(2.0 * np.arange(p + 1) + 1.0)
    if p > 0:
        mom = _moments(g, grid, p)
        coeffs[:, :p] = mom
        partial = np.tensordot(mom, scale[:p], axes=([1], [0]))
    else:
        partial = 0.0
    coeffs[:, p] = (right - partial) / scale[p]
    return PiecewisePolynomial(grid, coeffs)


def l2_project(g, grid):
    """L2-orthogonal projection onto piecewise polynomials of degree ``p``."""
    return PiecewisePolynomial(grid, _moments(g, grid, grid.p + 1))


def as_signal(g, grid):
    """Return ``g`` itself if it is a signal on ``grid``, else ``interpolate(g, grid)``."""
    if isinstance(g, PiecewisePolynomial):
        if g.grid != grid:
            raise ValueError(f"grid mismatch: signal on {g.grid}, expected {grid}")
        return g
    return interpolate(g, grid)


def polynomial_signal(grid, poly):
    """Exact representation of a global polynomial (``numpy.polynomial.Polynomial``)."""
    x, w = gauss_points(grid.p + 2)
    phi = basis_eval(grid.p, x)
    t = grid.h * np.arange(grid.N)[:, None] + grid.h * x[None, :]
    return PiecewisePolynomial(grid, np.einsum("nq,q,qj->nj", poly(t), w, phi))
