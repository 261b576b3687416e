"""Convolution weights, the discrete operator ``K(d_t^h)`` and convolution solvers.

The weights ``W_n`` are the Taylor coefficients of ``K(delta(z) / h)``. They
are recovered from samples on a circle of radius ``r`` by a discrete Fourier
transform. With ``L`` samples the aliasing error is ``O(r**L)`` and roundoff
is amplified by ``r**-N``; the default ``L = N + 1`` balances both at about
``1e-8``, while ``oversample > 1`` (more samples, larger radius) gets close to
machine precision.
"""
import csv
import io
import logging
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg

from .cqsymbol import AbscissaError, delta, matrix_function, sampling_points, sampling_radius
from .timebasis import PiecewisePolynomial, as_signal

LOGGER = logging.getLogger(__name__)

MACHINE_EPS = np.finfo(float).eps
RESIDUAL_TOL = 1e-8
DEFAULT_STAB_POINTS = 4


@dataclass(frozen=True, eq=False)
class ConvolutionWeights:
    """Weights ``W_0 .. W_N`` with ``sum_n W_n z**n = K(symbol(z) / h)``.

    ``symbol`` maps ``z`` to a `DeltaMatrix`; it is kept so that solvers can
    re-evaluate the generating function (stabilized ``W_0``, all-at-once).
    """

    p: int
    h: float
    N: int
    r: float
    weights: np.ndarray
    n_samples: int
    kernel: Callable = field(repr=False)
    symbol: Callable = field(repr=False)

    @property
    def size(self):
        return self.weights.shape[1]

    def series(self, z):
        """Evaluate the truncated power series ``sum_n W_n z**n``."""
        powers = complex(z) ** np.arange(self.N + 1)
        return np.tensordot(powers, self.weights, axes=(0, 0))

    def generating(self, z):
        """``K(symbol(z) / h)`` evaluated directly."""
        return matrix_function(self.kernel, self.symbol(z), self.h)

    def to_csv(self):
        """CSV rows ``n,row,col,re,im``."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["n", "row", "col", "re", "im"])
        for n, W in enumerate(self.weights):
            for i, j in np.ndindex(W.shape):
                writer.writerow([n, i, j, repr(float(W[i, j].real)), repr(float(W[i, j].imag))])
        return buf.getvalue()


def dg_symbol(p):
    """``z -> delta(p, z)``."""
    return lambda z: delta(p, z)


def check_admissible(K, h, r):
    """Raise `AbscissaError` unless ``(1 - r**2) / (2h) > sigma``."""
    sigma = getattr(K, "sigma", 0.0)
    if sigma > 0 and (1 - r ** 2) / (2 * h) <= sigma:
        raise AbscissaError(
            f"timestep h={h:g} too large for abscissa sigma={sigma:g}; "
            f"need h < {(1 - r ** 2) / (2 * sigma):.4g}"
        )


def _sample_generating(K, symbol, h, zs, jobs=1):
    def one(item):
        l, z = item
        try:
            return matrix_function(K, symbol(z), h)
        except Exception as exc:
            raise type(exc)(f"sample l={l} (z={z:.3g}): {exc}") from exc

    items = list(enumerate(zs))
    if jobs > 1:
        with ThreadPoolExecutor(jobs) as pool:
            return np.array(list(pool.map(one, items)))
    return np.array([one(it) for it in items])


def weights_from_symbol(K, symbol, size, h, N, r=None, oversample=1, jobs=1):
    """Weights for an arbitrary symbol map ``z -> DeltaMatrix`` of dimension ``size``."""
    L = int(oversample) * (N + 1)
    if L < N + 1:
        raise ValueError("oversample must be a positive integer")
    r = sampling_radius(N, L) if r is None else float(r)
    check_admissible(K, h, r)
    zs = sampling_points(N, r, L)
    samples = _sample_generating(K, symbol, h, zs, jobs)
    # samples[l] = sum_n W_n r^n exp(-2 pi i l n / L)
    scaled = np.fft.ifft(samples, axis=0)[: N + 1]
    W = scaled * (r ** -np.arange(N + 1, dtype=float))[:, None, None]
    W.setflags(write=False)
    return ConvolutionWeights(size - 1, h, N, r, W, L, K, symbol)


def compute_weights(K, grid, r=None, oversample=1, jobs=1):
    """Convolution weights of the degree ``p`` DG method.

    Parameters
    ----------
    K : TransferFunction
    grid : TimeGrid
    r : float, optional
        Sampling radius; default ``10**(-16 / (N + L - 1))``.
    oversample : int
        Number of samples is ``oversample * (N + 1)``.
    jobs : int
        Threads used for the independent samples.

    Returns
    -------
    ConvolutionWeights
    """
    return weights_from_symbol(K, dg_symbol(grid.p), grid.p + 1, grid.h, grid.N,
                               r=r, oversample=oversample, jobs=jobs)


def _check_weights(weights, grid):
    if (weights.p, weights.N) != (grid.p, grid.N) or not np.isclose(weights.h, grid.h, rtol=1e-14):
        raise ValueError(
            f"weights for (p={weights.p}, h={weights.h:g}, N={weights.N}) "
            f"do not match grid (p={grid.p}, h={grid.h:g}, N={grid.N})"
        )


def convolve(W, x):
    """Causal block convolution ``y[n] = sum_{j<=n} W[j] @ x[n-j]``.

    ``x`` has shape ``(N, size, ...)``; trailing axes are carried along.
    """
    N = x.shape[0]
    if W.shape[0] < N:
        raise ValueError(f"{W.shape[0]} weights cannot act on {N} steps")
    y = np.zeros(x.shape, dtype=complex)
    for n in range(N):
        y[n] = np.einsum("jik,jk...->i...", W[n::-1], x[: n + 1])
    return y


def apply(K, g, grid, weights=None, **weight_opts):
    """Discrete convolution ``K(d_t^h) g``.

    Functions are projected with ``I_p`` first; signals on ``grid`` are
    used as they are.
    """
    sig = as_signal(g, grid)
    if weights is None:
        weights = compute_weights(K, grid, **weight_opts)
    _check_weights(weights, grid)
    return PiecewisePolynomial(grid, convolve(weights.weights, sig.coeffs))


def stabilized_first_weight(weights, stab_points=DEFAULT_STAB_POINTS):
    """Approximation of ``W_0 = K(symbol(0) / h)`` used by the marching solver.

    For ``q = stab_points > 0`` this is the trapezoidal rule with ``q`` points
    on the circle of radius ``eps**(1 / (2 ceil(q / 2)))``; ``q = 1`` gives
    ``K(symbol(sqrt(eps)) / h)``. ``q = 0`` evaluates ``K(symbol(0) / h)``
    by plain diagonalization.
    """
    q = int(stab_points)
    if q < 0:
        raise ValueError("stab_points must be non-negative")
    if q == 0:
        return matrix_function(weights.kernel, weights.symbol(0.0), weights.h, method="diag")
    rho = MACHINE_EPS ** (1.0 / (2 * -(-q // 2)))
    zs = rho * np.exp(2j * np.pi * np.arange(q) / q)
    return np.mean([weights.generating(z) for z in zs], axis=0)


def residual(W, lam, rhs):
    """Relative max-norm residual of the convolution system."""
    res = convolve(W, lam) - rhs
    scale = max(np.max(np.abs(rhs), initial=0.0), 1e-300)
    return float(np.max(np.abs(res), initial=0.0) / scale)


def march(W, W0, rhs):
    """Forward substitution ``W0 x[n] = rhs[n] - sum_{1<=j<=n} W[j] x[n-j]``."""
    N = rhs.shape[0]
    lu = scipy.linalg.lu_factor(W0)
    x = np.zeros(rhs.shape, dtype=complex)
    for n in range(N):
        hist = rhs[n].copy()
        if n > 0:
            hist -= np.einsum("jik,jk...->i...", W[n:0:-1], x[:n])
        x[n] = scipy.linalg.lu_solve(lu, hist.reshape(W0.shape[0], -1)).reshape(hist.shape)
    return x


def _factor_check(W0, stab_points):
    cond = np.linalg.cond(W0)
    if not np.isfinite(cond) or cond > 1e3 / MACHINE_EPS:
        raise np.linalg.LinAlgError(
            f"diagonal weight is singular to working precision (cond={cond:.2e}); "
            f"try more stab_points than {stab_points}"
        )
    return cond


def solve_marching(K, rhs, grid, stab_points=DEFAULT_STAB_POINTS, weights=None,
                   full_output=False, **weight_opts):
    """Solve ``K(d_t^h) lam = rhs`` step by step.

    Parameters
    ----------
    K : TransferFunction
    rhs : PiecewisePolynomial or callable
    grid : TimeGrid
    stab_points : int
        Points of the small-circle rule for the diagonal weight, see
        `stabilized_first_weight`. ``0`` uses ``K(delta(0) / h)`` directly.
    weights : ConvolutionWeights, optional
    full_output : bool
        Also return a dict with the residual (measured with the sampled
        weights) and the condition number of the diagonal weight.

    Returns
    -------
    PiecewisePolynomial, or (PiecewisePolynomial, dict)
    """
    sig = as_signal(rhs, grid)
    if weights is None:
        weights = compute_weights(K, grid, **weight_opts)
    _check_weights(weights, grid)
    W0 = stabilized_first_weight(weights, stab_points)
    cond = _factor_check(W0, stab_points)
    lam = march(weights.weights, W0, sig.coeffs)
    res = residual(weights.weights, lam, sig.coeffs)
    info = {"residual": res, "condition": cond, "stab_points": int(stab_points)}
    if not res <= RESIDUAL_TOL:
        msg = f"marching residual {res:.2e} exceeds {RESIDUAL_TOL:.0e}"
        info["warning"] = msg
        warnings.warn(msg, RuntimeWarning)
    out = PiecewisePolynomial(grid, lam)
    return (out, info) if full_output else out


def allatonce(K, symbol, h, rhs, r=None, oversample=1):
    """All-at-once solve on raw coefficient arrays ``rhs`` of shape ``(N, size, ...)``."""
    N = rhs.shape[0]
    L = int(oversample) * (N + 1)
    r = sampling_radius(N, L) if r is None else float(r)
    check_admissible(K, h, r)
    scale = r ** np.arange(N, dtype=float)
    scale = scale.reshape((N,) + (1,) * (rhs.ndim - 1))
    padded = np.zeros((L,) + rhs.shape[1:], dtype=complex)
    padded[:N] = rhs * scale
    hat = np.fft.fft(padded, axis=0)
    sol = np.empty_like(hat)
    for l, z in enumerate(sampling_points(N, r, L)):
        F = matrix_function(K, symbol(z), h)
        try:
            b = hat[l].reshape(F.shape[0], -1)
            sol[l] = np.linalg.solve(F, b).reshape(hat[l].shape)
        except np.linalg.LinAlgError as exc:
            raise np.linalg.LinAlgError(
                f"sample l={l} (z={z:.3g}) is singular, cond={np.linalg.cond(F):.2e}"
            ) from exc
    return np.fft.ifft(sol, axis=0)[:N] / scale


def solve_allatonce(K, rhs, grid, r=None, oversample=1):
    """Solve ``K(d_t^h) lam = rhs`` by a scaled FFT in the step index.

    ``rhs`` is scaled by ``r**n``, transformed, one dense system
    ``K(delta(z_l) / h) x_l = rhs_l`` is solved per sample, and the result
    transformed back and unscaled.
    """
    sig = as_signal(rhs, grid)
    lam = allatonce(K, dg_symbol(grid.p), grid.h, sig.coeffs, r=r, oversample=oversample)
    return PiecewisePolynomial(grid, lam)
