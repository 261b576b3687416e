"""The matrix valued CQ symbol and functions of it.

One DG step with the normalized Legendre basis is encoded by

    delta(z) = S - z T(0)^t T(1)

(the mass matrix is the identity). Convolution weights are the Taylor
coefficients of ``K(delta(z) / h)``, so we need analytic functions at
small dense matrix arguments. They are computed by diagonalization, with
a fallback when the eigenvectors are ill-conditioned: for DG symbols the
Cauchy integral in ``z`` over a small circle around the requested point,
for general matrices the Cauchy integral in ``lambda`` around the spectrum.
"""
import csv
import io
import logging
import warnings
from dataclasses import dataclass

import numpy as np

from .timebasis import dg_matrices

LOGGER = logging.getLogger(__name__)

# |lambda| <= SPECTRAL_RADIUS_CONSTANT * (p + 1)**2, checked empirically up to p = 32
SPECTRAL_RADIUS_CONSTANT = 2.0
# eigenvector condition number above which diagonalization is not trusted
CONDITION_THRESHOLD = 1e8
EIG_RESIDUAL_TOL = 1e-10
CONTOUR_TOL = 1e-12
CONTOUR_MAX_POINTS = 2 ** 15
SHIFT_RADIUS = 1e-2


class AbscissaError(ValueError):
    """The spectrum of ``delta(z) / h`` leaves the half plane where ``K`` is analytic."""


class EigenError(RuntimeError):
    """Eigendecomposition failed or is inaccurate."""


@dataclass(frozen=True, eq=False)
class DeltaMatrix:
    """A symbol matrix together with its (eagerly computed) eigendecomposition."""

    z: complex
    p: int
    matrix: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    condition: float
    dg: bool = False

    @classmethod
    def from_matrix(cls, matrix, z=0.0, p=None, dg=False):
        matrix = np.array(matrix, dtype=complex)
        matrix.setflags(write=False)
        p = matrix.shape[0] - 1 if p is None else p
        try:
            lam, Q = np.linalg.eig(matrix)
        except np.linalg.LinAlgError as exc:
            raise EigenError(f"eigendecomposition failed for p={p}, z={z}: {exc}") from exc
        norm = max(np.linalg.norm(matrix, 2), 1.0)
        resid = np.linalg.norm(matrix @ Q - Q * lam, 2)
        if resid > EIG_RESIDUAL_TOL * norm:
            raise EigenError(f"eigen residual {resid:.2e} too large for p={p}, z={z}")
        cond = float(np.linalg.cond(Q))
        for arr in (lam, Q):
            arr.setflags(write=False)
        return cls(complex(z), int(p), matrix, lam, Q, cond, dg)

    @property
    def size(self):
        return self.matrix.shape[0]


def delta_matrix(p, z):
    """Plain array ``S - z T(0)^t T(1)`` without eigendecomposition."""
    mats = dg_matrices(p)
    return mats.stiffness - complex(z) * mats.jump


def delta(p, z):
    """The CQ symbol of the degree ``p`` DG method at ``z``.

    For ``p = 0`` this is the backward Euler symbol ``1 - z``. For ``|z| <= 1``
    all eigenvalues satisfy ``Re(lambda) >= (1 - |z|**2) / 2``.
    """
    d = DeltaMatrix.from_matrix(delta_matrix(p, z), z, p, dg=True)
    bound = SPECTRAL_RADIUS_CONSTANT * (p + 1) ** 2
    if np.max(np.abs(d.eigenvalues)) > bound:
        warnings.warn(f"spectral radius of delta({z}) exceeds {bound:g} for p={p}", RuntimeWarning)
    return d


@dataclass(frozen=True)
class Spectrum:
    eigenvalues: np.ndarray
    condition: float


def spectrum(d):
    """Eigenvalues sorted by real part and the eigenvector condition number."""
    order = np.lexsort((d.eigenvalues.imag, d.eigenvalues.real))
    return Spectrum(d.eigenvalues[order].copy(), d.condition)


def sampling_radius(N, n_samples=None):
    """Default radius ``10**(-16 / (N + L - 1))`` for ``L`` samples (``L = N + 1`` gives ``10**(-8/N)``)."""
    L = N + 1 if n_samples is None else n_samples
    return 10.0 ** (-16.0 / (N + L - 1))


def sampling_points(N, r=None, n_samples=None):
    """``z_l = r exp(-2 pi i l / L)``, ``l = 0..L-1``."""
    L = N + 1 if n_samples is None else n_samples
    r = sampling_radius(N, L) if r is None else r
    return r * np.exp(-2j * np.pi * np.arange(L) / L)


def spectrum_csv(rows):
    """CSV text with header ``p,z_re,z_im,lam_re,lam_im`` from ``(p, z, lam)`` triples."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["p", "z_re", "z_im", "lam_re", "lam_im"])
    for p, z, lam in rows:
        writer.writerow([p, repr(float(np.real(z))), repr(float(np.imag(z))),
                         repr(float(np.real(lam))), repr(float(np.imag(lam)))])
    return buf.getvalue()


def _check_abscissa(f, mu, h):
    sigma = getattr(f, "sigma", 0.0)
    re_min = float(np.min(mu.real))
    if re_min <= sigma:
        msg = f"spectrum of delta/h reaches Re = {re_min:.3g}, outside Re > sigma = {sigma:g}"
        if sigma > 0 and re_min > 0:
            msg += f"; need h < {re_min * h / sigma:.3g}"
        raise AbscissaError(msg)


def _diag_function(f, d, h):
    mu = d.eigenvalues / h
    fvals = np.asarray(f(mu), dtype=complex)
    Q = d.eigenvectors
    # Q diag(f) Q^{-1} via a transposed solve
    return np.linalg.solve(Q.T, (Q * fvals).T).T


def _ellipse(mu, sigma):
    """Ellipse in ``Re s > sigma`` enclosing the points ``mu`` with margin."""
    x, y = mu.real, np.abs(mu.imag)
    xmin, xmax = x.min(), x.max()
    left = sigma + 0.5 * (xmin - sigma)
    right = xmax + max(1.0, 0.5 * (xmax - xmin), 0.5 * (xmin - sigma))
    c = 0.5 * (left + right)
    a = 0.5 * (right - left)
    need = y / np.sqrt(np.maximum(1.0 - ((x - c) / a) ** 2, 1e-300))
    b = max(1.5 * need.max(), a)
    return c, a, b


def _contour_function(f, d, h):
    A = d.matrix / h
    n = A.shape[0]
    sigma = getattr(f, "sigma", 0.0)
    c, a, b = _ellipse(d.eigenvalues / h, sigma)
    eye = np.eye(n)

    def partial_sum(theta):
        lam = c + a * np.cos(theta) + 1j * b * np.sin(theta)
        dlam = -a * np.sin(theta) + 1j * b * np.cos(theta)
        res = np.linalg.solve(lam[:, None, None] * eye - A, np.broadcast_to(eye, (len(lam), n, n)))
        wts = np.asarray(f(lam), dtype=complex) * dlam
        return np.einsum("k,kij->ij", wts, res) / 1j

    M = 64
    total = partial_sum(2 * np.pi * np.arange(M) / M)
    approx = total / M
    while True:
        odd = partial_sum(2 * np.pi * (np.arange(M) + 0.5) / M)
        total = total + odd
        M *= 2
        new = total / M
        if np.max(np.abs(new - approx)) <= CONTOUR_TOL * max(np.max(np.abs(new)), 1e-300):
            return new
        if M >= CONTOUR_MAX_POINTS:
            LOGGER.warning("contour quadrature not converged with %d points", M)
            return new
        approx = new


def _shifted_function(f, d, h):
    """Average of ``f(delta(z0 + rho w) / h)`` over ``q`` roots of unity ``w``.

    This is the trapezoidal rule for the Cauchy integral in ``z``; the error
    is ``O(rho**q)`` while ``delta`` is well-conditioned on the circle.
    """
    z0 = d.z
    rho = SHIFT_RADIUS
    if abs(z0) < 1:
        rho = min(rho, 0.5 * (1 - abs(z0)))
    q = max(4, int(np.ceil(16 / -np.log10(rho))))
    acc = 0
    for m in range(q):
        zm = z0 + rho * np.exp(2j * np.pi * (m + 0.5) / q)
        dm = delta(d.p, zm)
        if dm.condition > CONDITION_THRESHOLD:
            LOGGER.warning("delta(%s) still ill-conditioned (%.1e)", zm, dm.condition)
        acc = acc + _diag_function(f, dm, h)
    return acc / q


def matrix_function(f, d, h=1.0, method="auto"):
    """Evaluate ``f(delta / h)`` for an analytic scalar function ``f``.

    Parameters
    ----------
    f : TransferFunction or callable
        Vectorized scalar function; ``f.sigma`` (default 0) is its abscissa.
    d : DeltaMatrix or array_like
        Symbol matrix.
    h : float
        Timestep.
    method : {'auto', 'diag', 'contour', 'shift'}
        ``'diag'`` diagonalizes. ``'contour'`` evaluates the Cauchy integral over
        an ellipse around the spectrum with the trapezoidal rule. ``'shift'``
        (DG symbols only) averages over a small circle around ``z``.
        ``'auto'`` diagonalizes unless the eigenvector condition number exceeds
        `CONDITION_THRESHOLD`, then uses ``'shift'`` for DG symbols and
        ``'contour'`` otherwise.

    Returns
    -------
    ndarray, complex, shape ``(n, n)``

    Raises
    ------
    AbscissaError
        If some eigenvalue of ``delta / h`` has real part ``<= f.sigma``.
    """
    if not isinstance(d, DeltaMatrix):
        d = DeltaMatrix.from_matrix(d)
    _check_abscissa(f, d.eigenvalues / h, h)
    if method == "auto":
        if d.condition <= CONDITION_THRESHOLD:
            method = "diag"
        else:
            method = "shift" if d.dg else "contour"
    if method == "diag":
        return _diag_function(f, d, h)
    if method == "contour":
        return _contour_function(f, d, h)
    if method == "shift":
        if not d.dg:
            raise ValueError("the shift method needs a DG symbol built by delta()")
        return _shifted_function(f, d, h)
    raise ValueError(f"unknown method {method!r}")
