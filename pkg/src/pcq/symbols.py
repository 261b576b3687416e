"""Transfer functions ``s -> K(s)`` for the operational calculus.

A `TransferFunction` bundles a vectorized, re-entrant evaluation map with
advisory metadata: the abscissa ``sigma`` of the half plane of analyticity
and the growth exponent ``mu`` in ``|K(s)| <= C |s|**mu``.

The unit sphere symbols act on spatially constant densities, which are
eigenfunctions of the boundary integral operators of the wave equation.
"""
from dataclasses import dataclass
from typing import Callable

import numpy as np

SERIES_RADIUS = 1e-2


@dataclass(frozen=True)
class TransferFunction:
    func: Callable
    sigma: float = 0.0
    mu: float = 0.0
    label: str = ""

    def __call__(self, s):
        return self.func(np.asarray(s, dtype=complex))

    def __mul__(self, other):
        return sym_product(self, other)


def sym_identity():
    return TransferFunction(lambda s: np.ones_like(s), 0.0, 0.0, "1")


def sym_s():
    return TransferFunction(lambda s: s, 0.0, 1.0, "s")


def sym_s_inv():
    return TransferFunction(lambda s: 1.0 / s, 0.0, -1.0, "s_inv")


def sym_resolvent(zeta):
    """``K(s) = 1 / (s - zeta)``; ``zeta`` must satisfy ``Re zeta <= 0``."""
    zeta = complex(zeta)
    if zeta.real > 0:
        raise ValueError(f"resolvent symbol needs Re(zeta) <= 0, got {zeta}")
    return TransferFunction(lambda s: 1.0 / (s - zeta), 0.0, -1.0, f"resolvent({zeta:g})")


def sym_product(k1, k2):
    return TransferFunction(
        lambda s: k1(s) * k2(s),
        max(k1.sigma, k2.sigma),
        k1.mu + k2.mu,
        f"{k1.label}*{k2.label}",
    )


def sym_scale(c, k):
    return TransferFunction(lambda s: c * k(s), k.sigma, k.mu, f"{c:g}*{k.label}")


def _expm1_ratio(s):
    """``(1 - exp(-2s)) / (2s)``, entire; Taylor series near the origin."""
    s = np.asarray(s, dtype=complex)
    out = np.empty_like(s)
    small = np.abs(s) < SERIES_RADIUS
    big = ~small
    out[big] = -np.expm1(-2.0 * s[big]) / (2.0 * s[big])
    if np.any(small):
        x = -2.0 * s[small]
        # (e^x - 1)/x = sum_k x^k / (k+1)!; |x| < 0.02 so 12 terms reach roundoff
        term = np.ones_like(x)
        acc = np.ones_like(x)
        for k in range(1, 13):
            term = term * x / (k + 1)
            acc = acc + term
        out[small] = acc
    return out


def _sphere_v(s):
    return _expm1_ratio(s)


def _sphere_half_plus_k(s):
    # (s - 1 + (s + 1) e^{-2s}) / (2s) = 1 - (s + 1) (1 - e^{-2s}) / (2s)
    s = np.asarray(s, dtype=complex)
    return 1.0 - (s + 1.0) * _expm1_ratio(s)


def sphere_V():
    """Single layer operator of the unit sphere on constants: ``(1 - e^{-2s}) / (2s)``."""
    return TransferFunction(_sphere_v, 0.0, -1.0, "sphereV")


def sphere_half_plus_K():
    """``1/2 + K(s)`` on constants: ``(s - 1 + (s + 1) e^{-2s}) / (2s)``."""
    return TransferFunction(_sphere_half_plus_k, 0.0, 0.0, "half_plus_K")


def sphere_minus_half_plus_K():
    """``-1/2 + K(s)`` on constants."""
    return TransferFunction(lambda s: _sphere_half_plus_k(s) - 1.0, 0.0, 0.0, "mhalf_plus_K")


def sphere_sV():
    """``s V(s) = (1 - e^{-2s}) / 2``, the left-hand side of the trapping sphere problem."""
    return TransferFunction(lambda s: -0.5 * np.expm1(-2.0 * np.asarray(s, dtype=complex)),
                            0.0, 0.0, "sV")


REGISTRY = {
    "1": sym_identity,
    "s": sym_s,
    "s_inv": sym_s_inv,
    "sphereV": sphere_V,
    "sV": sphere_sV,
    "half_plus_K": sphere_half_plus_K,
    "mhalf_plus_K": sphere_minus_half_plus_K,
}


def get_symbol(label):
    """Look up a built-in symbol by its registry label."""
    try:
        return REGISTRY[label]()
    except KeyError:
        raise KeyError(f"unknown symbol {label!r}; known: {sorted(REGISTRY)}") from None


def register(label, factory):
    """Add a symbol factory (a zero-argument callable) to the registry."""
    REGISTRY[label] = factory
