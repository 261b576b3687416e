"""
Where the DG symbol lives in the complex plane
==============================================

The weights of the p-version method are Taylor coefficients of K(delta(z)/h).
Whether a transfer function K may be used at all depends on where the
eigenvalues of delta(z) sit, so we look at them on the usual sampling circle.
"""
import numpy as np

from pcq.cqsymbol import delta, sampling_points, spectrum
from pcq.dgref import radau_symbol

T, N = 8.0, 15
h = T / N
zs = sampling_points(N)
r = abs(zs[0])
print(f"h = {h:.4f}, sampling radius r = {r:.4f}")

# %% Real parts stay to the right of (1 - r^2)/2, moduli grow like p^2.
print(f"\n{'p':>3} {'min Re':>10} {'bound':>8} {'max |lam|':>10} {'2(p+1)^2':>9} {'cond(Q)':>9}")
for p in (0, 1, 2, 4, 8, 12, 16, 24):
    lams = [spectrum(delta(p, z)) for z in zs]
    re_min = min(s.eigenvalues.real.min() for s in lams)
    mod = max(np.abs(s.eigenvalues).max() for s in lams)
    cond = max(s.condition for s in lams)
    print(f"{p:>3} {re_min:>10.4f} {(1 - r**2) / 2:>8.4f} {mod:>10.2f} {2 * (p + 1)**2:>9} {cond:>9.1e}")

# %% The three stage RadauIIa symbol has the same eigenvalues as DG with p = 2.
z = zs[3]
dg = np.sort_complex(delta(2, z).eigenvalues)
rk = np.sort_complex(radau_symbol(z).eigenvalues)
print(f"\nDG p=2 vs RadauIIa at z = {z:.3f}: max eigenvalue gap {np.max(np.abs(dg - rk)):.1e}")
