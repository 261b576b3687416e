"""
p-convergence on the trapping sphere
====================================

For the unit sphere with spatially constant Dirichlet data every boundary
operator is a scalar symbol, so the whole time-domain solver runs in a few
milliseconds. We increase p at fixed h = 1/4 and watch the error.
"""
import numpy as np

from pcq.scatterbench import StudyConfig, convergence_study, fit_algebraic, fit_root_exponential

# %% A Gevrey window: root-exponential convergence, log(err) linear in sqrt(p).
smooth = convergence_study(StudyConfig(window="w1", p_list=list(range(2, 21, 2))))
for rec in smooth:
    print(f"w1  p={rec.p:>2}  error {rec.rel_error:.2e}")
fit = fit_root_exponential(smooth)
print(f"log(err) ~ {fit.slope:.2f} sqrt(p), R^2 = {fit.r_squared:.3f}\n")

# %% A window with finite smoothness: only algebraic convergence.
# N = 15 keeps the kinks at t = 0.5 and t = 1.5 inside time elements.
rough = convergence_study(StudyConfig(window="w2", N=15, p_list=list(range(2, 21, 2))))
for rec in rough:
    print(f"w2  p={rec.p:>2}  error {rec.rel_error:.2e}")
fit = fit_algebraic(rough)
print(f"log(err) ~ {fit.slope:.2f} log(p), R^2 = {fit.r_squared:.3f}")

# %% Same study against the exact continuous solution instead of p = 24.
exact = convergence_study(StudyConfig(window="w1", p_list=[4, 8, 12], reference="exact"))
print("\nagainst the exact solution:", [f"{r.rel_error:.2e}" for r in exact])
assert np.all(np.diff([r.rel_error for r in exact]) < 0)
