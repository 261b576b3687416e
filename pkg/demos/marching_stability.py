"""
Why the marching solver needs a stabilized diagonal weight
==========================================================

Marching in time inverts only W_0 = K(delta(0)/h). For large p the
eigenvectors of delta(0) are badly conditioned, so evaluating W_0 by
diagonalization loses digits that then propagate through every step.
Averaging over a few points on a tiny circle around 0 avoids that.
"""
import warnings

from pcq.cqsymbol import delta
from pcq.scatterbench import BenchmarkProblem, make_window, relative_error, solve_sphere_dirichlet
from pcq.timebasis import TimeGrid

window = make_window("w1")
print(f"{'p':>3} {'cond Q(0)':>10} {'4 points':>10} {'plain W_0':>10}")
for p in (4, 8, 12, 16, 20, 24):
    grid = TimeGrid.from_final_time(4.0, 16, p)
    ref = solve_sphere_dirichlet(BenchmarkProblem(window, grid))
    devs = []
    for q in (4, 0):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            lam = solve_sphere_dirichlet(BenchmarkProblem(window, grid, solver="marching", stab_points=q))
        devs.append(relative_error(lam, ref))
    print(f"{p:>3} {delta(p, 0).condition:>10.1e} {devs[0]:>10.1e} {devs[1]:>10.1e}")
print("\ncolumns: deviation of marching from the all-at-once solution")
