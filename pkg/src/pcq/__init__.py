"""p-version DG convolution quadrature.

Time-domain convolution operators ``K(d_t)`` are discretized by replacing
the Laplace variable with the matrix symbol of a discontinuous Galerkin
time step of degree ``p``. Accuracy is gained by raising ``p`` at a fixed
time step.
"""
from .cqengine import (ConvolutionWeights, apply, compute_weights, solve_allatonce,
                       solve_marching)
from .cqsymbol import AbscissaError, DeltaMatrix, delta, matrix_function, spectrum
from .dgref import (ode_solve, radau_cq_apply, radau_cq_solve, radau_cq_weights,
                    radau_equivalence_check, radau_tableau, stability_probe)
from .scatterbench import (BenchmarkProblem, StudyConfig, WindowFunction, convergence_study,
                           relative_error, solve_sphere_dirichlet)
from .symbols import (TransferFunction, get_symbol, sphere_half_plus_K, sphere_minus_half_plus_K,
                      sphere_sV, sphere_V, sym_identity, sym_product, sym_resolvent, sym_s,
                      sym_s_inv, sym_scale)
from .timebasis import (PiecewisePolynomial, TimeGrid, basis_eval, dg_matrices, eval_pp,
                        interpolate, l2_project)

__version__ = "0.1.0"
