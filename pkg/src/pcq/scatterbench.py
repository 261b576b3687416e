"""Perfectly trapping sphere benchmark.

On the unit sphere, spatially constant densities are eigenfunctions of the
wave boundary integral operators, so the interior Dirichlet problem

    d_t V(d_t) lam = (-1/2 + K(d_t)) g

becomes a scalar convolution equation. The data is a windowed sine burst
``g(t) = w(t - 1/2) sin(4 pi (t - 1/2))``.

The two symbols share the factor ``(1 - e^{-2s}) / (2s)``, so the problem
reduces to ``lam = -(g + int_0^t g)``. The same cancellation holds for the
discrete operators, which gives a closed-form check of the discrete solution.
"""
import csv
import io
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np
from scipy import stats

from . import cqengine, dgref
from .symbols import sphere_minus_half_plus_K, sphere_sV, sym_s_inv
from .timebasis import TimeGrid, interpolate

LOGGER = logging.getLogger(__name__)

T_LAG = 0.5
CARRIER = 4 * math.pi


@dataclass(frozen=True)
class WindowFunction:
    """``'gevrey'``: ``c exp(-1 / [t(1-t)]**gamma)``; ``'poly'``: ``t**2 (1-t)**2``; both on ``(0, 1)``."""

    kind: str = "gevrey"
    gamma: float = 1.0

    def __post_init__(self):
        if self.kind not in ("gevrey", "poly"):
            raise ValueError(f"unknown window kind {self.kind!r}")
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")

    @property
    def c(self):
        # normalization w(1/2) = 1 for the Gevrey window
        return math.exp(4.0 ** self.gamma) if self.kind == "gevrey" else 1.0

    def __call__(self, t):
        return window_eval(self, t)


def window_eval(w, t):
    """Evaluate a window; zero outside ``(0, 1)``."""
    t = np.asarray(t, dtype=float)
    inside = (t > 0) & (t < 1)
    ts = np.where(inside, t, 0.5)
    if w.kind == "poly":
        vals = ts ** 2 * (1 - ts) ** 2
    else:
        with np.errstate(over="ignore", under="ignore"):
            vals = w.c * np.exp(-1.0 / (ts * (1 - ts)) ** w.gamma)
    out = np.where(inside, vals, 0.0)
    return out[()] if out.ndim == 0 else out


WINDOWS = {"w1": "gevrey", "w2": "poly"}


def make_window(name, gamma=1.0):
    """``'w1'`` (Gevrey) or ``'w2'`` (polynomial)."""
    try:
        return WindowFunction(WINDOWS[name], gamma)
    except KeyError:
        raise ValueError(f"unknown window {name!r}; use one of {sorted(WINDOWS)}") from None


@dataclass(frozen=True)
class BenchmarkProblem:
    window: WindowFunction
    grid: TimeGrid
    t_lag: float = T_LAG
    carrier: float = CARRIER
    solver: str = "allatonce"
    stab_points: int = cqengine.DEFAULT_STAB_POINTS
    oversample: int = 1

    def data(self, t):
        """Dirichlet data ``g(t)``."""
        s = np.asarray(t, dtype=float) - self.t_lag
        return window_eval(self.window, s) * np.sin(self.carrier * s)


def solve_sphere_dirichlet(prob, data=None, full_output=False):
    """Discrete density ``lam^h`` for the trapping sphere.

    The right-hand side ``(-1/2 + K)(d_t^h) g`` is computed first, then
    ``(s V)(d_t^h) lam = rhs`` is solved with the configured solver.
    """
    grid = prob.grid
    g = prob.data if data is None else data
    opts = {"oversample": prob.oversample}
    rhs = cqengine.apply(sphere_minus_half_plus_K(), g, grid, **opts)
    info = {}
    if prob.solver == "allatonce":
        lam = cqengine.solve_allatonce(sphere_sV(), rhs, grid, **opts)
    elif prob.solver == "marching":
        lam, info = cqengine.solve_marching(sphere_sV(), rhs, grid, prob.stab_points,
                                            full_output=True, **opts)
    else:
        raise ValueError(f"unknown solver {prob.solver!r}")
    return (lam, info) if full_output else lam


def sphere_discrete_closed_form(prob, data=None):
    """``-(I_p g + d_t^h^-1 I_p g)``, the discrete solution without any symbol of the sphere."""
    g = prob.data if data is None else data
    ig = interpolate(g, prob.grid)
    return -(ig + cqengine.apply(sym_s_inv(), ig, prob.grid, oversample=prob.oversample))


def sphere_exact(prob, data=None, t=None):
    """Continuous solution ``-(g(t) + int_0^t g)`` at times ``t`` (adaptive quadrature)."""
    from scipy.integrate import quad

    g = prob.data if data is None else data
    t = np.atleast_1d(np.asarray(t, dtype=float))
    order = np.argsort(t)
    out = np.empty_like(t)
    acc, prev = 0.0, 0.0
    for k in order:
        acc += quad(lambda s: float(g(s)), prev, t[k], limit=200, epsabs=1e-15, epsrel=1e-13)[0]
        prev = t[k]
        out[k] = -(float(g(t[k])) + acc)
    return out


def sample_times(T, samples=1024):
    """Uniform samples ``T k / samples``, ``k = 1..samples``."""
    return T * np.arange(1, samples + 1) / samples


def relative_error(lam, ref, samples=1024):
    """``max |lam - ref| / max |ref|`` on a uniform grid in ``(0, T]``.

    ``ref`` may be a signal (possibly of another degree) or a callable.
    """
    t = sample_times(lam.grid.T, samples)
    a = lam(t)
    b = ref(t)
    scale = np.max(np.abs(b))
    if scale == 0:
        return 0.0 if np.max(np.abs(a)) == 0 else math.inf
    return float(np.max(np.abs(a - b)) / scale)


# ---------------------------------------------------------------- studies

@dataclass
class StudyConfig:
    """Parameters of a convergence sweep in ``p``.

    ``reference`` is ``'self'`` (solution at ``p_ref``) or ``'exact'``
    (the closed form ``-(g + int g)``). ``radau_match_p``, if set, adds a
    RadauIIa run with as many unknowns as the DG run of that degree.
    """

    window: str = "w1"
    gamma: float = 1.0
    T: float = 4.0
    N: int = 16
    p_list: list = field(default_factory=lambda: list(range(2, 21, 2)))
    p_ref: int = 24
    solver: str = "allatonce"
    stab_points: int = cqengine.DEFAULT_STAB_POINTS
    samples: int = 1024
    oversample: int = 1
    reference: str = "self"
    radau_match_p: int | None = None

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ValueError(f"unknown config keys: {unknown}")
        cfg = cls(**data)
        cfg.validate()
        return cfg

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))

    def to_dict(self):
        return asdict(self)

    def validate(self):
        make_window(self.window, self.gamma)
        if self.solver not in ("allatonce", "marching"):
            raise ValueError(f"unknown solver {self.solver!r}")
        if self.reference not in ("self", "exact"):
            raise ValueError(f"unknown reference {self.reference!r}")
        if self.reference == "self" and any(p >= self.p_ref for p in self.p_list):
            raise ValueError("reference degree must exceed every tested degree")
        if self.T <= 0 or self.N < 1 or self.samples < 1 or self.oversample < 1:
            raise ValueError("T, N, samples and oversample must be positive")

    def problem(self, p, solver=None, stab_points=None):
        return BenchmarkProblem(
            make_window(self.window, self.gamma),
            TimeGrid.from_final_time(self.T, self.N, p),
            solver=solver or self.solver,
            stab_points=self.stab_points if stab_points is None else stab_points,
            oversample=self.oversample,
        )


@dataclass(frozen=True)
class ConvergenceRecord:
    p: int
    h: float
    N: int
    T: float
    solver: str
    rel_error: float
    seconds: float
    p_ref: int
    message: str = ""


RECORD_COLUMNS = ["p", "h", "N", "T", "solver", "rel_error", "seconds", "p_ref"]


def _solver_label(cfg):
    return f"marching({cfg.stab_points})" if cfg.solver == "marching" else cfg.solver


def _run_entry(cfg, p, ref):
    start = time.perf_counter()
    prob = cfg.problem(p)
    try:
        lam = solve_sphere_dirichlet(prob)
        err = relative_error(lam, ref, cfg.samples)
        msg = ""
    except Exception as exc:  # a failed entry must not abort the sweep
        LOGGER.warning("p=%d failed: %s", p, exc)
        err, msg = math.nan, f"{type(exc).__name__}: {exc}"
    return ConvergenceRecord(p, prob.grid.h, cfg.N, cfg.T, _solver_label(cfg), err,
                             time.perf_counter() - start, cfg.p_ref, msg)


def _reference(cfg):
    if cfg.reference == "exact":
        prob = cfg.problem(0)
        t = sample_times(cfg.T, cfg.samples)
        vals = sphere_exact(prob, t=t)
        table = dict(zip(t.tolist(), vals))
        return lambda tt: np.array([table[x] for x in np.atleast_1d(tt).tolist()])
    return solve_sphere_dirichlet(cfg.problem(cfg.p_ref))


def radau_sphere_error(cfg, N_radau, ref):
    """Relative error of the RadauIIa solution at its stage times."""
    grid = TimeGrid.from_final_time(cfg.T, N_radau, 2)
    prob = BenchmarkProblem(make_window(cfg.window, cfg.gamma), grid)
    rhs = dgref.radau_cq_apply(sphere_minus_half_plus_K(), prob.data, grid,
                               oversample=cfg.oversample)
    lam = dgref.radau_cq_solve(sphere_sV(), rhs, grid, oversample=cfg.oversample)
    t = dgref.radau_stage_times(grid).ravel()
    vals = np.asarray(ref(t))
    return float(np.max(np.abs(lam.ravel() - vals)) / np.max(np.abs(vals)))


def convergence_study(config, jobs=1):
    """Run the sweep described by ``config`` (a `StudyConfig` or dict).

    Returns a list of `ConvergenceRecord`; failed entries carry ``NaN``.
    """
    cfg = config if isinstance(config, StudyConfig) else StudyConfig.from_dict(config)
    ref = _reference(cfg)
    if jobs > 1 and cfg.reference == "self":
        with ProcessPoolExecutor(jobs) as pool:
            records = list(pool.map(_run_entry, [cfg] * len(cfg.p_list), cfg.p_list,
                                    [ref] * len(cfg.p_list)))
    else:
        records = [_run_entry(cfg, p, ref) for p in cfg.p_list]
    if cfg.radau_match_p is not None:
        n_radau = int(round(cfg.N * (cfg.radau_match_p + 1) / 3))
        start = time.perf_counter()
        try:
            err, msg = radau_sphere_error(cfg, n_radau, ref), ""
        except Exception as exc:
            err, msg = math.nan, f"{type(exc).__name__}: {exc}"
        records.append(ConvergenceRecord(2, cfg.T / n_radau, n_radau, cfg.T, "radau3", err,
                                         time.perf_counter() - start, cfg.p_ref, msg))
    return records


def records_csv(records, timing=True):
    """CSV with header ``p,h,N,T,solver,rel_error,seconds,p_ref``."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(RECORD_COLUMNS)
    for r in records:
        writer.writerow([r.p, repr(float(r.h)), r.N, repr(float(r.T)), r.solver,
                         repr(float(r.rel_error)), repr(float(r.seconds)) if timing else "",
                         r.p_ref])
    return buf.getvalue()


@dataclass(frozen=True)
class LinearFit:
    slope: float
    intercept: float
    r_squared: float


def _fit(x, y):
    x, y = np.asarray(x, float), np.asarray(y, float)
    ok = np.isfinite(x) & np.isfinite(y)
    res = stats.linregress(x[ok], y[ok])
    return LinearFit(res.slope, res.intercept, res.rvalue ** 2)


def fit_root_exponential(records):
    """Least squares fit of ``log(err)`` against ``sqrt(p)``."""
    recs = [r for r in records if r.solver != "radau3" and r.rel_error > 0]
    return _fit(np.sqrt([r.p for r in recs]), np.log([r.rel_error for r in recs]))


def fit_algebraic(records):
    """Least squares fit of ``log(err)`` against ``log(p)``."""
    recs = [r for r in records if r.solver != "radau3" and r.rel_error > 0]
    return _fit(np.log([r.p for r in recs]), np.log([r.rel_error for r in recs]))


def causality_defect(lam, t_lag=T_LAG):
    """Largest coefficient on elements ending at or before ``t_lag``, relative to the maximum."""
    n = int(math.floor(t_lag / lam.grid.h + 1e-12))
    scale = np.max(np.abs(lam.coeffs))
    return float(np.max(np.abs(lam.coeffs[:n]), initial=0.0) / scale) if scale else 0.0

