"""Command line front end: ``python -m pcq <subcommand>``.

Every subcommand writes CSV data (to ``--out`` or stdout) and a JSON
summary (to ``--out`` with suffix ``.json``, or stderr). Config files are
JSON documents; unknown keys are rejected. The exit status is nonzero if
any run failed.
"""
import argparse
import json
import logging
import math
import sys
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import cqengine, cqsymbol, dgref, scatterbench
from .symbols import REGISTRY, get_symbol, sym_resolvent
from .timebasis import TimeGrid

LOGGER = logging.getLogger("pcq")
DEFAULT_SEED = 20240917


class ConfigError(ValueError):
    pass


class _Config:
    """Strict JSON parsing for dataclass configs."""

    @classmethod
    def from_dict(cls, data):
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {unknown}")
        return cls(**data)

    def to_dict(self):
        return asdict(self)


@dataclass
class SpectrumConfig(_Config):
    p_list: list = field(default_factory=lambda: [0, 2, 4, 8, 16, 24])
    T: float = 8.0
    N: int = 15
    r: float | None = None
    radau: bool = False
    re_max: float | None = None


@dataclass
class WeightsConfig(_Config):
    symbol: str = "s_inv"
    p: int = 1
    h: float = 0.5
    N: int = 4
    r: float | None = None
    oversample: int = 1


@dataclass
class OdeConfig(_Config):
    zeta: list = field(default_factory=lambda: [-1.0, 0.0])
    forcing: dict = field(default_factory=lambda: {"kind": "sin", "freq": 1.0})
    p: int = 6
    h: float = 0.5
    N: int = 8
    via: str = "dg"


@dataclass
class SphereConfig(_Config):
    window: str = "w1"
    gamma: float = 1.0
    T: float = 4.0
    N: int = 16
    p: int = 8
    solver: str = "allatonce"
    stab_points: int = cqengine.DEFAULT_STAB_POINTS
    oversample: int = 1
    zero_data: bool = False


@dataclass
class StabilityConfig(_Config):
    A: list = field(default_factory=lambda: [[0.0, 1.0], [-1.0, 0.0]])
    forcing: list = field(default_factory=lambda: [{"kind": "sin", "freq": 1.0}, {"kind": "zero"}])
    T: float = 8.0
    h_list: list = field(default_factory=lambda: [0.5, 0.25, 0.125])
    p_list: list = field(default_factory=lambda: [1, 2, 4, 8, 16])


# ---------------------------------------------------------------- forcings

FORCING_KEYS = {
    "zero": set(), "const": {"value"}, "sin": {"freq", "amplitude"},
    "cos": {"freq", "amplitude"}, "exp": {"rate", "amplitude"}, "poly": {"coeffs"},
}


def make_forcing(desc):
    """Build a vectorized scalar function from a small JSON description.

    ``{"kind": "sin", "freq": w, "amplitude": a}`` is ``a sin(w t)``; other
    kinds are ``zero``, ``const`` (``value``), ``cos``, ``exp`` (``rate``)
    and ``poly`` (``coeffs``, lowest degree first).
    """
    desc = dict(desc)
    kind = desc.pop("kind", None)
    if kind not in FORCING_KEYS:
        raise ConfigError(f"unknown forcing kind {kind!r}; use one of {sorted(FORCING_KEYS)}")
    extra = set(desc) - FORCING_KEYS[kind]
    if extra:
        raise ConfigError(f"unknown keys for forcing {kind!r}: {sorted(extra)}")
    a = float(desc.get("amplitude", 1.0))
    if kind == "zero":
        return lambda t: np.zeros_like(np.asarray(t, dtype=float))
    if kind == "const":
        v = float(desc.get("value", 1.0))
        return lambda t: np.full_like(np.asarray(t, dtype=float), v)
    if kind == "sin":
        w = float(desc.get("freq", 1.0))
        return lambda t: a * np.sin(w * np.asarray(t, dtype=float))
    if kind == "cos":
        w = float(desc.get("freq", 1.0))
        return lambda t: a * np.cos(w * np.asarray(t, dtype=float))
    if kind == "exp":
        k = float(desc.get("rate", -1.0))
        return lambda t: a * np.exp(k * np.asarray(t, dtype=float))
    poly = np.polynomial.Polynomial(desc.get("coeffs", [0.0]))
    return lambda t: poly(np.asarray(t, dtype=float))


def make_vector_forcing(specs):
    comps = [make_forcing(s) for s in specs]
    return lambda t: np.array([c(t) for c in comps])


def _complex(value):
    if isinstance(value, (list, tuple)):
        if len(value) != 2:
            raise ConfigError("complex numbers are given as [re, im]")
        return complex(value[0], value[1])
    return complex(value)


# ---------------------------------------------------------------- output

class Output:
    """Single collector for the CSV payload and the JSON summary."""

    def __init__(self, path):
        self.path = Path(path) if path else None

    def write(self, csv_text, summary):
        text = json.dumps(summary, indent=2, sort_keys=True, default=_json_default) + "\n"
        if self.path is None:
            sys.stdout.write(csv_text)
            sys.stderr.write(text)
            return
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.path.write_text(csv_text)
        self.path.with_suffix(".json").write_text(text)


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _finite(x):
    return None if x is None or not math.isfinite(x) else x


def _load_config(args, cls):
    data = {}
    if args.config:
        try:
            data = json.loads(Path(args.config).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{args.config}: {exc}") from exc
    cfg = cls.from_dict(data)
    names = {f.name for f in fields(cls)}
    overrides = {"p": args.p, "h": args.h, "N": args.N, "T": args.T, "r": args.r,
                 "stab_points": args.stab_points, "solver": args.solver, "symbol": args.symbol}
    for key, val in overrides.items():
        if val is not None:
            if key not in names:
                raise ConfigError(f"option for {key!r} does not apply to this subcommand")
            setattr(cfg, key, val)
    return cfg


# ---------------------------------------------------------------- subcommands

def cmd_spectrum(args):
    """Eigenvalues of delta(z)/h on the sampling circle."""
    cfg = _load_config(args, SpectrumConfig)
    h = cfg.T / cfg.N
    zs = cqsymbol.sampling_points(cfg.N, cfg.r)
    r = abs(zs[0])
    rows, failures = [], []
    methods = [("dg", None)] + ([("radau3", dgref.radau_symbol)] if cfg.radau else [])
    for name, symbol in methods:
        for p in (cfg.p_list if name == "dg" else [2]):
            for z in zs:
                try:
                    d = cqsymbol.delta(p, z) if symbol is None else symbol(z)
                    lam = cqsymbol.spectrum(d).eigenvalues / h
                except cqsymbol.EigenError as exc:
                    failures.append(str(exc))
                    rows.append((name, p, z, complex(math.nan, math.nan)))
                    continue
                for mu in lam:
                    if cfg.re_max is None or mu.real < cfg.re_max:
                        rows.append((name, p, z, mu))
    if cfg.radau:
        lines = ["method,p,z_re,z_im,lam_re,lam_im"]
        lines += [",".join([m, str(p)] + [repr(float(v)) for v in (z.real, z.imag, mu.real, mu.imag)])
                  for m, p, z, mu in rows]
        text = "\n".join(lines) + "\n"
    else:
        text = cqsymbol.spectrum_csv([(p, z, mu) for _, p, z, mu in rows])
    summary = {"config": cfg.to_dict(), "h": h, "r": r, "rows": len(rows), "failures": failures}
    Output(args.out).write(text, summary)
    return 1 if failures else 0


def cmd_weights(args):
    """Convolution weights of a registered symbol."""
    cfg = _load_config(args, WeightsConfig)
    grid = TimeGrid(cfg.h, cfg.N, cfg.p)
    K = get_symbol(cfg.symbol)
    W = cqengine.compute_weights(K, grid, r=cfg.r, oversample=cfg.oversample, jobs=args.jobs)
    z_test = 0.5 * W.r
    dev = np.max(np.abs(W.series(z_test) - W.generating(z_test)))
    scale = max(np.max(np.abs(W.generating(z_test))), 1e-300)
    norms = [float(np.linalg.norm(w, 2)) for w in W.weights]
    summary = {"config": cfg.to_dict(), "r": W.r, "n_samples": W.n_samples,
               "roundtrip_z": z_test, "roundtrip_rel_error": float(dev / scale),
               "weight_norms": norms}
    Output(args.out).write(W.to_csv(), summary)
    return 0


def cmd_ode(args):
    """Scalar ODE u' = zeta u + f by DG or by CQ of the resolvent."""
    cfg = _load_config(args, OdeConfig)
    grid = TimeGrid(cfg.h, cfg.N, cfg.p)
    zeta = _complex(cfg.zeta)
    g = make_forcing(cfg.forcing)
    if cfg.via == "dg":
        y = dgref.ode_solve(zeta, g, grid)
    elif cfg.via == "cq":
        y = cqengine.apply(sym_resolvent(zeta), g, grid)
    else:
        raise ConfigError(f"unknown method {cfg.via!r}; use 'dg' or 'cq'")
    summary = {"config": cfg.to_dict(), "node_values": [[v.real, v.imag] for v in y.node_values()]}
    Output(args.out).write(y.to_csv(), summary)
    return 0


def cmd_sphere(args):
    """Density on the trapping sphere for the benchmark data."""
    cfg = _load_config(args, SphereConfig)
    prob = scatterbench.BenchmarkProblem(
        scatterbench.make_window(cfg.window, cfg.gamma),
        TimeGrid.from_final_time(cfg.T, cfg.N, cfg.p),
        solver=cfg.solver, stab_points=cfg.stab_points, oversample=cfg.oversample,
    )
    data = (lambda t: np.zeros_like(np.asarray(t, dtype=float))) if cfg.zero_data else None
    start = time.perf_counter()
    lam, info = scatterbench.solve_sphere_dirichlet(prob, data=data, full_output=True)
    seconds = time.perf_counter() - start
    check = scatterbench.sphere_discrete_closed_form(prob, data=data)
    summary = {"config": cfg.to_dict(), "seconds": seconds, "solver_info": info,
               "closed_form_rel_error": scatterbench.relative_error(lam, check),
               "max_abs": float(np.max(np.abs(lam.coeffs), initial=0.0))}
    Output(args.out).write(lam.to_csv(), summary)
    return 0


def cmd_converge(args):
    """Convergence sweep in p on the trapping sphere."""
    data = json.loads(Path(args.config).read_text()) if args.config else {}
    cfg = scatterbench.StudyConfig.from_dict(data)
    for key in ("N", "T", "stab_points", "solver"):
        val = getattr(args, key)
        if val is not None:
            setattr(cfg, key, val)
    if args.p is not None:
        cfg.p_list = [args.p]
    cfg.validate()
    records = scatterbench.convergence_study(cfg, jobs=args.jobs)
    failed = [r for r in records if not math.isfinite(r.rel_error)]
    summary = {"config": cfg.to_dict(), "failures": [r.message for r in failed]}
    ok = [r for r in records if math.isfinite(r.rel_error) and r.solver != "radau3"]
    if len(ok) >= 3:
        for name, fit in (("sqrt_p", scatterbench.fit_root_exponential(ok)),
                          ("log_p", scatterbench.fit_algebraic(ok))):
            summary[f"fit_{name}"] = {"slope": fit.slope, "intercept": fit.intercept,
                                      "r_squared": fit.r_squared}
    Output(args.out).write(scatterbench.records_csv(records, timing=not args.no_timing), summary)
    return 1 if failed else 0


def cmd_stability(args):
    """Energy ratios of DG for a skew-Hermitian system."""
    cfg = _load_config(args, StabilityConfig)
    A = np.array([[_complex(v) for v in row] for row in cfg.A])
    f = make_vector_forcing(cfg.forcing)
    results = dgref.stability_sweep(A, f, cfg.T, cfg.h_list, cfg.p_list)
    ps = np.array([r.p for r in results], dtype=float)
    pw = np.array([r.ratio_pointwise for r in results])
    growth = float(np.polyfit(np.log(ps), np.log(pw), 1)[0]) if np.all(pw > 0) and len(set(ps)) > 1 else None
    summary = {"config": cfg.to_dict(),
               "max_ratio_nodal": max(r.ratio_nodal for r in results),
               "pointwise_growth_exponent": growth}
    Output(args.out).write(dgref.stability_csv(results), summary)
    return 0


def cmd_selftest(args):
    """Randomized CQ/DG and Radau equivalence checks plus a few exact identities."""
    rng = np.random.default_rng(args.seed)
    checks = []
    for _ in range(10):
        p = int(rng.integers(0, 9))
        N = int(rng.integers(2, 33))
        h = float(rng.uniform(0.05, 0.5))
        zeta = complex(-rng.uniform(0, 3), rng.uniform(-3, 3))
        a, w = rng.uniform(-1, 1, 2)
        g = lambda t, a=a, w=w: np.cos(w * t) + a * t
        grid = TimeGrid(h, N, p)
        ref = dgref.ode_solve(zeta, g, grid)
        y = cqengine.apply(sym_resolvent(zeta), g, grid, oversample=16)
        checks.append((f"cq-dg p={p} N={N} zeta={zeta:.2f}",
                       float(np.max(np.abs(y.coeffs - ref.coeffs))), 1e-10))
    grid = TimeGrid(0.25, 16, 2)
    for label in ("s_inv", "sphereV", "sV"):
        dev = dgref.radau_equivalence_check(lambda t: np.sin(2 * t), grid, get_symbol(label), oversample=16)
        checks.append((f"radau {label}", dev, 1e-8))
    grid = TimeGrid(0.5, 6, 3)
    y = cqengine.apply(get_symbol("s_inv"), lambda t: np.ones_like(t), grid, oversample=16)
    checks.append(("integral of 1", float(np.max(np.abs(y.node_values() - grid.nodes[1:]))), 1e-12))
    failed = 0
    lines = ["check,value,tol,status"]
    for name, val, tol in checks:
        ok = val <= tol
        failed += not ok
        lines.append(f"{name},{val!r},{tol!r},{'pass' if ok else 'FAIL'}")
    Output(args.out).write("\n".join(lines) + "\n", {"seed": args.seed, "failed": failed,
                                                     "checks": len(checks)})
    return 1 if failed else 0


COMMANDS = {
    "spectrum": cmd_spectrum, "weights": cmd_weights, "ode": cmd_ode, "sphere": cmd_sphere,
    "converge": cmd_converge, "stability": cmd_stability, "selftest": cmd_selftest,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="pcq", description="p-version DG convolution quadrature")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, func in COMMANDS.items():
        sp = sub.add_parser(name, help=(func.__doc__ or name).strip().splitlines()[0])
        sp.add_argument("--config", help="JSON config file")
        sp.add_argument("--out", help="output CSV path (summary goes next to it as .json)")
        sp.add_argument("--jobs", type=int, default=1)
        sp.add_argument("--seed", type=int, default=DEFAULT_SEED)
        sp.add_argument("--symbol", choices=sorted(REGISTRY))
        sp.add_argument("--p", type=int)
        sp.add_argument("--h", type=float)
        sp.add_argument("--N", type=int)
        sp.add_argument("--T", type=float)
        sp.add_argument("--r", type=float)
        sp.add_argument("--stab-points", dest="stab_points", type=int)
        sp.add_argument("--solver", choices=["marching", "allatonce"])
        if name == "converge":
            sp.add_argument("--no-timing", action="store_true",
                            help="leave the seconds column empty (byte-identical reruns)")
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if not hasattr(args, "no_timing"):
        args.no_timing = False
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, cqsymbol.AbscissaError, ValueError, KeyError, OSError) as exc:
        print(f"pcq {args.command}: error: {exc}", file=sys.stderr)
        return 2
