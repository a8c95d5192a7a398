"""Command-line front end.

Exit codes: 0 success, 1 a verification suite failed, 2 usage or domain error.
Every output file starts with a header that records the package version, the
seed and the fully resolved flags (thread count excluded, since results do
not depend on it).
"""

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .core_math import alpha_star, alpha_star_prime, big_v, v_star
from .errors import InsufficientTailSamples, ReflocalError, VarianceError
from .experiments import (
    ExperimentReport,
    ergodic_limits,
    fmt,
    laplace_consistency,
    ldp_tail_decay,
    log_mgf_limit,
    rate_curve_export,
)
from .mgf import MgfQuery, f_hat, hitting_laplace, ode_residual
from .params import ReflectionParams
from .simulator import FUNCTIONAL_NAMES, SCHEMES, SimConfig, make_functional, mc_functional, simulate_path

SUITES = ("laplace", "logmgf", "ldp", "ergodic")
_GRID_FLAGS = {"--alpha-grid", "--x-grid", "--lambda-grid", "--t-list", "--alpha-list"}
_UNECHOED = {"threads", "config", "func"}

# Per-suite defaults; explicit flags override them.
SUITE_DEFAULTS = {
    "laplace": {"b": 1.0, "x": 0.0, "alpha": -1.0, "lam": 0.5, "dt": 1e-3, "paths": 20000},
    "logmgf": {"b": 1.0, "x": 0.0, "alpha": 0.5, "t_list": [5.0, 10.0, 15.0, 20.0], "dt": 1e-3, "paths": 20000},
    "ldp": {"b": 1.0, "x": 0.5, "threshold": 0.8, "t_list": [10.0, 20.0, 30.0, 40.0, 50.0], "dt": 1e-2,
            "paths": 100000},
    "ergodic": {"b": 1.0, "x": 0.5, "t": 500.0, "dt": 1e-3, "paths": 4000},
}


class UsageError(Exception):
    pass


def parse_grid(text: str) -> list[float]:
    """``lo:hi:count``, inclusive at both ends."""
    try:
        lo, hi, n = text.split(":")
        lo, hi, n = float(lo), float(hi), int(n)
    except ValueError:
        raise argparse.ArgumentTypeError(f"grid must be lo:hi:count, got {text!r}") from None
    if n < 1:
        raise argparse.ArgumentTypeError("grid count must be >= 1")
    if n == 1:
        return [lo]
    return [float(v) for v in np.linspace(lo, hi, n)]


def parse_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _seed(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _common(p, *names):
    helps = {
        "b": ("--b", float, "barrier width b [length]"),
        "x": ("--x", float, "start point x in [0, b] [length]"),
        "alpha": ("--alpha", float, "tilt alpha on the local time [1/length]"),
        "lam": ("--lambda", float, "resolvent parameter lambda [1/time]"),
        "t": ("--t", float, "time horizon t [time]"),
        "dt": ("--dt", float, "simulation step dt [time]"),
        "paths": ("--paths", int, "number of Monte-Carlo paths [count]"),
        "seed": ("--seed", _seed, "unsigned 64-bit master seed [-]"),
    }
    for n in names:
        flag, typ, h = helps[n]
        p.add_argument(flag, dest=n, type=typ, default=None, help=h)
    if "dt" in names:
        p.add_argument("--scheme", choices=sorted(SCHEMES), default=None,
                       help="reflection scheme: bridge (exact barrier pushes, default) or clamp [-]")
        p.add_argument("--threads", type=int, default=None, help="worker threads for path simulation [count]")
    p.add_argument("--config", default=None, help="file of key=value lines; explicit flags win [path]")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="reflocal", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"reflocal {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("rate", help="tabulate V, V' and V*, V*', lambda* on grids")
    _common(p, "b")
    p.add_argument("--alpha-grid", type=parse_grid, default=None, help="alpha grid lo:hi:count [1/length]")
    p.add_argument("--x-grid", type=parse_grid, default=None, help="x grid lo:hi:count for V* [length/time]")
    p.add_argument("--out", default="rate.csv", help="output CSV [path]")
    p.set_defaults(func=cmd_rate)

    p = sub.add_parser("mgf", help="evaluate f_hat on an x grid, optionally with ODE residuals")
    _common(p, "b", "alpha", "lam")
    p.add_argument("--x-grid", type=parse_grid, default=None, help="x grid lo:hi:count, default 0:b:11 [length]")
    p.add_argument("--residual-n", type=int, default=None,
                   help="also report ODE residuals on n, 2n, 4n, 8n intervals [count]")
    p.add_argument("--out", default="mgf.csv", help="output CSV [path]")
    p.set_defaults(func=cmd_mgf)

    p = sub.add_parser("simulate", help="simulate paths; dump them or summarize functionals")
    _common(p, "b", "x", "alpha", "t", "dt", "paths", "seed")
    p.add_argument("--functional", choices=FUNCTIONAL_NAMES + ("all",), default="all",
                   help="functional to estimate at time t [-]")
    p.add_argument("--dump-paths", type=int, default=0, help="write this many full t,X,L,U CSVs [count]")
    p.add_argument("--out", default="simulate.json", help="summary JSON, or stem for path CSVs [path]")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify", help="run verification suites against the closed forms")
    _common(p, "b", "x", "alpha", "lam", "t", "dt", "paths", "seed")
    p.add_argument("--suite", choices=SUITES + ("all",), default="all", help="suite to run [-]")
    p.add_argument("--t-list", type=parse_list, default=None, help="comma-separated horizons [time]")
    p.add_argument("--t-max", type=float, default=None, help="Laplace truncation horizon, default 40/lambda [time]")
    p.add_argument("--threshold", type=float, default=None, help="LDP threshold on L_t/t [length/time]")
    p.add_argument("--out", default="verify_summary.json", help="summary JSON; reports go beside it [path]")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("export", help="write alpha*, V and V* curves as plot data")
    _common(p, "b")
    p.add_argument("--lambda-grid", type=parse_grid, default=None, help="lambda grid for alpha* [1/time]")
    p.add_argument("--alpha-grid", type=parse_grid, default=None, help="alpha grid for V [1/length]")
    p.add_argument("--x-grid", type=parse_grid, default=None, help="x grid for V* [length/time]")
    p.add_argument("--out", default="curves", help="output directory [path]")
    p.set_defaults(func=cmd_export)
    return parser


# ---------------------------------------------------------------------------
# helpers


def _resolved(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in _UNECHOED}


def _header_lines(args) -> str:
    flags = json.dumps(_resolved(args), sort_keys=True, separators=(",", ":"))
    return (
        f"# reflocal {__version__}\n"
        f"# command: {args.command}\n"
        f"# seed: {getattr(args, 'seed', None)}\n"
        f"# flags: {flags}\n"
    )


def _header_obj(args) -> dict:
    return {"version": __version__, "command": args.command, "seed": getattr(args, "seed", None),
            "flags": _resolved(args)}


def _write(path, text: str) -> None:
    path = Path(path)
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _dump_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def _need(args, *names):
    missing = [n for n in names if getattr(args, n) is None]
    if missing:
        raise UsageError("missing required flag(s): " + ", ".join("--" + ("lambda" if n == "lam" else n) for n in missing))


def _fill(args, defaults: dict) -> None:
    for k, v in defaults.items():
        if getattr(args, k, None) is None:
            setattr(args, k, v)


# ---------------------------------------------------------------------------
# subcommands


def cmd_rate(args) -> int:
    _fill(args, {"b": 1.0})
    if args.alpha_grid is None and args.x_grid is None:
        raise UsageError("give --alpha-grid and/or --x-grid")
    params = ReflectionParams(args.b)
    table = rate_curve_export(params, args.alpha_grid or [], args.x_grid or [])
    _write(args.out, _header_lines(args) + table.to_csv())
    return 0


def cmd_mgf(args) -> int:
    _fill(args, {"b": 1.0})
    _need(args, "alpha", "lam")
    params = ReflectionParams(args.b)
    q = MgfQuery(params, args.lam, args.alpha)
    xs = args.x_grid if args.x_grid is not None else [float(v) for v in np.linspace(0.0, args.b, 11)]
    lines = ["x,f_hat,lambda_f_hat,hitting_laplace,stable_form_used"]
    for x in xs:
        v = f_hat(q, x)
        hl = hitting_laplace(params, args.lam, x) if args.lam > 0 else None
        lines.append(",".join(fmt(c) for c in (x, v.value, args.lam * v.value, hl, v.stable_form_used)))
    _write(args.out, _header_lines(args) + "\n".join(lines) + "\n")
    if args.residual_n is not None:
        rlines = ["grid_n,interior,lower_bc,upper_bc"]
        for k in range(4):
            r = ode_residual(q, args.residual_n * 2**k)
            rlines.append(",".join(fmt(c) for c in (r.grid_n, r.interior, r.lower_bc, r.upper_bc)))
        out = Path(args.out)
        _write(out.with_name(out.stem + "_residuals.csv"), _header_lines(args) + "\n".join(rlines) + "\n")
    return 0


def _sim_config(args) -> SimConfig:
    params = ReflectionParams(args.b, args.x)
    return SimConfig(params, args.t, args.dt, args.paths, args.seed, scheme=args.scheme)


def cmd_simulate(args) -> int:
    _fill(args, {"b": 1.0, "t": 1.0, "dt": 1e-3, "paths": 1000, "seed": 0, "scheme": "bridge"})
    _fill(args, {"x": args.b / 2})
    cfg = _sim_config(args)
    if args.dump_paths:
        if not 0 < args.dump_paths <= cfg.n_paths:
            raise UsageError("--dump-paths must lie in [1, --paths]")
        out = Path(args.out)
        stem = out.with_suffix("") if out.suffix else out
        for i in range(args.dump_paths):
            path = simulate_path(cfg, i)
            text = "".join(
                ",".join(f"{v:.17g}" for v in row) + "\n"
                for row in zip(path.times, path.X, path.L, path.U)
            )
            _write(f"{stem}_path{i}.csv", _header_lines(args) + "t,X,L,U\n" + text)
        return 0
    names = FUNCTIONAL_NAMES if args.functional == "all" else (args.functional,)
    if "exp_tilt_L" in names and args.alpha is None:
        if args.functional == "exp_tilt_L":
            raise UsageError("exp_tilt_L needs --alpha")
        names = tuple(n for n in names if n != "exp_tilt_L")
    results = {}
    for n in names:
        est = mc_functional(cfg, make_functional(n, args.t, args.alpha))
        results[n] = est.to_dict()
    _write(args.out, _dump_json({"header": _header_obj(args), "results": results}))
    return 0


def _suite_args(name: str, args) -> argparse.Namespace:
    a = argparse.Namespace(**vars(args))
    a.suite = name
    _fill(a, SUITE_DEFAULTS[name])
    _fill(a, {"seed": 0, "scheme": "bridge"})
    if name == "laplace" and a.t_max is None:
        a.t_max = 40.0 / a.lam
    return a


def _run_suite(name: str, a) -> ExperimentReport:
    if name == "laplace":
        params = ReflectionParams(a.b, a.x)
        sim = SimConfig(params, a.t_max, a.dt, a.paths, a.seed, scheme=a.scheme)
        return laplace_consistency(params, a.alpha, a.lam, sim, a.t_max)
    if name == "logmgf":
        params = ReflectionParams(a.b, a.x)
        sim = SimConfig(params, max(a.t_list), a.dt, a.paths, a.seed, scheme=a.scheme)
        return log_mgf_limit(params, a.alpha, a.t_list, sim)
    if name == "ldp":
        params = ReflectionParams(a.b, a.x)
        sim = SimConfig(params, max(a.t_list), a.dt, a.paths, a.seed, scheme=a.scheme)
        return ldp_tail_decay(params, a.threshold, a.t_list, sim)
    params = ReflectionParams(a.b, a.x)
    sim = SimConfig(params, a.t, a.dt, a.paths, a.seed, scheme=a.scheme)
    return ergodic_limits(params, a.t, sim)


def cmd_verify(args) -> int:
    suites = SUITES if args.suite == "all" else (args.suite,)
    out = Path(args.out)
    out_dir = out.parent
    summary = {"header": _header_obj(args), "suites": {}}
    ok = True
    for name in suites:
        resolved = _suite_args(name, args)
        try:
            report = _run_suite(name, resolved)
        except (VarianceError, InsufficientTailSamples) as exc:
            # the estimator itself declared the run unusable: a failed suite, not a usage error
            summary["suites"][name] = {"overall_pass": False, "error": f"{type(exc).__name__}: {exc}"}
            print(f"FAIL {name}: {type(exc).__name__}: {exc}")
            ok = False
            continue
        jpath, cpath = report.write(out_dir, resolved.seed, header=_header_lines(resolved),
                                    header_obj=_header_obj(resolved))
        summary["suites"][name] = {"report": report.name, "overall_pass": report.overall_pass,
                                   "json": jpath.name, "csv": cpath.name}
        status = "PASS" if report.overall_pass else "FAIL"
        print(f"{status} {name}: {cpath}")
        ok &= report.overall_pass
    summary["overall_pass"] = ok
    _write(out, _dump_json(summary))
    return 0 if ok else 1


def cmd_export(args) -> int:
    _fill(args, {"b": 1.0})
    b = args.b
    params = ReflectionParams(b)
    floor = params.lambda_floor
    lams = args.lambda_grid or [float(v) for v in np.linspace(0.99 * floor, 4.0 / b**2, 201)]
    alphas = args.alpha_grid or [float(v) for v in np.linspace(-10.0 / b, 10.0 / b, 201)]
    xs = args.x_grid or [float(v) for v in np.linspace(0.0, 4.0 / b, 201)]
    out = Path(args.out)
    head = _header_lines(args)
    rows = ["lambda,alpha_star,alpha_star_prime"]
    rows += [",".join(fmt(c) for c in (l, alpha_star(l, params), alpha_star_prime(l, params))) for l in lams]
    _write(out / "alpha_star.csv", head + "\n".join(rows) + "\n")
    rows = ["alpha,V,V_prime"]
    for a in alphas:
        r = big_v(a, params)
        rows.append(",".join(fmt(c) for c in (a, r.value, r.derivative)))
    _write(out / "V.csv", head + "\n".join(rows) + "\n")
    rows = ["x,V_star,V_star_prime,lambda_star"]
    for x in xs:
        r = v_star(x, params)
        rows.append(",".join(fmt(c) for c in (x, r.value, r.derivative, r.lambda_star)))
    _write(out / "V_star.csv", head + "\n".join(rows) + "\n")
    return 0


# ---------------------------------------------------------------------------


def _normalize_argv(argv: list[str]) -> list[str]:
    """Glue ``--grid-flag -5:5:11`` into ``--grid-flag=-5:5:11`` so negative grids parse."""
    out = []
    i = 0
    while i < len(argv):
        tok = argv[i]
        if tok in _GRID_FLAGS and i + 1 < len(argv) and argv[i + 1].startswith("-"):
            out.append(f"{tok}={argv[i + 1]}")
            i += 2
            continue
        out.append(tok)
        i += 1
    return out


def _config_argv(path: str) -> list[str]:
    extra = []
    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"config line is not key=value: {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        extra.append(f"--{key.replace('_', '-')}={value}")
    return extra


def main(argv=None) -> int:
    argv = _normalize_argv(list(sys.argv[1:] if argv is None else argv))
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.config:
            # config values go first so explicit flags, parsed later, win
            cmd_pos = argv.index(args.command)
            argv = argv[: cmd_pos + 1] + _normalize_argv(_config_argv(args.config)) + argv[cmd_pos + 1 :]
            args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"reflocal: error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"reflocal: error: {exc}", file=sys.stderr)
        return 2
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    if getattr(args, "threads", None) is not None:
        import numba

        numba.set_num_threads(max(1, min(args.threads, numba.config.NUMBA_NUM_THREADS)))
    try:
        return args.func(args)
    except (UsageError, ReflocalError, ValueError) as exc:
        print(f"reflocal: error: {exc}", file=sys.stderr)
        return 2
    except OverflowError as exc:
        print(f"reflocal: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
