"""Command-line front end.

Thin client over the core package: each subcommand parses flags (optionally
seeded from a flat key=value config file, flags winning), resolves every
default into a RunManifest, executes the run in-process and emits stdout,
CSV and/or vector plots.  Exit codes: 0 success, 1 validation failure,
2 usage error.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import __version__
from .closed_form import (
    classical_variance,
    decoherence_variance,
    exact_variance,
    free_particle_variance,
)
from .experiments import (
    Dataset,
    KurtosisRunConfig,
    SweepConfig,
    figure1_config,
    figure2_config,
    run_kurtosis,
    run_sweep,
    run_table1,
)
from .model import ModelError, OscillatorParams, QuadraticState
from .output import RunManifest, emit_csv, emit_plot, format_float
from .stochastic import EnsembleSpec, simulate

_FIG3_DEFAULTS = {"m": 20.0, "gamma": 1e-3, "omega": 0.018, "kbt": 0.38}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        # uniform usage-error exit code with the offending flag in the text
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(2)


def _add_param_flags(p, defaults=None):
    d = defaults or {}
    p.add_argument("--m", type=float, default=d.get("m"), help="mass / inertia (> 0)")
    p.add_argument("--gamma", type=float, default=d.get("gamma"), help="damping rate (>= 0)")
    p.add_argument("--omega", type=float, default=d.get("omega"), help="frequency (>= 0)")
    p.add_argument("--kbt", type=float, default=d.get("kbt"), help="thermal energy (>= 0)")
    p.add_argument("--hbar", type=float, default=1.0, help="hbar (> 0, default 1)")


def _add_init_flags(p, varx=0.0, varp=0.0):
    p.add_argument("--init-varx", type=float, default=varx, help="initial var x (>= 0)")
    p.add_argument("--init-varp", type=float, default=varp, help="initial var p (>= 0)")
    p.add_argument("--init-sigma", type=float, default=0.0,
                   help="initial symmetrized covariance")


def _read_config_file(path) -> dict:
    values = {}
    with open(path, encoding="utf-8") as fh:
        for ln, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ModelError(f"{path}:{ln}: expected key=value, got {raw.rstrip()!r}")
            key, _, value = line.partition("=")
            values[key.strip().replace("-", "_")] = value.strip()
    return values


def _apply_config_file(parser, argv):
    """Pre-parse --config and inject file values as defaults (flags win)."""
    probe = argparse.ArgumentParser(add_help=False)
    probe.add_argument("--config")
    known, _ = probe.parse_known_args(argv)
    if not known.config:
        return
    try:
        file_values = _read_config_file(known.config)
    except (OSError, ModelError) as exc:
        print(f"qbo: error: cannot read config file: {exc}", file=sys.stderr)
        raise SystemExit(2)
    for sub in parser._subparsers._group_actions[0].choices.values():
        usable = {}
        for action in sub._actions:
            key = action.dest.replace("-", "_")
            if key not in file_values:
                continue
            raw = file_values[key]
            if isinstance(action, argparse._StoreTrueAction):
                usable[key] = raw.strip().lower() in ("1", "true", "yes", "on")
            else:
                usable[key] = action.type(raw) if action.type else raw
            action.required = False  # satisfied from the file
        sub.set_defaults(**usable)


def _params_from_args(args, require_omega_zero=False) -> OscillatorParams:
    names = ("m", "gamma", "kbt") if require_omega_zero else ("m", "gamma", "omega", "kbt")
    missing = [n for n in names if getattr(args, n) is None]
    if missing:
        raise ModelError(f"missing required flag(s): {', '.join('--' + n for n in missing)}")
    return OscillatorParams(m=args.m, gamma=args.gamma,
                            omega=0.0 if require_omega_zero else args.omega,
                            kbt=args.kbt, hbar=args.hbar)


def _init_from_args(args) -> QuadraticState:
    return QuadraticState(var_x=args.init_varx, var_p=args.init_varp,
                          sigma=args.init_sigma)


def build_parser() -> _Parser:
    parser = _Parser(prog="qbo", description=__doc__)
    parser.add_argument("--version", action="version", version=f"qbo {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("variance", help="one-shot closed-form variance evaluation")
    p.add_argument("--config", help="flat key=value file; flags win on conflict")
    p.add_argument("--model", choices=("exact", "classical", "decoherence", "free"),
                   required=True)
    _add_param_flags(p)
    _add_init_flags(p)
    p.add_argument("--t", type=float, help="single evaluation time (>= 0)")
    p.add_argument("--t-grid", nargs=3, type=float, metavar=("START", "STOP", "COUNT"),
                   help="linear time grid")
    p.add_argument("--out", help="write CSV here")
    p.add_argument("--plot", help="write a vector plot here")

    p = sub.add_parser("kurtosis", help="kurtosis trajectory run (reference-style)")
    p.add_argument("--config")
    p.add_argument("--model", choices=("free", "harmonic"), default="harmonic")
    p.add_argument("--method", choices=("rk", "semianalytic"), default="rk")
    _add_param_flags(p, _FIG3_DEFAULTS)
    _add_init_flags(p, varx=0.5, varp=0.5)
    for name in ("x4", "x3p", "x2p2", "xp3", "p4"):
        p.add_argument(f"--init-{name}", type=float, default=None,
                       help=f"initial {name} (default: calibrated reference value)")
    p.add_argument("--t-end", type=float, default=200.0)
    p.add_argument("--points", type=int, default=801)
    p.add_argument("--out", help="write CSV here")
    p.add_argument("--plot", help="write a vector plot here")

    p = sub.add_parser("sweep", help="variance parameter sweep (figures 1 and 2)")
    p.add_argument("--config")
    p.add_argument("--figure", type=int, choices=(1, 2))
    p.add_argument("--panel", choices=("left", "middle", "right"))
    p.add_argument("--points", type=int, default=200)
    p.add_argument("--swept", help="custom sweep: parameter name")
    p.add_argument("--lo", type=float, help="custom sweep: lower bound (> 0)")
    p.add_argument("--hi", type=float, help="custom sweep: upper bound")
    p.add_argument("--t", type=float, help="custom sweep: evaluation time")
    p.add_argument("--fixed", help="custom sweep: comma list k=v of fixed params")
    p.add_argument("--curves", default="exact,classical",
                   help="comma list from exact,classical,decoherence")
    _add_init_flags(p, varx=1e-7, varp=1e7)
    p.add_argument("--out", help="write CSV here")
    p.add_argument("--plot", help="write a vector plot here")

    p = sub.add_parser("table1", help="kurtosis table at t = 40, 60, 80, 100 min")
    p.add_argument("--config")
    p.add_argument("--method", choices=("rk", "semianalytic"), default="rk")
    p.add_argument("--out", help="write CSV here")

    p = sub.add_parser("montecarlo", help="classical Langevin ensemble")
    p.add_argument("--config")
    _add_param_flags(p)
    _add_init_flags(p)
    p.add_argument("--n-traj", type=int, default=10_000)
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--t-end", type=float, default=10.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sample-times", default=None,
                   help="comma list of sample times (default: t-end)")
    p.add_argument("--allow-large-dt", action="store_true",
                   help="override the dt stability bound (warns)")
    p.add_argument("--out", help="write CSV here")

    p = sub.add_parser("validate", help="run the cross-method oracle suite")
    p.add_argument("--full-grid", action="store_true",
                   help="use the full closed-form/ODE comparison grid")

    p = sub.add_parser("serve", help="start the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)

    return parser


def _manifest(args, command: str, skip=("config", "out", "plot", "command")) -> RunManifest:
    config = {
        k: v for k, v in sorted(vars(args).items())
        if k not in skip and v is not None
    }
    seeds = (args.seed,) if hasattr(args, "seed") else ()
    return RunManifest(command=command, config=config, seeds=seeds)


_VARIANCE_FUNCS = {
    "exact": lambda p, init, t: exact_variance(p, init, t),
    "classical": lambda p, init, t: classical_variance(p, t),
    "decoherence": lambda p, init, t: decoherence_variance(p, init, t),
    "free": lambda p, init, t: free_particle_variance(p, init, t),
}


def _cmd_variance(args) -> int:
    if (args.t is None) == (args.t_grid is None):
        raise ModelError("exactly one of --t or --t-grid is required")
    params = _params_from_args(args, require_omega_zero=(args.model == "free"))
    init = _init_from_args(args)
    if args.t is not None:
        times = np.array([args.t])
    else:
        start, stop, count = args.t_grid
        if count < 1 or int(count) != count or stop < start:
            raise ModelError("--t-grid needs START <= STOP and an integer COUNT >= 1")
        times = np.linspace(start, stop, int(count))
    fn = _VARIANCE_FUNCS[args.model]
    values = [fn(params, init, float(t)) for t in times]
    dataset = Dataset(
        columns=("t", "var_x"),
        rows=np.column_stack([times, values]),
        meta={"model": args.model, **params.as_dict()},
    )
    if args.t is not None:
        print(format_float(values[0]))
    else:
        for t, v in zip(times, values):
            print(f"{format_float(t)},{format_float(v)}")
    if args.out:
        emit_csv(dataset, args.out, _manifest(args, "variance"))
    if args.plot:
        emit_plot(dataset, args.plot, axes="linear")
    return 0


def _cmd_kurtosis(args) -> int:
    from .experiments import FIG3_INIT_FOURTH
    from .model import FourthMomentVector

    params = OscillatorParams(m=args.m, gamma=args.gamma, omega=args.omega,
                              kbt=args.kbt, hbar=args.hbar)
    # reference-style run: flags override the calibrated initialization
    vals = {
        name: getattr(args, f"init_{name}")
        if getattr(args, f"init_{name}") is not None
        else getattr(FIG3_INIT_FOURTH, name)
        for name in ("x4", "x3p", "x2p2", "xp3", "p4")
    }
    config = KurtosisRunConfig(
        params=params,
        model=args.model,
        init=_init_from_args(args),
        fourth=FourthMomentVector(**vals),
        t_end=args.t_end,
        n_points=args.points,
        method=args.method,
    )
    series = run_kurtosis(config)
    f = config.initial_fourth()
    dataset = Dataset(
        columns=("t", "kappa", "var_x"),
        rows=np.column_stack([series.times, series.kurtosis, series.var_x()]),
        meta={
            "kind": "kurtosis", "model": args.model, "method": args.method,
            **params.as_dict(),
            **{f"init_{k}": getattr(f, k) for k in ("x4", "x3p", "x2p2", "xp3", "p4")},
        },
    )
    for t, k in zip(series.times, series.kurtosis):
        print(f"{format_float(t)},{format_float(k)}")
    if args.out:
        emit_csv(dataset, args.out, _manifest(args, "kurtosis"))
    if args.plot:
        emit_plot(dataset, args.plot, axes="linear")
    return 0


def _cmd_sweep(args) -> int:
    if args.figure is not None:
        if not args.panel:
            raise ModelError("--figure requires --panel left|middle|right")
        cfg = (figure1_config if args.figure == 1 else figure2_config)(
            args.panel, n_points=args.points
        )
    else:
        needed = [n for n in ("swept", "lo", "hi", "t", "fixed") if getattr(args, n) is None]
        if needed:
            raise ModelError(
                "custom sweep needs --swept --lo --hi --t --fixed "
                f"(missing {', '.join('--' + n for n in needed)})"
            )
        fixed = {}
        for item in args.fixed.split(","):
            key, _, value = item.partition("=")
            if not value:
                raise ModelError(f"--fixed entries must be k=v, got {item!r}")
            fixed[key.strip()] = float(value)
        cfg = SweepConfig(
            panel="custom", fixed=fixed, swept=args.swept, lo=args.lo, hi=args.hi,
            t=args.t, curves=tuple(args.curves.split(",")), n_points=args.points,
            init=_init_from_args(args),
        )
    dataset = run_sweep(cfg)
    if args.out:
        emit_csv(dataset, args.out, _manifest(args, "sweep"))
    else:
        print(",".join(dataset.columns))
        for row in dataset.rows:
            print(",".join(format_float(v) for v in row))
    if args.plot:
        emit_plot(dataset, args.plot, axes="loglog")
    return 0


def _cmd_table1(args) -> int:
    dataset = run_table1(method=args.method)
    print(",".join(dataset.columns))
    for row in dataset.rows:
        print(",".join(format_float(v) for v in row))
    if args.out:
        emit_csv(dataset, args.out, _manifest(args, "table1"))
    return 0


def _cmd_montecarlo(args) -> int:
    params = _params_from_args(args)
    sample_times = (
        [float(v) for v in args.sample_times.split(",")]
        if args.sample_times else [args.t_end]
    )
    spec = EnsembleSpec(
        n_traj=args.n_traj, dt=args.dt, t_end=args.t_end, seed=args.seed,
        init=_init_from_args(args), allow_large_dt=args.allow_large_dt,
    )
    res = simulate(params, spec, sample_times)
    columns = ("t", "mean_x", "mean_p", "var_x", "var_p", "sigma", "x4",
               "se_mean_x", "se_mean_p", "se_var_x", "se_var_p", "se_sigma", "se_x4")
    rows = np.column_stack([getattr(res, c) if c != "t" else res.times for c in columns])
    dataset = Dataset(columns=columns, rows=rows,
                      meta={"n_traj": res.n_traj, "dt": spec.dt, "seed": spec.seed,
                            **params.as_dict()})
    print(",".join(columns))
    for row in rows:
        print(",".join(format_float(v) for v in row))
    if args.out:
        emit_csv(dataset, args.out, _manifest(args, "montecarlo"))
    return 0


def _cmd_validate(args) -> int:
    from .validation import run_checks

    results = run_checks()
    failed = 0
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        print(f"{status} {r.name} ({r.seconds:.2f}s) - {r.detail}")
        failed += 0 if r.passed else 1
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return 1 if failed else 0


def _cmd_serve(args) -> int:
    try:
        import uvicorn
    except ImportError:
        print("qbo: error: serving requires uvicorn (pip install qbo[serve])",
              file=sys.stderr)
        return 1
    from .service import create_app

    uvicorn.run(create_app(), host=args.host, port=args.port)
    return 0


_COMMANDS = {
    "variance": _cmd_variance,
    "kurtosis": _cmd_kurtosis,
    "sweep": _cmd_sweep,
    "table1": _cmd_table1,
    "montecarlo": _cmd_montecarlo,
    "validate": _cmd_validate,
    "serve": _cmd_serve,
}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    _apply_config_file(parser, argv)
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ModelError as exc:
        print(f"qbo {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except RuntimeError as exc:
        # numerical failures (stiffness, quadrature budget, overflow guard)
        print(f"qbo {args.command}: failed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
