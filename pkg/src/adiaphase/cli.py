"""Command-line interface.

Subcommands: timings, evolve, predict, sweep, tolerance, fit.  A JSON
config (--config) populates a SweepSpec; explicit flags override it.
Exit codes: 0 success, 2 validation error, 3 numeric error, 64 unknown
subcommand.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import analysis, harness, timing
from .errors import (
    AdiaphaseError,
    CapabilityError,
    CapacityError,
    DegeneracyError,
    DomainError,
    InsufficientDataError,
    NumericError,
    UndefinedPhaseError,
    ValidationError,
)
from .propagator import evolve

_COMMANDS = ("timings", "evolve", "predict", "sweep", "tolerance", "fit")

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERIC = 3
EXIT_USAGE = 64


def _add_spec_args(parser, need_times=True):
    parser.add_argument("--config", help="JSON file with SweepSpec fields")
    parser.add_argument("--model", help="search:n=<int> or a tabulated JSON path")
    parser.add_argument("--schedule", help="linear | local:N=<int> | beta:m=<int>")
    parser.add_argument("--m", type=int, help="boundary-cancellation order")
    parser.add_argument("--nu", type=int, help="target excited track")
    parser.add_argument("--grid-k", type=int, dest="grid_k", help="trajectory grid intervals")
    parser.add_argument("--tol", type=float, help="integrator amplitude tolerance")
    parser.add_argument("--seed", type=int, help="seed for perturbation directions")
    parser.add_argument("--jobs", type=int, help="parallel evolutions (default: cores)")
    parser.add_argument("--full-model", action="store_true", default=None,
                        help="use the full 2^n-dimensional search model")
    parser.add_argument("--output", help="CSV output path")
    if need_times:
        parser.add_argument("--n", dest="n_range",
                            help="n range as lo..hi (resonance indices)")
        parser.add_argument("--parity", choices=("even", "odd", "both"))
        parser.add_argument("--n-step", type=int, dest="n_step")
        parser.add_argument("--times", dest="T_list",
                            help="comma-separated explicit T values")


def _parse_range(text):
    lo, hi = text.split("..")
    return (int(lo), int(hi))


def _spec_from_args(args) -> harness.SweepSpec:
    data = {}
    if args.config:
        with open(args.config, "r", encoding="utf-8") as fh:
            data.update(json.load(fh))
    overrides = {
        "model": args.model,
        "schedule": args.schedule,
        "m": args.m,
        "nu": args.nu,
        "grid_k": args.grid_k,
        "tol": args.tol,
        "seed": args.seed,
        "jobs": args.jobs,
        "full_model": args.full_model,
        "output": args.output,
    }
    if hasattr(args, "n_range") and args.n_range:
        overrides["n_range"] = _parse_range(args.n_range)
    if hasattr(args, "parity") and args.parity:
        overrides["parity"] = args.parity
    if hasattr(args, "n_step") and args.n_step:
        overrides["n_step"] = args.n_step
    if hasattr(args, "T_list") and args.T_list:
        overrides["T_list"] = [float(x) for x in args.T_list.split(",")]
    data.update({k: v for k, v in overrides.items() if v is not None})
    return harness.SweepSpec.from_dict(data)


def _cmd_timings(args) -> int:
    spec = _spec_from_args(args)
    ctx = harness.prepare_sweep(spec)
    if ctx.table is None:
        raise ValidationError("timings needs an n range (--n lo..hi)")
    print("nu,n,parity,T,theta,gap_integral,delta_S")
    for row in ctx.table.rows:
        print(f"{ctx.table.nu},{row.n},{row.parity},{row.T:.12g},"
              f"{ctx.theta:.12g},{ctx.gap:.12g},{ctx.delta_s:.12g}")
    return EXIT_OK


def _cmd_evolve(args) -> int:
    spec = _spec_from_args(args)
    if not spec.T_list:
        raise ValidationError("evolve needs --times")
    ctx = harness.prepare_sweep(spec)
    print("T,err_norm,amp_abs,steps,est_error")
    for t in spec.T_list:
        res = evolve(ctx.model, float(t), tol=spec.tol, traj=ctx.traj)
        amps = analysis.transition_amplitudes(res, ctx.traj)
        amp = abs(amps.get(ctx.nu, 0.0))
        print(f"{t:.12g},{res.error_norm:.12g},{amp:.12g},{res.steps},"
              f"{res.est_error:.3g}")
    return EXIT_OK


def _cmd_predict(args) -> int:
    spec = _spec_from_args(args)
    ctx = harness.prepare_sweep(spec)
    if ctx.table is None:
        raise ValidationError("predict needs an n range (--n lo..hi)")
    print("nu,n,parity,T,amp_pred,interference_factor")
    for row in ctx.table.rows:
        pred = analysis.predict_amplitude_general(
            ctx.model, ctx.traj, ctx.nu, row.T, spec.m, ctx.theta, ctx.gap,
            n=row.n,
        )
        print(f"{ctx.nu},{row.n},{row.parity},{row.T:.12g},"
              f"{pred.amplitude:.12g},{pred.interference_factor:.12g}")
    return EXIT_OK


def _cmd_sweep(args) -> int:
    spec = _spec_from_args(args)
    result = harness.run_sweep(spec)
    for key, value in sorted(result.summary.items()):
        print(f"{key}: {value}")
    if result.path:
        print(f"wrote {result.path}")
    return EXIT_OK


def _cmd_tolerance(args) -> int:
    spec = _spec_from_args(args)
    perturbation = analysis.PerturbationSpec(
        kind=args.defect, alpha=args.alpha, amplitude=args.scale,
        p=args.p, seed=spec.seed,
    )
    out = harness.run_tolerance(spec, perturbation)
    for key, value in sorted(out["meta"].items()):
        print(f"{key}: {value}")
    if spec.output:
        print(f"wrote {spec.output}")
    return EXIT_OK


def _cmd_fit(args) -> int:
    rows = harness.read_sweep_csv(args.input)
    if args.parity != "both":
        rows = [r for r in rows if r["parity"] == args.parity]
    if args.m is not None:
        rows = [r for r in rows if r["m"] == args.m]
    window = None
    if args.window:
        lo, hi = args.window.split("..")
        window = (float(lo), float(hi))
    fit = analysis.fit_power_law([(r["T"], r["amp_abs"]) for r in rows], window)
    print(f"exponent={fit.exponent:.6f} intercept={fit.intercept:.6f} "
          f"residual_rms={fit.residual_rms:.3e} points={fit.n_points}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="adiaphase",
        description="Phase-interference timing and error-scaling analysis "
                    "for adiabatic state transfer",
    )
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("timings", help="print the resonance-time table as CSV")
    _add_spec_args(p)

    p = sub.add_parser("evolve", help="propagate at explicit times")
    _add_spec_args(p)

    p = sub.add_parser("predict", help="closed-form amplitude predictions")
    _add_spec_args(p)

    p = sub.add_parser("sweep", help="full sweep: evolve + fit + CSV")
    _add_spec_args(p)

    p = sub.add_parser("tolerance", help="sweep with an injected defect")
    _add_spec_args(p)
    p.add_argument("--defect", required=True,
                   choices=("symmetry", "gap", "timing", "derivative"))
    p.add_argument("--alpha", type=float, required=True,
                   help="defect scale decays as T^(-alpha)")
    p.add_argument("--scale", type=float, required=True,
                   help="defect amplitude prefactor")
    p.add_argument("--p", type=int, default=1,
                   help="derivative order for derivative defects")

    p = sub.add_parser("fit", help="fit a power law to a sweep CSV")
    p.add_argument("--input", required=True)
    p.add_argument("--parity", choices=("even", "odd", "both"), default="both")
    p.add_argument("--m", type=int)
    p.add_argument("--window", help="T window as lo..hi")

    return parser


_HANDLERS = {
    "timings": _cmd_timings,
    "evolve": _cmd_evolve,
    "predict": _cmd_predict,
    "sweep": _cmd_sweep,
    "tolerance": _cmd_tolerance,
    "fit": _cmd_fit,
}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if not argv or argv[0] in ("-h", "--help"):
        build_parser().print_help()
        return EXIT_OK
    if argv[0] not in _COMMANDS:
        build_parser().print_usage(sys.stderr)
        print(f"unknown subcommand: {argv[0]}", file=sys.stderr)
        return EXIT_USAGE
    args = build_parser().parse_args(argv)
    try:
        return _HANDLERS[args.command](args)
    except (ValidationError, DomainError, CapacityError, CapabilityError,
            InsufficientDataError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (NumericError, DegeneracyError, UndefinedPhaseError) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except AdiaphaseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
