"""``qmarket`` command line.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 tolerance failure. Failures print one JSON object on stderr.
"""

from __future__ import annotations

import argparse
import json
import sys

from qmarket import runner
from qmarket.config import load_config, load_sweep
from qmarket.errors import ConfigError, GridError, NumericalError
from qmarket.reservoir_generated import Model3Params, critical_gamma1

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_TOLERANCE = 0, 2, 3, 4


def _emit_error(kind: str, message: str, code: int, **extra) -> int:
    sys.stdout.flush()
    print(json.dumps({"error": kind, "message": message, "exit_code": code, **extra}), file=sys.stderr)
    return code


def _cmd_simulate(args):
    for path in runner.run_simulate(load_config(args.config)):
        print(path)
    return EXIT_OK


def _cmd_sweep(args):
    cfg = load_config(args.config)
    sweep = load_sweep(args.sweep)
    print(runner.run_sweep(cfg, sweep, out_path=args.output))
    return EXIT_OK


def _cmd_oracle(args):
    cfg = load_config(args.config)
    report, path = runner.run_oracle_check(cfg)
    for e in report["entries"]:
        status = "PASS" if e["pass"] else "FAIL"
        if "max_discrepancy" in e:
            detail = f"max_discrepancy={e['max_discrepancy']:.3e} tol={e['tolerance']:g}"
        else:
            detail = (f"oracle={e['oracle']:.6g} closed_form={e['closed_form']:.6g} "
                      f"rel_err={e['relative_error']:.3e} tol={e['tolerance']:g} "
                      f"leakage={e['boundary_leakage']:.3e}")
            if e["boundary_leakage"] > runner.LEAKAGE_LIMIT:
                print(f"warning: {e['trader']}: boundary reservoir modes carry "
                      f"{e['boundary_leakage']:.2%} of the response; widen the k window", file=sys.stderr)
            if e["t"] >= e["recurrence_time"]:
                print(f"warning: {e['trader']}: check time {e['t']:.4g} exceeds the reservoir "
                      f"recurrence time {e['recurrence_time']:.4g}; refine the k grid", file=sys.stderr)
        print(f"{status} {e['trader']} {e['quantity']} {detail}")
    print(path)
    if not report["pass"]:
        return _emit_error("ToleranceFailure", "oracle comparison exceeded tolerance", EXIT_TOLERANCE,
                           report=str(path))
    return EXIT_OK


def _cmd_figures(args):
    for path in runner.run_figures(args.out):
        print(path)
    return EXIT_OK


def _cmd_critical(args):
    try:
        base = Model3Params(args.omega_s, args.omega_c, args.omega2, args.omega_r,
                            args.lambda_inf, args.gamma2)
        res = critical_gamma1(args.omega1, args.omega2, args.gamma2, base, loi=args.loi, upper=args.upper)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    print(json.dumps({"gamma1": res.gamma1, "residual": res.residual, "reason": res.reason}))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qmarket", description="Operator models of a two-trader market.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="write per-trader time series")
    p.add_argument("config")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("sweep", help="evaluate an objective over a parameter grid")
    p.add_argument("config")
    p.add_argument("--sweep", required=True, help="sweep specification (JSON)")
    p.add_argument("--output", default=None, help="table path (default: <output.dir>/<prefix>sweep.csv)")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("oracle-check", help="compare closed forms with brute-force oracles")
    p.add_argument("config")
    p.set_defaults(func=_cmd_oracle)

    p = sub.add_parser("figures", help="write the reference figure series")
    p.add_argument("--out", default="figures", help="output directory (default: figures)")
    p.set_defaults(func=_cmd_figures)

    p = sub.add_parser("critical", help="trader-1 coupling at which both traders gain equally")
    p.add_argument("--omega1", type=float, required=True, help="LoI frequency of trader 1")
    p.add_argument("--omega2", type=float, required=True, help="LoI frequency of trader 2")
    p.add_argument("--gamma2", type=float, required=True, help="reservoir coupling of trader 2")
    p.add_argument("--omega-s", type=float, default=1.0)
    p.add_argument("--omega-c", type=float, default=2.0)
    p.add_argument("--omega-r", type=float, default=1.0, help="reservoir dispersion slope")
    p.add_argument("--lambda-inf", type=float, default=0.1)
    p.add_argument("--loi", type=float, default=1.0)
    p.add_argument("--upper", type=float, default=None, help="upper end of the bisection bracket")
    p.set_defaults(func=_cmd_critical)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        return _emit_error("ConfigError", str(exc), EXIT_CONFIG)
    except (NumericalError, GridError, ValueError, ArithmeticError, FloatingPointError) as exc:
        return _emit_error(type(exc).__name__, str(exc), EXIT_NUMERICAL)


if __name__ == "__main__":
    sys.exit(main())
