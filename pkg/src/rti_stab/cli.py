"""Command-line interface: ``rti-stab check|design|simulate|paper-suite``."""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__, report, suite
from .errors import (PIPViolationError, RTIError, SimulationError, TuningError,
                     UnsupportedRelativeDegreeError)
from .plant import analyze, check_pip, coprime_factorize
from .realize import DesignConfig, closed_loop, design_from_factorization, step_response

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_REFUSED = 2
EXIT_TUNING = 3

SEED_ENV = "RTI_STAB_SEED"


def _err(msg: str) -> None:
    print(f"rti-stab: error: {msg}", file=sys.stderr)


def _seed(value: int | None) -> int:
    if value is not None:
        return value
    env = os.environ.get(SEED_ENV)
    if env is None or not env.strip():
        return 0
    try:
        return int(env)
    except ValueError:
        raise report.SpecError(f"{SEED_ENV}: expected an integer, got {env!r}") from None


def _load_plant(path: str) -> report.PlantSpec:
    try:
        return report.read_plant_spec(path)
    except OSError as exc:
        raise report.SpecError(f"{path}: {exc.strerror}") from exc


def _witness_text(rep) -> str:
    lo, hi = rep.witness
    count = next(c for c in rep.pole_counts_between if c % 2)
    return f"zeros {lo:g} and {hi:g} enclose {count} real positive pole(s)"


# commands

def cmd_check(args) -> int:
    try:
        spec = _load_plant(args.plant)
        rep = check_pip(analyze(spec.plant))
    except (report.SpecError, ValueError, RTIError) as exc:
        _err(str(exc))
        return EXIT_ERROR
    if rep.satisfied:
        print("PIP satisfied")
        return EXIT_OK
    print(f"PIP violated: {_witness_text(rep)}")
    return EXIT_REFUSED


def cmd_design(args) -> int:
    try:
        seed = _seed(args.seed)
        spec = _load_plant(args.plant)
    except (report.SpecError, ValueError) as exc:
        _err(str(exc))
        return EXIT_ERROR
    P = spec.plant
    if P.relative_degree > 2:
        _err(f"unsupported relative degree {P.relative_degree}; at most 2 is handled")
        return EXIT_ERROR
    try:
        cf = coprime_factorize(P, padding=args.padding, force=args.force)
    except PIPViolationError as exc:
        _err(f"{exc} (use --force to bypass the check)")
        print(f"PIP violated: {_witness_text(exc.report)}")
        return EXIT_REFUSED
    except (RTIError, ValueError) as exc:
        _err(str(exc))
        return EXIT_ERROR

    cfg = DesignConfig(cancel_tol=args.cancel_tol, force=args.force, M=args.M,
                       initial_a=tuple(args.initial_a) if args.initial_a else None)
    cfg = replace(cfg, tune=replace(cfg.tune, rng_seed=seed, restarts=args.max_restarts))
    try:
        res = design_from_factorization(cf, cfg)
    except TuningError as exc:
        _write(args.output, report.failure_report(cf, exc, seed, spec.label, __version__))
        _err(f"tuning failed: {exc}")
        return EXIT_TUNING
    except UnsupportedRelativeDegreeError as exc:
        _err(str(exc))
        return EXIT_ERROR
    except (RTIError, ValueError) as exc:
        _write(args.output, report.failure_report(cf, exc, seed, spec.label, __version__))
        _err(str(exc))
        return EXIT_TUNING

    rep = report.design_report(res, seed, spec.label, __version__)
    _write(args.output, rep)
    v = res.verification
    m = [int(f.m) for f in res.u_product.factors]
    to_stdout = args.output is None or args.output == "-"
    print(f"m = {m}  sigma = {v.sigma:.6g}  nu = {v.nu}  passed = {v.passed}",
          file=sys.stderr if to_stdout else sys.stdout)
    return EXIT_OK if v.passed else EXIT_TUNING


def _write(output: str | None, rep: dict) -> None:
    if output is None or output == "-":
        sys.stdout.write(report.dumps(rep))
    else:
        report.write_json(output, rep)


def cmd_simulate(args) -> int:
    try:
        rep = report.read_report(args.report)
        if not report.report_passed(rep):
            _err("report is not verified (passed != true); refusing to simulate")
            return EXIT_REFUSED
        P = report.report_plant(rep)
        C = report.report_controller(rep)
    except OSError as exc:
        _err(f"{args.report}: {exc.strerror}")
        return EXIT_ERROR
    except (report.SpecError, ValueError) as exc:
        _err(str(exc))
        return EXIT_ERROR
    try:
        series = step_response(closed_loop(P, C, args.map), t_final=args.t_final, dt=args.dt)
    except SimulationError as exc:
        _err(str(exc))
        return EXIT_ERROR
    text = report.step_csv(series.t, series.y)
    if args.output is None or args.output == "-":
        sys.stdout.write(text)
        out = sys.stderr
    else:
        report.write_atomic(args.output, text)
        out = sys.stdout
    v = rep["verification"]
    sigma = v["sigma"] if v["sigma"] is not None else float("-inf")
    print(f"settled = {series.settled}  final = {series.final_value:.12g}  "
          f"sigma = {sigma:.6g}  nu = {v['nu']}", file=out)
    return EXIT_OK


def cmd_paper_suite(args) -> int:
    try:
        keys = suite.parse_selection(args.examples)
        seed = _seed(args.seed)
    except (ValueError, report.SpecError) as exc:
        _err(str(exc))
        return EXIT_ERROR
    checks = suite.run_suite(keys, search=not args.fixed_only, seed=seed,
                             restarts=args.max_restarts,
                             on_check=lambda c: print(suite.format_check(c), flush=True))
    fixed_fail = [c for c in checks if c.mode == "fixed" and not c.passed]
    search_fail = [c for c in checks if c.mode == "search" and not c.passed]
    total = sum(c.seconds for c in checks)
    print(f"{len(checks)} checks, {len(fixed_fail)} fixed-mode failures, "
          f"{len(search_fail)} search-mode failures, {total:.1f}s")
    if args.output:
        out = Path(args.output)
        rows = [{"example": c.example, "mode": c.mode, "check": c.name, "passed": c.passed,
                 "detail": c.detail, "seconds": round(c.seconds, 3)} for c in checks]
        report.write_json(out / "summary.json", {"tool_version": __version__, "rng_seed": seed,
                                                 "checks": rows})
    return EXIT_ERROR if fixed_fail else EXIT_OK


# argument parsing

def _complex_list(text: str) -> list[complex]:
    try:
        return [complex(part.replace(" ", "")) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated complex numbers, got {text!r}")


class _Parser(argparse.ArgumentParser):
    # usage errors share exit code 1 with malformed input; 2 means "refused"
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="rti-stab",
                                description="Design stable controllers that stabilize SISO plants.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log tuning progress")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("check", help="test the parity interlacing property")
    c.add_argument("plant", help="plant spec (JSON)")
    c.set_defaults(func=cmd_check)

    d = sub.add_parser("design", help="design and verify a stable stabilizing controller")
    d.add_argument("plant", help="plant spec (JSON)")
    d.add_argument("--seed", type=int, default=None,
                   help=f"restart seed (default: ${SEED_ENV} or 0)")
    d.add_argument("--initial-a", type=float, nargs="+", metavar="A",
                   help="initial factor parameters, two per factor")
    d.add_argument("--cancel-tol", type=float, default=DesignConfig.cancel_tol,
                   help="tolerance for the mandatory RHP cancellations")
    d.add_argument("--max-restarts", type=int, default=8, help="tuning starts before giving up")
    d.add_argument("--force", action="store_true", help="skip the PIP gate (not verification)")
    d.add_argument("--padding", type=_complex_list, metavar="ROOTS",
                   help="comma-separated LHP roots for the denominator of D, "
                        "e.g. --padding=-0.5+2.6j,-0.5-2.6j")
    d.add_argument("--M", type=float, default=None,
                   help="premultiplier pole for relative degree 2 (default: automatic)")
    d.add_argument("-o", "--output", help="report path (default: stdout)")
    d.set_defaults(func=cmd_design)

    s = sub.add_parser("simulate", help="closed-loop step response of a verified report")
    s.add_argument("report", help="design report (JSON)")
    s.add_argument("--t-final", type=float, default=None, help="horizon in seconds")
    s.add_argument("--dt", type=float, default=None, help="RK4 step in seconds")
    s.add_argument("--map", choices=("disturbance", "tracking"), default="disturbance",
                   help="P/(1+PC) or PC/(1+PC)")
    s.add_argument("-o", "--output", help="CSV path (default: stdout)")
    s.set_defaults(func=cmd_simulate)

    ps = sub.add_parser("paper-suite", help="regressions over the built-in examples")
    ps.add_argument("--examples", default="all",
                    help="'all', keys such as 5,9,A, or ranges such as 5..13")
    ps.add_argument("--seed", type=int, default=None)
    ps.add_argument("--max-restarts", type=int, default=8)
    ps.add_argument("--fixed-only", action="store_true", help="skip the search-mode runs")
    ps.add_argument("-o", "--output", help="directory for summary.json")
    ps.set_defaults(func=cmd_paper_suite)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    if getattr(args, "max_restarts", 1) < 1:
        _err("--max-restarts must be at least 1")
        return EXIT_ERROR
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
