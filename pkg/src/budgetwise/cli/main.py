"""``budgetwise`` command: plan, simulate, verify, report.

Exit codes: 0 success, 1 invalid input or failed check, 2 infeasible instance
or a budget too small for any sample. Errors are a single ``error:`` line on
standard error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from ..errors import BudgetTooSmallError, BudgetwiseError, InfeasibleError
from ..model import chi2_discrepancy, mixture
from ..planner import BASELINES, plan_for_method
from ..simkit import run_experiment, write_csv
from . import config as cfg
from .report import CsvFormatError, read_curves, render_gnuplot, render_svg
from .verify import SUITES

EXIT_OK, EXIT_ERROR, EXIT_INFEASIBLE = 0, 1, 2
PLAN_METHODS = ("optimal",) + BASELINES


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _fmt_vec(values) -> str:
    return "[" + ", ".join(f"{v:.6g}" for v in values) + "]"


def plan_report(doc: dict, method: str = "optimal", target_kind: str | None = None,
                budget: float | None = None) -> dict:
    problem, _ = cfg.build_problem(doc, budget=budget, target_kind=target_kind)
    result = plan_for_method(method, problem)
    plan = result.plan
    mix = mixture(plan, problem)
    d = chi2_discrepancy(problem.target, mix)
    sigma2 = float(doc.get("sigma2", 1.0))
    expected = np.asarray(plan.counts, dtype=float) @ problem.source_matrix
    return {
        "method": method,
        "budget": problem.budget,
        "counts": list(plan.counts),
        "total_cost": result.total_cost,
        "avg_cost": result.avg_cost,
        "mixture": mix.probs.tolist(),
        "target": problem.target.probs.tolist(),
        "discrepancy": d,
        "n_eff": result.objective,
        "sigma2": sigma2,
        "leading_term": sigma2 * result.avg_cost * d / problem.budget,
        "expected_group_counts": expected.tolist(),
    }


def _print_table(rep: dict) -> None:
    rows = [
        ("method", rep["method"]),
        ("budget", f"{rep['budget']:g}"),
        ("counts", "[" + ", ".join(str(c) for c in rep["counts"]) + "]"),
        ("total cost", f"{rep['total_cost']:.6g}"),
        ("average cost", f"{rep['avg_cost']:.6g}"),
        ("mixture", _fmt_vec(rep["mixture"])),
        ("discrepancy", f"{rep['discrepancy']:.6g}"),
        ("n_eff", f"{rep['n_eff']:.6g}"),
        ("leading term", f"{rep['leading_term']:.6g} (sigma2={rep['sigma2']:g})"),
        ("expected groups", _fmt_vec(rep["expected_group_counts"])),
    ]
    width = max(len(k) for k, _ in rows)
    for k, v in rows:
        print(f"{k:<{width}}  {v}")


def cmd_plan(args) -> int:
    doc = cfg.load_config(args.config)
    rep = plan_report(doc, args.method, args.target_kind, args.budget)
    if args.json:
        print(json.dumps(rep, indent=2))
    else:
        _print_table(rep)
    return EXIT_OK


def _check_writable(path: str) -> None:
    parent = os.path.dirname(os.path.abspath(path))
    if os.path.isdir(path) or not os.path.isdir(parent) or not os.access(parent, os.W_OK):
        raise OSError(f"cannot write {path}")
    if os.path.exists(path) and not os.access(path, os.W_OK):
        raise OSError(f"cannot write {path}")


def cmd_simulate(args) -> int:
    if (args.config is None) == (args.preset is None):
        raise UsageError("give exactly one of CONFIG or --preset")
    doc = cfg.preset(args.preset) if args.preset else cfg.load_config(args.config)
    if args.workers < 1:
        raise UsageError("--workers must be at least 1")
    _check_writable(args.out)
    config, methods = cfg.build_experiment(doc, args.replications)
    curves = run_experiment(config, methods, workers=args.workers)
    write_csv(curves, config, args.out)
    missing = 0
    for curve in curves:
        done = [p for p in curve.points if p.mean_risk is not None]
        missing += len(curve.points) - len(done)
        last = f"{done[-1].mean_risk:.4g} at budget {done[-1].budget:g}" if done else "no values"
        print(f"{curve.method}: {len(done)}/{len(curve.points)} budgets, risk {last}")
    if missing:
        print(f"warning: {missing} missing cells", file=sys.stderr)
    return EXIT_OK


def cmd_verify(args) -> int:
    if args.suite not in SUITES:
        raise UsageError(f"unknown suite {args.suite!r}; choose from {', '.join(SUITES)}")
    checks = SUITES[args.suite]()
    for c in checks:
        print(f"{'PASS' if c.passed else 'FAIL'} {c.name}: {c.detail}")
    failed = sum(not c.passed for c in checks)
    print(f"{len(checks) - failed}/{len(checks)} passed")
    return EXIT_OK if failed == 0 else EXIT_ERROR


def cmd_report(args) -> int:
    series = read_curves(args.csv)
    title = args.title or os.path.splitext(os.path.basename(args.csv))[0]
    if args.script:
        svg_name = os.path.splitext(os.path.basename(args.out))[0] + ".svg"
        text = render_gnuplot(series, svg_name, title)
    else:
        text = render_svg(series, title)
    with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="budgetwise", description="Cost-aware multi-source sampling plans.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log planner and simulation warnings")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("plan", help="compute a sampling plan for a config")
    p.add_argument("config")
    p.add_argument("--method", choices=PLAN_METHODS, default="optimal")
    p.add_argument("--target-kind", choices=cfg.TARGET_KINDS)
    p.add_argument("--budget", type=float)
    fmt = p.add_mutually_exclusive_group()
    fmt.add_argument("--json", action="store_true")
    fmt.add_argument("--table", action="store_true", help="aligned text (default)")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("simulate", help="Monte-Carlo risk curves to CSV")
    p.add_argument("config", nargs="?")
    p.add_argument("--preset", help="built-in experiment, e.g. setting1-uniform-mean")
    p.add_argument("--out", required=True)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--replications", type=int)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify", help="run a property suite")
    p.add_argument("--suite", required=True)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("report", help="plot a simulation CSV")
    p.add_argument("csv")
    p.add_argument("--out", required=True)
    p.add_argument("--script", action="store_true", help="write a gnuplot script instead of SVG")
    p.add_argument("--title")
    p.set_defaults(func=cmd_report)
    return parser


def _one_line(message) -> str:
    return " ".join(str(message).split())


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("missing command; choose from plan, simulate, verify, report")
        logging.basicConfig(level=logging.WARNING if args.verbose else logging.ERROR,
                            format="warning: %(message)s")
        return args.func(args)
    except (InfeasibleError, BudgetTooSmallError) as exc:
        print(f"error: {_one_line(exc)}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (UsageError, cfg.ConfigError, CsvFormatError, BudgetwiseError, OSError, ValueError) as exc:
        print(f"error: {_one_line(exc)}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
