"""Command-line driver for the study harness.

Exit status: 0 success, 1 study failure, 2 configuration or usage error.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import harness
from .harness import ConfigError


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(2)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="mrkit", description="Multirate integrator studies.")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    for name, text in (("converge", "convergence study"),
                       ("efficiency", "error against cost"),
                       ("tolerance-sweep", "solver tolerance selection"),
                       ("precond-study", "preconditioner iteration scaling"),
                       ("reference", "compute and store the reference solution")):
        sp = sub.add_parser(name, help=text)
        sp.add_argument("--config", required=True, type=Path)
        sp.add_argument("--out", type=Path, default=Path("."))
        sp.add_argument("--methods", default=None, help="comma-separated method selectors")
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--jobs", type=int, default=None)
    sub.add_parser("list-methods", help="print the method selectors")
    return p


RUNNERS = {
    "converge": harness.run_convergence_study,
    "efficiency": harness.run_efficiency_study,
    "tolerance-sweep": harness.run_tolerance_sweep,
    "precond-study": harness.run_preconditioner_study,
}


def _summary_line(report) -> str:
    n_div = sum(r.status != "finished" for r in report.rows)
    slopes = ", ".join(f"{m}: {s:.3f}" for m, s in report.slopes.items())
    return f"{report.kind}: {len(report.rows)} runs, {n_div} diverged" + (f"; slopes {slopes}" if slopes else "")


def cli_main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 2
    if args.command == "list-methods":
        for line in harness.list_methods():
            print(line)
        return 0
    try:
        cfg = harness.load_config(args.config, {"methods": args.methods, "seed": args.seed,
                                                "jobs": args.jobs})
        args.out.mkdir(parents=True, exist_ok=True)
    except (ConfigError, OSError) as err:
        print(f"configuration error: {err}", file=sys.stderr)
        return 2
    np.random.seed(cfg.seed)
    try:
        if args.command == "reference":
            ref = cfg.problem.exact(cfg.t0, cfg.tf, cfg.auto_h_ref(), cfg.reference)
            np.savetxt(args.out / "reference.csv", np.asarray(ref)[:, None], fmt="%.17g")
            print(f"reference: {ref.size} values, h_ref {cfg.auto_h_ref():.6g}")
            return 0
        report = RUNNERS[args.command](cfg)
    except ConfigError as err:
        print(f"configuration error: {err}", file=sys.stderr)
        return 2
    except Exception as err:  # study failure
        print(f"study failed: {type(err).__name__}: {err}", file=sys.stderr)
        return 1
    report.write_csv(args.out / "study.csv")
    report.write_json(args.out / "summary.json")
    print(_summary_line(report))
    return 0


def main() -> None:
    raise SystemExit(cli_main())


if __name__ == "__main__":
    main()
