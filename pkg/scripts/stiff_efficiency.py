"""Matched-error cost comparison on the stiff PDE.

The single-rate pair runs at its largest stable step on a ladder; the multirate method then
takes its largest stable step whose error is within a factor of 2.  Prints both runs and the
ratio of slow-partition evaluations (implicit plus explicit).
"""
import argparse

from mrkit.harness import StudyConfig, make_problem, parse_method, run_efficiency_study


def largest(rows, keep=lambda r: True):
    ok = [r for r in rows if r.status == "finished" and keep(r)]
    return max(ok, key=lambda r: r.H) if ok else None


def main(argv=None):
    p = argparse.ArgumentParser()
    p.add_argument("--eps", type=float, default=1e-4)
    p.add_argument("--n-cells", type=int, default=64)
    p.add_argument("--tf", type=float, default=0.1)
    p.add_argument("--method", default="imex-mri4-10")
    args = p.parse_args(argv)
    pr = make_problem("brusselator", {"n_cells": args.n_cells, "eps": args.eps, "rho_D": 1e3})
    common = dict(tf=args.tf, component="u", solver_tol=1e-11, h_ref=2.5e-6)
    ark = run_efficiency_study(StudyConfig(pr, (parse_method("ark-imex"),),
                                           (1e-3, 8e-4, 6.4e-4, 5e-4, 4e-4, 3.2e-4), **common))
    mri = run_efficiency_study(StudyConfig(pr, (parse_method(args.method),),
                                           (4e-3, 3.2e-3, 2.5e-3, 2e-3, 1.6e-3, 1.25e-3, 1e-3), **common))
    for r in ark.rows + mri.rows:
        print(f"{r.method:14s} H={r.H:<9g} {r.status:9s} error={r.error:.3e} "
              f"slow_evals={r.extra.get('slow_evals', '')}")
    base = largest(ark.rows)
    if base is None:
        print("single-rate pair unstable on the whole ladder")
        return 1
    pick = largest(mri.rows, lambda r: 0.5 <= r.error / base.error <= 2.0)
    if pick is None:
        print("no multirate run within a factor of 2")
        return 1
    print(f"matched: {base.method} H={base.H:g} vs {pick.method} H={pick.H:g}; "
          f"slow-eval ratio {base.extra['slow_evals'] / pick.extra['slow_evals']:.2f}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
