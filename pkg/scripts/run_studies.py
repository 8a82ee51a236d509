"""Run every bundled study config through the CLI.

Usage: python3 scripts/run_studies.py [OUT_DIR] [--jobs N]

Each config lands in OUT_DIR/<config-stem>/ as study.csv and summary.json.
"""
import argparse
import sys
from pathlib import Path

from mrkit.cli import cli_main

ROOT = Path(__file__).resolve().parents[1]
COMMANDS = {
    "linear_mri3": "converge",
    "brusselator_imexmri4": "converge",
    "stiff_efficiency": "efficiency",
    "tolerance_sweep": "tolerance-sweep",
    "precond_study": "precond-study",
    "per_step_counts": "efficiency",
}


def main(argv=None):
    p = argparse.ArgumentParser()
    p.add_argument("out", nargs="?", type=Path, default=ROOT / "results")
    p.add_argument("--jobs", type=int, default=1)
    args = p.parse_args(argv)
    status = 0
    for stem, command in COMMANDS.items():
        print(f"== {stem} ({command})", flush=True)
        code = cli_main([command, "--config", str(ROOT / "configs" / f"{stem}.cfg"),
                         "--out", str(args.out / stem), "--jobs", str(args.jobs)])
        status = max(status, code)
    return status


if __name__ == "__main__":
    sys.exit(main())
