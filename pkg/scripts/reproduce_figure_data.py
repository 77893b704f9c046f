#!/usr/bin/env python3
"""Run the shipped sweep specs and emit the plot-ready series files.

Each sweep lands in out/<spec-name>/ with points.csv, points.json, and the
four fig_*.csv series. Pass --out to change the destination root.
"""

import argparse
import sys
from pathlib import Path

from p2m.cli import main as p2m_main

REPO = Path(__file__).resolve().parents[1]
SPECS = ("paper_fig3b", "paper_fig3c", "paper_fig4", "paper_fig5", "paper_fig6")


def run(out_root: Path) -> int:
    for name in SPECS:
        spec = REPO / "configs" / f"{name}.json"
        dest = out_root / name
        print(f"== {name} -> {dest}")
        code = p2m_main(["sweep", "--spec", str(spec), "--out", str(dest), "--jobs", "4"])
        if code != 0:
            return code
    return 0


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default=str(REPO / "out"), help="output root directory")
    args = parser.parse_args()
    sys.exit(run(Path(args.out)))
