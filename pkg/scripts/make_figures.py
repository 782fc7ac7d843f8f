"""Write every figure table (and optional SVG plots) into one directory.

    python3 scripts/make_figures.py [out_dir] [--plot]
"""
from __future__ import annotations

import sys

from optomech.cli import main
from optomech.figures import FIGURES


def run(argv: list[str]) -> int:
    plot = "--plot" in argv
    args = [a for a in argv if a != "--plot"]
    out = args[0] if args else "figures"
    for n in sorted(FIGURES):
        code = main(["figure", str(n), "--out", out] + (["--plot"] if plot else []))
        if code:
            return code
        print(f"figure {n} -> {out}")
    return 0


if __name__ == "__main__":
    sys.exit(run(sys.argv[1:]))
