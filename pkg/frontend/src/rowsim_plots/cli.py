"""Batch figure renderer.

    rowsim-plots <kind> --csv role=path [--csv role=path ...] -o out.png

Roles per kind: acmin-distribution needs ``results``; acmin-sweep needs
``summary``; sidedness-difference needs ``single`` and ``double``;
poc-bars needs ``poc``.
"""

from __future__ import annotations

import argparse
import sys
from typing import Optional

from .figures import FIGURE_KINDS, FigureSpec, PlotError, render


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rowsim-plots",
        description="Render figures from simulator CSV outputs")
    parser.add_argument("kind", choices=FIGURE_KINDS)
    parser.add_argument("--csv", action="append", default=[],
                        metavar="ROLE=PATH", help="input CSV for a role")
    parser.add_argument("-o", "--out", default="figure.png",
                        help="output image path (png or svg)")
    parser.add_argument("--title", default="")
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    inputs = {}
    for item in args.csv:
        role, sep, path = item.partition("=")
        if not sep or not role or not path:
            print(f"error: --csv expects ROLE=PATH, got {item!r}",
                  file=sys.stderr)
            return 2
        inputs[role] = path
    try:
        out = render(FigureSpec(args.kind, inputs, args.out, args.title))
    except PlotError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
