"""Command-line entry point: `plotkit curve ...` and `plotkit table ...`."""

import argparse
import sys
from typing import Optional, Sequence

from .curves import CurvePlotSpec, plot_curve
from .errors import InputError
from .tables import render_table


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="plotkit", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("curve", help="render an effect-curve figure from a curve CSV")
    p.add_argument("--csv", required=True, help="curve CSV (v,estimate,ci_lo,ci_hi)")
    p.add_argument("--out", required=True, help="output image (.png or .svg)")
    p.add_argument("--oracle", default=None, help="truth-curve JSON to overlay")
    p.add_argument("--label", default="resistance", help="x-axis label")

    p = sub.add_parser("table", help="typeset a Monte Carlo report CSV as markdown")
    p.add_argument("--csv", required=True, help="harness report CSV")
    p.add_argument("--out", required=True, help="output markdown file")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "curve":
            spec = CurvePlotSpec(
                csv_path=args.csv,
                out_path=args.out,
                oracle_path=args.oracle,
                axis_label=args.label,
            )
            plot_curve(spec)
        else:
            render_table(args.csv, args.out)
    except InputError as exc:
        print(f"plotkit: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
