"""Command-line entry point.

    plot_figs --csv results.csv --figure {snr|convergence|runtime|pilots} --out fig.png
"""

from __future__ import annotations

import argparse
import sys

from .render import FIGURE_IDS, PlotJob, SchemaError, render


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="plot_figs", description=__doc__)
    parser.add_argument("--csv", required=True, help="harness results CSV")
    parser.add_argument("--figure", required=True, choices=FIGURE_IDS)
    parser.add_argument("--out", required=True, help="output image path (PNG)")
    scale = parser.add_mutually_exclusive_group()
    scale.add_argument("--log-y", dest="log_y", action="store_true", default=None)
    scale.add_argument("--linear-y", dest="log_y", action="store_false")
    args = parser.parse_args(argv)
    try:
        render(PlotJob(csv_path=args.csv, figure_id=args.figure,
                       output_path=args.out, log_y=args.log_y))
    except (SchemaError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
