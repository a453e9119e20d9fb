"""Command line: figplots render --fig <id> --in <csv> --out <img>."""

import argparse
import sys

from .render import FIGURE_IDS, FigureSpec, SchemaError, render


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="figplots",
        description="Render reproduction figures from harness CSV files.")
    sub = parser.add_subparsers(dest="command")
    r = sub.add_parser("render", help="render one figure")
    r.add_argument("--fig", required=True, choices=FIGURE_IDS,
                   help="figure id (matches the experiment name)")
    r.add_argument("--in", dest="csv_path", required=True,
                   help="input CSV from the experiment harness")
    r.add_argument("--out", required=True,
                   help="output image; format from the file extension")
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 2
    try:
        path = render(FigureSpec(args.fig, args.csv_path, args.out))
    except (SchemaError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"runtime error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
