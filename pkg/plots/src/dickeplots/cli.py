"""plot: render a figure from exported CSV tables.

    plot <kind> --in <csv...> --out <img>

kinds: husimi | nonmark | spectrum | deltan | semiclassical
Exit codes: 0 success, 2 bad usage / missing input / schema mismatch.
"""

import argparse
import sys

from .figures import KINDS, FigureSpec, SchemaError, render


def build_parser():
    parser = argparse.ArgumentParser(
        prog="plot",
        description="Render a figure from simulation CSV exports.")
    parser.add_argument("kind", choices=KINDS)
    parser.add_argument("--in", dest="inputs", nargs="+", required=True,
                        metavar="CSV", help="input CSV files, one panel each")
    parser.add_argument("--out", required=True, metavar="IMG",
                        help="output image (.png/.pdf/.svg)")
    parser.add_argument("--q-cap", type=float, default=0.3,
                        help="husimi color cap: Q >= cap shares one dark "
                             "color (default 0.3)")
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 2
    for path in args.inputs:
        try:
            with open(path, "rb"):
                pass
        except OSError as exc:
            print(f"error: cannot read input: {exc}", file=sys.stderr)
            return 2
    try:
        spec = FigureSpec(kind=args.kind, inputs=tuple(args.inputs),
                          output=args.out, q_cap=args.q_cap)
        written = render(spec)
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(written)
    return 0


if __name__ == "__main__":
    sys.exit(main())
