"""Command line for figure rendering: gmshadow-render --run DIR --kind KIND --out FILE."""

from __future__ import annotations

import argparse
import sys

from gmshadow_figures.render import (FIGURE_KINDS, FigureSpec, SchemaError,
                                     UsageError, render)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="gmshadow-render",
        description="Render a figure from a gmshadow run directory.")
    parser.add_argument("--run", required=True, help="run directory")
    parser.add_argument("--kind", required=True,
                        help=f"one of {', '.join(FIGURE_KINDS)}")
    parser.add_argument("--out", required=True, help="output image path")
    parser.add_argument("--format", default=None, choices=("svg", "png"),
                        help="defaults to the --out extension")
    args = parser.parse_args(argv)
    fmt = args.format or (args.out.rsplit(".", 1)[-1].lower()
                          if "." in args.out else "svg")
    try:
        spec = FigureSpec(run_dir=args.run, kind=args.kind,
                          out_path=args.out, fmt=fmt)
        path = render(spec)
    except UsageError as err:
        print(f"usage error: {err}", file=sys.stderr)
        return 2
    except SchemaError as err:
        print(f"schema error: {err}", file=sys.stderr)
        return 3
    print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
