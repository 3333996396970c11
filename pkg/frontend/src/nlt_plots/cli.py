"""nlt-plot: render one figure from simulator output files.

One figure per invocation; batch rendering is a shell loop. Exit codes:
0 success, 2 bad arguments, 5 schema mismatch.
"""

from __future__ import annotations

import argparse
import sys

from .render import FIGURE_KINDS, FigureSpec, SchemaVersionError, render


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="nlt-plot", description=__doc__)
    parser.add_argument("--input", required=True, help="input CSV (or norms JSON for --kind modulus)")
    parser.add_argument("--kind", required=True, choices=FIGURE_KINDS)
    parser.add_argument("--out", required=True, help="output image path (.svg for vector)")
    parser.add_argument("--fit", default=None, help="fit JSON for sweep figures")
    parser.add_argument("--title", default=None)
    parser.add_argument("--width", type=float, default=6.0)
    parser.add_argument("--height", type=float, default=4.5)
    parser.add_argument("--dpi", type=int, default=150)
    args = parser.parse_args(argv)

    spec = FigureSpec(
        kind=args.kind,
        input_path=args.input,
        output_path=args.out,
        fit_path=args.fit,
        title=args.title,
        size=(args.width, args.height),
        dpi=args.dpi,
    )
    try:
        render(spec)
    except SchemaVersionError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return 5
    except FileNotFoundError as exc:
        print(f"missing input: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
