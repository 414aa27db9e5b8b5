"""render_plots: turn sweep CSVs into log-log figures."""

from __future__ import annotations

import argparse
import sys

from .render import PlotSpec, SchemaError, render


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="render_plots",
        description="Render adiaphase sweep CSVs as log-log figures",
    )
    parser.add_argument("--input", action="append", required=True,
                        help="sweep CSV path (repeatable)")
    parser.add_argument("--out", required=True, help="output image (png/svg/pdf)")
    parser.add_argument("--parity", choices=("even", "odd", "both"),
                        default="both")
    parser.add_argument("--m", type=int, action="append",
                        help="restrict to this m (repeatable)")
    parser.add_argument("--xlim", help="x range as lo:hi")
    parser.add_argument("--ylim", help="y range as lo:hi")
    parser.add_argument("--title")
    parser.add_argument("--no-bound", action="store_true",
                        help="omit the 1/T criterion line")
    return parser


def _parse_range(text):
    lo, hi = text.split(":")
    return (float(lo), float(hi))


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    spec = PlotSpec(
        inputs=args.input,
        output=args.out,
        parity=args.parity,
        m_filter=args.m,
        x_range=_parse_range(args.xlim) if args.xlim else None,
        y_range=_parse_range(args.ylim) if args.ylim else None,
        title=args.title,
        show_bound=not args.no_bound,
    )
    try:
        summary = render(spec)
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {summary.output}: {summary.panels} panel(s), "
          f"{summary.points} points")
    return 0


if __name__ == "__main__":
    sys.exit(main())
