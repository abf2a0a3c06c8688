"""Command line: render a report CSV into a PNG or SVG figure."""

from __future__ import annotations

import argparse
import sys

from .render import KINDS, PlotSpec, SchemaError, render_report


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="subemb-plots")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("render", help="render one figure from a report CSV")
    p.add_argument("--input", required=True, help="experiment report CSV")
    p.add_argument("--kind", required=True, choices=KINDS)
    p.add_argument("--out", required=True, help="output image (.png or .svg)")
    p.add_argument("--log-x", action="store_true", dest="log_x")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        spec = PlotSpec(input_csv=args.input, kind=args.kind,
                        output_image=args.out, log_x=args.log_x)
        result = render_report(spec)
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    print(f"wrote {result.output_image} ({result.curves} curves, "
          f"{result.rows} rows)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
