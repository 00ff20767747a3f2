"""Command-line wrapper: render-figure --family F --in CSV... --out IMG."""

from __future__ import annotations

import argparse
import sys

from .render import FAMILIES, FigureError, FigureSpec, render


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="render-figure",
        description="Render a gnnlab experiment CSV into a figure",
    )
    parser.add_argument("--family", required=True, choices=FAMILIES)
    parser.add_argument("--in", dest="inputs", required=True, nargs="+",
                        help="input CSV file(s)")
    parser.add_argument("--out", required=True, help="output image (.png or .svg)")
    parser.add_argument("--bounds", default=None,
                        help="bounds CSV for corridor overlays (distortion family)")
    parser.add_argument("--metric", default="init_oversmoothing_rate",
                        help="x-axis column for time-vs-metric")
    parser.add_argument("--value", default="test_acc_at_selection",
                        help="y-axis column for ablation")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        spec = FigureSpec(
            family=args.family,
            inputs=tuple(args.inputs),
            output=args.out,
            bounds=args.bounds,
            metric=args.metric,
            value=args.value,
        )
        render(spec)
    except FigureError as exc:
        print(f"figure error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
