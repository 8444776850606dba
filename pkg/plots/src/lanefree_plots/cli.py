"""Command-line wrapper around the figure renderer."""
import argparse
import sys
from pathlib import Path

from .render import FIGURE_KINDS, PlotSpec, SchemaError, render


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(
        prog="lanefree-plot",
        description="Render a figure from a simulator CSV export")
    ap.add_argument("--input", required=True, help="input CSV path")
    ap.add_argument("--kind", required=True, choices=FIGURE_KINDS)
    ap.add_argument("--out", required=True, help="output image path")
    ap.add_argument("--vehicle", type=int, default=None,
                    help="vehicle id for speed-traj (default: lowest id)")
    args = ap.parse_args(argv)
    spec = PlotSpec(input_csv=Path(args.input), kind=args.kind,
                    output=Path(args.out), vehicle_id=args.vehicle)
    try:
        render(spec)
    except (SchemaError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
