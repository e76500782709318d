"""Command line for batch figure generation from hardwall CSV files."""

import argparse
import sys

from .figures import KINDS, PlotError, PlotRequest, render


def main(argv=None):
    ap = argparse.ArgumentParser(
        prog="hardwall-plots",
        description="render figures from hardwall sweep CSVs",
    )
    ap.add_argument("--csv", action="append", required=True,
                    help="input CSV (repeatable)")
    ap.add_argument("--kind", required=True, choices=KINDS)
    ap.add_argument("--out", required=True, help="output image (.png or .svg)")
    ap.add_argument("--filter", action="append", default=[],
                    metavar="COL=VALUE", help="row filter (repeatable)")
    ns = ap.parse_args(argv)

    filters = {}
    for item in ns.filter:
        if "=" not in item:
            print(f"error: bad filter {item!r}, expected COL=VALUE", file=sys.stderr)
            return 1
        col, val = item.split("=", 1)
        filters[col.strip()] = val.strip()

    try:
        render(PlotRequest(csv_paths=ns.csv, kind=ns.kind, output=ns.out,
                           filters=filters))
    except (PlotError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {ns.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
