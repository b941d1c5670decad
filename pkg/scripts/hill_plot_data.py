"""Left and right Hill curves of a return series, written as CSV for plotting."""
import argparse
import json

from tvlad.cli import ingest_csv
from tvlad.diagnostics import hill_curve


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("csv")
    ap.add_argument("--column")
    ap.add_argument("--prices", action="store_true", help="convert prices to log returns first")
    ap.add_argument("--k-max", type=int)
    ap.add_argument("--stem", default="hill")
    args = ap.parse_args()

    y = ingest_csv(args.csv, args.column, "log_return" if args.prices else None)
    summary = {}
    for side in ("left", "right"):
        try:
            curve = hill_curve(y, 1, args.k_max, side=side)
            curve.to_csv(f"{args.stem}_{side}.csv")
            summary[side] = curve.plateau()
        except ValueError as exc:
            summary[side] = {"error": str(exc)}
    print(json.dumps(summary, indent=2, default=float))


if __name__ == "__main__":
    main()
