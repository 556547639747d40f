#!/usr/bin/env python3
"""Component ablation on the slanted, occluded, edge-degraded scene:
2D-only vs +3GC vs +3GC+blind-mask, median depth RMSE over seeds."""

import argparse
import sys
import tempfile

from m3d.cli import main as cli_main
from m3d.formats import read_csv


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--iters", type=int, default=150)
    ap.add_argument("--out", default=None, help="keep artifacts here (default: temp dir)")
    args = ap.parse_args()

    out = args.out or tempfile.mkdtemp(prefix="m3d_ablation_")
    code = cli_main(["ablate", "--seeds", str(args.seeds), "--iters", str(args.iters), "--out", out])
    if code != 0:
        sys.exit(code)

    header, rows = read_csv(f"{out}/summary.csv")
    rmse_idx = header.index("rmse")
    print(f"artifacts: {out}")
    print(f"{'config':10s}  median depth RMSE")
    med = {}
    for row in rows:
        med[row[0]] = float(row[rmse_idx])
        print(f"{row[0]:10s}  {float(row[rmse_idx]):.4f}")
    ordered = med["2d-only"] >= med["3gc"] >= med["3gc+mask"]
    strict = med["3gc+mask"] < min(med["2d-only"], med["3gc"])
    print(f"ordering 2D-only >= +3GC >= +3GC+mask: {ordered}; full config strictly best: {strict}")


if __name__ == "__main__":
    main()
