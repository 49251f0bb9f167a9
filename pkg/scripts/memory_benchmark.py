"""Peak intermediate size of dense-subgraph vs optimized aggregation as d grows."""
import argparse
import csv

from chet.verify import BENCH_HEADER, bench_row

ap = argparse.ArgumentParser(description=__doc__)
ap.add_argument("--d", default="100,200,400,800,1600")
ap.add_argument("--s", type=int, default=16)
ap.add_argument("--out", default="bench.csv")
args = ap.parse_args()

rows = [bench_row(int(d), args.s) for d in args.d.split(",")]
with open(args.out, "w", newline="") as fh:
    w = csv.DictWriter(fh, fieldnames=BENCH_HEADER)
    w.writeheader()
    w.writerows(rows)

prev = None
for r in rows:
    growth = "" if prev is None else (
        f"  x{r['naive_bytes'] / prev['naive_bytes']:.2f} naive, x{r['optimized_bytes'] / prev['optimized_bytes']:.2f} optimized"
    )
    print(f"d={r['d']:5d}  naive {r['naive_bytes']:>11,d} B  optimized {r['optimized_bytes']:>9,d} B{growth}")
    prev = r
