#!/usr/bin/env python3
"""Convergence study on the torus-knot pipe surface.

Reconstructs the knot from increasingly dense synthetic clouds with a fixed
number of patches and reports the rms / max potential error over a dense set
of exact surface samples.  Mirrors the accuracy experiment the acceptance
suite checks, but over the full size ladder.

Usage:
    python scripts/knot_convergence.py [--orders 1 2] [--patches 864]
        [--delta 0.85] [--dense 131424] [--csv out.csv]
"""

import argparse
import csv
import os
import sys
import time

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from curlsurf.reconstruct import ReconConfig, fit
from curlsurf.synthetic import error_report, trefoil_pipe

SIZES = [6114, 8664, 11616, 18816, 23064, 27744, 32856]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--orders", type=int, nargs="+", default=[1, 2])
    ap.add_argument("--patches", type=int, default=864)
    ap.add_argument("--delta", type=float, default=0.85)
    ap.add_argument("--sizes", type=int, nargs="+", default=SIZES)
    ap.add_argument("--dense", type=int, default=131424)
    ap.add_argument("--csv", default=None, help="append results to this CSV")
    ap.add_argument("--threads", type=int, default=None)
    args = ap.parse_args()

    rows = []
    print(f"{'N':>8} {'order':>6} {'rms':>12} {'max':>12} {'seconds':>8}")
    for order in args.orders:
        for n in args.sizes:
            t0 = time.perf_counter()
            cloud, surface = trefoil_pipe(n)
            config = ReconConfig(
                m_target=args.patches,
                order=order,
                delta=args.delta,
                shift_mode="exact",
                threads=args.threads,
            )
            model = fit(cloud, config)
            rep = error_report(model, surface, args.dense)
            dt = time.perf_counter() - t0
            print(f"{cloud.n:>8} {order:>6} {rep.rms:>12.3e} {rep.max_abs:>12.3e} {dt:>8.1f}")
            rows.append({"N": cloud.n, "order": order,
                         "rms": f"{rep.rms:.6e}", "max": f"{rep.max_abs:.6e}"})

    if args.csv:
        new = not os.path.exists(args.csv)
        with open(args.csv, "a", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=["N", "order", "rms", "max"])
            if new:
                writer.writeheader()
            writer.writerows(rows)
        print(f"appended {len(rows)} rows to {args.csv}")


if __name__ == "__main__":
    main()
