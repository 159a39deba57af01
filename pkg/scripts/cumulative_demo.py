"""Cumulative FE vs REML curves for one long simulated validation series.

Usage: python scripts/cumulative_demo.py [--k 83] [--tau 0.06]
"""

import argparse
import math

import numpy as np

from aucmeta.core import CpmSeries, Method
from aucmeta.freq import cumulative_meta


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--k", type=int, default=83)
    ap.add_argument("--tau", type=float, default=0.06)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    se = 0.03 * np.exp(0.4 * rng.standard_normal(args.k))
    y = np.clip(0.75 + args.tau * rng.standard_normal(args.k) + se * rng.standard_normal(args.k), 0.01, 0.99)
    series = CpmSeries.from_arrays("demo", y, se)
    fe = cumulative_meta(series, Method.FE)
    re = cumulative_meta(series, Method.RE_REML)
    print(f"{'m':>3} {'fe':>7} {'fe_ci_w':>8} {'reml':>7} {'tau':>7} {'pi_w':>7}")
    for m, (a, b) in enumerate(zip(fe, re), start=1):
        if m <= 10 or m % 10 == 0 or m == args.k:
            print(f"{m:>3} {a.pooled:>7.3f} {2 * 1.96 * a.pooled_se:>8.4f} {b.pooled:>7.3f} "
                  f"{b.tau:>7.4f} {2 * 1.96 * math.hypot(b.pooled_se, b.tau):>7.4f}")


if __name__ == "__main__":
    main()
