"""Cross-validated coverage and RMSE of every pooling method on a synthetic registry.

Usage: python scripts/coverage_study.py [--cpms 6000] [--seed 6] [--n 1..5]
"""

import argparse

from aucmeta.bayes import PriorMode, fit_prior
from aucmeta.core import FLAT_PRIOR_TABLE, FULL_PRIOR_TABLE, HyperParams, Method
from aucmeta.cv import loso_eval, summarize
from aucmeta.sim import LognormalSe, SimConfig, generate_registry

METHODS = (Method.FE, Method.RE_REML, Method.RE_FIXED_TAU, Method.BAYES_FLAT, Method.BAYES_FULL)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--cpms", type=int, default=6000)
    ap.add_argument("--seed", type=int, default=6)
    ap.add_argument("--kmax", type=int, default=8)
    ap.add_argument("--n", default="1..5")
    args = ap.parse_args()
    lo, hi = (int(x) for x in args.n.split(".."))

    hp = HyperParams(FULL_PRIOR_TABLE.mu_auc, FULL_PRIOR_TABLE.sigma_auc,
                     FLAT_PRIOR_TABLE.mu_tau, FLAT_PRIOR_TABLE.sigma_tau)
    kd = {k: 1.0 for k in range(2, args.kmax + 1)}
    reg, _ = generate_registry(SimConfig(hp, args.cpms, kd, LognormalSe(), seed=args.seed))
    priors = {mode: fit_prior(reg, mode).hp for mode in PriorMode}
    for mode, fitted in priors.items():
        print(mode.value, fitted)

    cells = {}
    for n in range(lo, hi + 1):
        for m in METHODS:
            p = priors[PriorMode.FULL if m is Method.BAYES_FULL else PriorMode.FLAT_AUC]
            cells[(n, m)] = loso_eval(reg, n, m, p)
    print(f"{'n':>3} {'method':<14} {'records':>8} {'coverage':>9} {'se':>7} {'rmse':>8}")
    for r in summarize(cells):
        if r["records"]:
            print(f"{r['n']:>3} {r['method']:<14} {r['records']:>8} {r['coverage']:>9.3f} "
                  f"{r['coverage_se']:>7.3f} {r['rmse']:>8.4f}")


if __name__ == "__main__":
    main()
