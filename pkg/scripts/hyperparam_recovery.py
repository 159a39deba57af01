"""Repeat the fit-on-simulated-registry loop over several seeds and report recovery error.

Usage: python scripts/hyperparam_recovery.py [--cpms 500] [--reps 10]
"""

import argparse

import numpy as np

from aucmeta.bayes import PriorMode, fit_hyperparams
from aucmeta.core import FULL_PRIOR_TABLE, tau_bar
from aucmeta.sim import SimConfig, generate_registry


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--cpms", type=int, default=500)
    ap.add_argument("--reps", type=int, default=10)
    args = ap.parse_args()

    truth = FULL_PRIOR_TABLE
    rel_tau, d_mu = [], []
    for seed in range(args.reps):
        reg, _ = generate_registry(SimConfig(truth, args.cpms, seed=seed))
        hp = fit_hyperparams(reg, PriorMode.FULL)
        rel_tau.append(tau_bar(hp) / tau_bar(truth) - 1.0)
        d_mu.append(hp.mu_auc - truth.mu_auc)
        print(f"seed {seed:>3}  E(tau) {tau_bar(hp):.4f}  mu_auc {hp.mu_auc:.4f}  "
              f"sigma_auc {hp.sigma_auc:.4f}  sigma_tau {hp.sigma_tau:.3f}")
    rel_tau, d_mu = np.array(rel_tau), np.array(d_mu)
    print(f"E(tau) relative error: mean {rel_tau.mean():+.3f}, max |.| {np.abs(rel_tau).max():.3f}")
    print(f"mu_auc error: mean {d_mu.mean():+.4f}, max |.| {np.abs(d_mu).max():.4f}")


if __name__ == "__main__":
    main()
