"""Independent reference computations used as test oracles.

None of these reuse the package's closed-form shortcuts.
"""

import numpy as np


def reml_grid_argmax(y, se, upper=0.5, step=1e-6, chunk=50_000):
    """Brute-force argmax of the restricted log-likelihood over a uniform tau grid."""
    y = np.asarray(y, float)
    s2 = np.asarray(se, float) ** 2
    best_t, best_ll = 0.0, -np.inf
    n = int(round(upper / step)) + 1
    for start in range(0, n, chunk):
        t = np.arange(start, min(start + chunk, n)) * step
        v = s2[None, :] + t[:, None] ** 2
        w = 1.0 / v
        mu = (w * y).sum(1) / w.sum(1)
        ll = -0.5 * (np.log(v).sum(1) + np.log(w.sum(1)) + (w * (y - mu[:, None]) ** 2).sum(1))
        i = int(np.argmax(ll))
        if ll[i] > best_ll:
            best_ll, best_t = ll[i], t[i]
    return best_t


def _joint_normal_logpdf(y, s2, tau, mu, sigma):
    """log N(y; mu 1, sigma^2 J + diag(s2 + tau^2)) batched over tau, via explicit matrices."""
    k = len(y)
    cov = sigma**2 * np.ones((len(tau), k, k))
    idx = np.arange(k)
    cov[:, idx, idx] += s2[None, :] + tau[:, None] ** 2
    _, logdet = np.linalg.slogdet(cov)
    r = np.broadcast_to(y - mu, (len(tau), k))[..., None]
    quad = (r * np.linalg.solve(cov, r)).sum(axis=(1, 2))
    return -0.5 * (k * np.log(2 * np.pi) + logdet + quad)


def mc_marginal_loglik(y, se, hp, draws=1_000_000, seed=0, chunk=200_000):
    """Monte-Carlo log marginal likelihood; returns (estimate, standard error on log scale)."""
    rng = np.random.default_rng(seed)
    y = np.asarray(y, float)
    s2 = np.asarray(se, float) ** 2
    logs = []
    for start in range(0, draws, chunk):
        tau = np.exp(hp.mu_tau + hp.sigma_tau * rng.standard_normal(min(chunk, draws - start)))
        logs.append(_joint_normal_logpdf(y, s2, tau, hp.mu_auc, hp.sigma_auc))
    logs = np.concatenate(logs)
    m = logs.max()
    lik = np.exp(logs - m)
    mean = lik.mean()
    return m + np.log(mean), lik.std(ddof=1) / np.sqrt(len(lik)) / mean


def mc_posterior(y, se, hp, draws=1_000_000, seed=0):
    """Importance-sampling posterior moments of (pooled AUC, tau).

    tau is drawn from its lognormal prior; the pooled AUC from a wide normal
    proposal around the data, reweighted by prior density times likelihood.
    """
    rng = np.random.default_rng(seed)
    y = np.asarray(y, float)
    s2 = np.asarray(se, float) ** 2
    tau = np.exp(hp.mu_tau + hp.sigma_tau * rng.standard_normal(draws))
    tau_hi = np.exp(hp.mu_tau + 3 * hp.sigma_tau)
    w0 = 1.0 / (s2 + tau_hi**2)
    center = (w0 @ y) / w0.sum()
    if hp.sigma_auc < 1.0:
        # informative prior: centre between prior mean and data
        prec = 1 / hp.sigma_auc**2 + w0.sum()
        center = (hp.mu_auc / hp.sigma_auc**2 + w0 @ y) / prec
    spread = 3.0 * np.sqrt(1.0 / w0.sum())
    auc = center + spread * rng.standard_normal(draws)

    logw = -0.5 * ((auc - hp.mu_auc) / hp.sigma_auc) ** 2 - np.log(hp.sigma_auc)
    logw += 0.5 * ((auc - center) / spread) ** 2 + np.log(spread)
    for yj, sj in zip(y, s2):
        v = sj + tau**2
        logw += -0.5 * np.log(v) - 0.5 * (yj - auc) ** 2 / v
    w = np.exp(logw - logw.max())
    w /= w.sum()
    auc_post = w @ auc
    var = w @ (auc - auc_post) ** 2
    t_mean = w @ tau
    t2_mean = w @ tau**2
    return {
        "auc_post": auc_post,
        "sd_post": np.sqrt(var),
        "tau_post_mean": t_mean,
        "tau2_post_mean": t2_mean,
        "predictive_sd": np.sqrt(var + t2_mean),
        "ess": 1.0 / (w @ w),
    }
