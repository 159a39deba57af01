"""Empirical-Bayes meta-analysis with a normal prior on the pooled AUC and a lognormal prior on tau.

Given tau, the pooled AUC integrates out in closed form (normal-normal), so
every quantity reduces to a one-dimensional integral over ``log tau``. That
integral is done with Gauss-Hermite quadrature against the lognormal prior.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from numpy.polynomial.hermite import hermgauss
from scipy.optimize import minimize
from scipy.special import logsumexp

from .core import LOG_2PI, CpmSeries, HyperParams
from .errors import DataError, InvalidArgument, NonIdentifiable, NumericFailure

GH_NODES = 41
FLAT_MU_AUC = 0.0
FLAT_SIGMA_AUC = 10.0
NM_XATOL = 1e-6
NM_MAXITER = 2000


class PriorMode(str, enum.Enum):
    FLAT_AUC = "flat"
    FULL = "full"


@dataclass(frozen=True)
class PosteriorSummary:
    auc_post: float
    sd_post: float
    tau_post_mean: float
    tau2_post_mean: float
    predictive_sd: float
    k: int = 0


def _gh_rule(hp: HyperParams, nodes: int):
    x, w = hermgauss(nodes)
    with np.errstate(over="ignore"):
        tau = np.exp(hp.mu_tau + math.sqrt(2.0) * hp.sigma_tau * x)
    return tau, np.log(w) - 0.5 * math.log(math.pi)


class _Packed:
    """Registry as zero-padded ``(n_cpms, max_k)`` arrays for vectorised likelihoods."""

    def __init__(self, registry: Sequence[CpmSeries]):
        m = len(registry)
        kmax = max(len(s) for s in registry)
        self.y = np.zeros((m, kmax))
        self.s2 = np.ones((m, kmax))
        self.mask = np.zeros((m, kmax), dtype=bool)
        for i, series in enumerate(registry):
            k = len(series)
            self.y[i, :k] = series.y
            self.s2[i, :k] = series.se**2
            self.mask[i, :k] = True
        self.n = self.mask.sum(axis=1)

    def conditional_terms(self, tau, mu_auc, sigma_auc):
        """Per-CPM, per-node log p(y | tau) and the conditional posterior of the pooled AUC.

        Returns arrays of shape ``(n_cpms, len(tau))``: log-likelihood,
        conditional mean and conditional variance.
        """
        v = self.s2[:, :, None] + (tau * tau)[None, None, :]
        mask = self.mask[:, :, None]
        inv_v = np.where(mask, 1.0 / v, 0.0)
        r = np.where(mask, self.y[:, :, None] - mu_auc, 0.0)
        a = inv_v.sum(axis=1)
        b = (r * inv_v).sum(axis=1)
        c = (r * r * inv_v).sum(axis=1)
        s2a = sigma_auc * sigma_auc
        denom = 1.0 + s2a * a
        logdet = np.where(mask, np.log(v), 0.0).sum(axis=1) + np.log(denom)
        quad = c - s2a * b * b / denom
        ll = -0.5 * (self.n[:, None] * LOG_2PI + logdet + quad)
        cond_mean = mu_auc + s2a * b / denom
        cond_var = s2a / denom
        return ll, cond_mean, cond_var

    def marginal(self, hp: HyperParams, nodes: int = GH_NODES) -> np.ndarray:
        tau, logw = _gh_rule(hp, nodes)
        ll, _, _ = self.conditional_terms(tau, hp.mu_auc, hp.sigma_auc)
        out = logsumexp(ll + logw[None, :], axis=1)
        if not np.all(np.isfinite(out)):
            raise NumericFailure("non-finite marginal likelihood", {"hp": hp})
        return out


def marginal_loglik_cpm(series: CpmSeries, hp: HyperParams, nodes: int = GH_NODES) -> float:
    """log p(y_i | hp) with the pooled AUC and tau both integrated out."""
    return float(_Packed([series]).marginal(hp, nodes)[0])


def marginal_loglik_registry(registry: Sequence[CpmSeries], hp: HyperParams,
                             nodes: int = GH_NODES) -> float:
    return float(np.sum(_Packed(registry).marginal(hp, nodes)))


def posterior_pooled(series: CpmSeries, hp: HyperParams, nodes: int = GH_NODES) -> PosteriorSummary:
    """Posterior moments of the pooled AUC and tau for one CPM."""
    tau, logw = _gh_rule(hp, nodes)
    ll, m, v = _Packed([series]).conditional_terms(tau, hp.mu_auc, hp.sigma_auc)
    logp = ll[0] + logw
    if not np.all(np.isfinite(logp)):
        raise NumericFailure("non-finite posterior weights", {"hp": hp, "cpm": series.cpm_label})
    p = np.exp(logp - logsumexp(logp))
    m, v = m[0], v[0]
    auc_post = float(np.dot(p, m))
    var_post = float(np.dot(p, v + (m - auc_post) ** 2))
    tau_mean = float(np.dot(p, tau))
    tau2_mean = float(np.dot(p, tau * tau))
    sd_post = math.sqrt(var_post)
    return PosteriorSummary(auc_post, sd_post, tau_mean, tau2_mean,
                            math.sqrt(var_post + tau2_mean), len(series))


@dataclass(frozen=True)
class PriorFit:
    hp: HyperParams
    mode: PriorMode
    loglik: float
    n_cpms: int
    n_validations: int
    nit: int = 0
    trace: tuple = field(default=(), repr=False)

    def to_json(self) -> dict:
        return {
            "mu_auc": self.hp.mu_auc,
            "sigma_auc": self.hp.sigma_auc,
            "mu_tau": self.hp.mu_tau,
            "sigma_tau": self.hp.sigma_tau,
            "mode": self.mode.value,
            "loglik": self.loglik,
            "n_cpms": self.n_cpms,
            "n_validations": self.n_validations,
        }


def save_prior(fit: PriorFit, path) -> None:
    with open(path, "w") as fh:
        json.dump(fit.to_json(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_prior(path) -> tuple[HyperParams, PriorMode]:
    try:
        with open(path) as fh:
            doc = json.load(fh)
        hp = HyperParams(float(doc["mu_auc"]), float(doc["sigma_auc"]),
                         float(doc["mu_tau"]), float(doc["sigma_tau"]))
        mode = PriorMode(doc.get("mode", "full"))
    except (OSError, KeyError, ValueError, TypeError) as exc:
        raise DataError(f"unusable prior file {path}: {exc}", "bad-prior") from exc
    return hp, mode


def _start(registry, mode):
    all_y = np.concatenate([s.y for s in registry])
    means = np.array([s.y.mean() for s in registry])
    sd = float(np.std(means, ddof=1)) if len(means) > 1 else 0.0
    if not (sd > 0 and math.isfinite(sd)):
        sd = 0.05
    x0 = [math.log(0.05), math.log(0.3)]
    if mode is PriorMode.FULL:
        x0 += [float(all_y.mean()), math.log(sd)]
    return np.array(x0)


def _unpack(x, mode) -> HyperParams:
    if mode is PriorMode.FULL:
        return HyperParams(float(x[2]), math.exp(x[3]), float(x[0]), math.exp(x[1]))
    return HyperParams(FLAT_MU_AUC, FLAT_SIGMA_AUC, float(x[0]), math.exp(x[1]))


def _pack(hp, mode):
    x = [hp.mu_tau, math.log(max(hp.sigma_tau, 1e-8))]
    if mode is PriorMode.FULL:
        x += [hp.mu_auc, math.log(max(hp.sigma_auc, 1e-8))]
    return np.array(x)


def fit_prior(registry: Sequence[CpmSeries], mode: PriorMode = PriorMode.FULL,
              start: Optional[HyperParams] = None, nodes: int = GH_NODES) -> PriorFit:
    """Maximum marginal likelihood hyperparameters over a registry of CPMs.

    Nelder-Mead over ``mu_tau, log sigma_tau`` (plus ``mu_auc, log sigma_auc``
    in FULL mode). ``start`` warm-starts the simplex, e.g. for leave-one-out refits.
    """
    mode = PriorMode(mode)
    registry = list(registry)
    if not registry:
        raise InvalidArgument("empty registry")
    all_y = np.concatenate([s.y for s in registry])
    if all(len(s) == 1 for s in registry) and np.ptp(all_y) == 0.0:
        raise NonIdentifiable("all CPMs have one validation with identical AUCs")

    packed = _Packed(registry)
    x0 = _pack(start, mode) if start is not None else _start(registry, mode)

    def objective(x):
        try:
            return -float(np.sum(packed.marginal(_unpack(x, mode), nodes)))
        except (NumericFailure, OverflowError, ValueError):
            return math.inf

    trace = []
    res = minimize(
        objective, x0, method="Nelder-Mead",
        callback=lambda xk: trace.append(tuple(float(v) for v in xk)),
        options={"xatol": NM_XATOL, "fatol": math.inf, "maxiter": NM_MAXITER,
                 "maxfev": 20 * NM_MAXITER},
    )
    if not res.success or not math.isfinite(res.fun):
        raise NumericFailure(
            f"hyperparameter fit did not converge: {res.message}",
            {"nit": int(res.nit), "x": res.x.tolist(), "trace": trace[-20:]},
        )
    return PriorFit(_unpack(res.x, mode), mode, -float(res.fun), len(registry),
                    int(packed.n.sum()), int(res.nit), tuple(trace))


def fit_hyperparams(registry: Sequence[CpmSeries], mode: PriorMode = PriorMode.FULL) -> HyperParams:
    return fit_prior(registry, mode).hp
