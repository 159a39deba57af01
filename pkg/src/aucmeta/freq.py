"""Frequentist pooling: inverse-variance weights and heterogeneity estimators."""

from __future__ import annotations

import math
from typing import Iterable, Optional, Sequence, Union

import numpy as np
from scipy.optimize import minimize_scalar

from .core import CpmSeries, Method, MetaResult, ValidationStudy
from .errors import DegenerateData, InsufficientData, InvalidArgument, NumericFailure

Studies = Union[CpmSeries, Sequence[ValidationStudy]]

REML_UPPER = 2.0
REML_XATOL = 1e-8
REML_MAXITER = 500
# Bracketing grid for the REML search, quadratically denser near tau = 0.
_REML_GRID = REML_UPPER * np.linspace(0.0, 1.0, 401) ** 2

TAU_NOT_ESTIMABLE = "tau-not-estimable"
TAU_TRUNCATED = "tau-truncated"
TAU_DEGENERATE = "tau-degenerate"


def _arrays(studies: Studies) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(studies, CpmSeries):
        return studies.y, studies.se
    studies = list(studies)
    if not studies:
        raise InvalidArgument("need at least one study")
    y = np.array([s.auc_hat for s in studies], dtype=float)
    se = np.array([s.se for s in studies], dtype=float)
    return y, se


def _weighted(y, v):
    w = 1.0 / v
    sw = w.sum()
    return float(np.dot(w, y) / sw), float(1.0 / math.sqrt(sw))


def fe_pool(studies: Studies) -> MetaResult:
    y, se = _arrays(studies)
    pooled, pooled_se = _weighted(y, se**2)
    return MetaResult(pooled, pooled_se, 0.0, Method.FE, len(y))


def re_pool(studies: Studies, tau: float, method: Method = Method.RE_FIXED_TAU,
            flags: tuple[str, ...] = ()) -> MetaResult:
    """Random-effects pooling with weights ``1 / (s_j^2 + tau^2)`` at a given tau."""
    if not (math.isfinite(tau) and tau >= 0):
        raise InvalidArgument(f"tau must be finite and nonnegative, got {tau!r}")
    y, se = _arrays(studies)
    pooled, pooled_se = _weighted(y, se**2 + tau * tau)
    return MetaResult(pooled, pooled_se, float(tau), method, len(y), flags)


def _require_two(y):
    if len(y) < 2:
        raise InsufficientData(f"heterogeneity needs at least 2 studies, got {len(y)}")


def _dl_tau2_untruncated(y, se) -> float:
    w = 1.0 / se**2
    sw = w.sum()
    mu = np.dot(w, y) / sw
    q = float(np.dot(w, (y - mu) ** 2))
    return (q - (len(y) - 1)) / (sw - np.dot(w, w) / sw)


def dl_tau(studies: Studies) -> float:
    """DerSimonian-Laird moment estimator, truncated at zero."""
    y, se = _arrays(studies)
    _require_two(y)
    return math.sqrt(max(0.0, _dl_tau2_untruncated(y, se)))


def restricted_loglik(tau, y, se):
    """Restricted log-likelihood (additive constants dropped); vectorised over ``tau``."""
    tau = np.asarray(tau, dtype=float)
    v = se**2 + tau[..., None] ** 2
    w = 1.0 / v
    sw = w.sum(axis=-1)
    mu = (w * y).sum(axis=-1) / sw
    resid2 = (w * (y - mu[..., None]) ** 2).sum(axis=-1)
    return -0.5 * (np.log(v).sum(axis=-1) + np.log(sw) + resid2)


def reml_tau(studies: Studies) -> float:
    """REML estimate of tau on [0, 2].

    A coarse grid locates the global basin, bounded Brent refines it, and the
    boundary solution tau = 0 is returned when it scores at least as well.
    """
    y, se = _arrays(studies)
    _require_two(y)
    ll = restricted_loglik(_REML_GRID, y, se)
    i = int(np.argmax(ll))
    lo = _REML_GRID[max(i - 1, 0)]
    hi = _REML_GRID[min(i + 1, len(_REML_GRID) - 1)]
    res = minimize_scalar(
        lambda t: -float(restricted_loglik(t, y, se)),
        bounds=(lo, hi),
        method="bounded",
        options={"xatol": REML_XATOL, "maxiter": REML_MAXITER},
    )
    if not res.success:
        raise NumericFailure(
            "REML search did not converge",
            {"nit": int(res.nit), "bracket": (float(lo), float(hi)), "message": str(res.message)},
        )
    best_t, best_ll = float(res.x), -float(res.fun)
    for t in (lo, hi):
        lt = float(restricted_loglik(t, y, se))
        if lt > best_ll:
            best_t, best_ll = float(t), lt
    if float(restricted_loglik(0.0, y, se)) >= best_ll:
        return 0.0
    return best_t


def sj_tau(studies: Studies) -> float:
    """Sidik-Jonkman two-step estimator (original 2002 form)."""
    y, se = _arrays(studies)
    _require_two(y)
    k = len(y)
    tau0_2 = float(np.mean((y - y.mean()) ** 2))
    if tau0_2 <= 0.0:
        raise DegenerateData("Sidik-Jonkman undefined: all observed AUCs identical")
    v = 1.0 / (se**2 / tau0_2 + 1.0)
    mu_v = np.dot(v, y) / v.sum()
    return math.sqrt(float(np.dot(v, (y - mu_v) ** 2)) / (k - 1))


_ESTIMATORS = {Method.RE_REML: reml_tau, Method.RE_DL: dl_tau, Method.RE_SJ: sj_tau}


def pool(studies: Studies, method: Method, tau: Optional[float] = None) -> MetaResult:
    """Pool with any frequentist method.

    Methods that estimate tau fall back to tau = 0 on a single study and on
    Sidik-Jonkman degenerate input; the result then carries an explanatory flag.
    """
    method = Method(method)
    if method is Method.FE:
        return fe_pool(studies)
    if method is Method.RE_FIXED_TAU:
        if tau is None:
            raise InvalidArgument("RE_FIXED_TAU needs an explicit tau")
        return re_pool(studies, tau)
    if method not in _ESTIMATORS:
        raise InvalidArgument(f"{method.value} is not a frequentist method")
    y, se = _arrays(studies)
    if len(y) < 2:
        return re_pool(studies, 0.0, method, (TAU_NOT_ESTIMABLE,))
    flags: tuple[str, ...] = ()
    if method is Method.RE_DL:
        raw = _dl_tau2_untruncated(y, se)
        t = math.sqrt(max(0.0, raw))
        if raw < 0:
            flags = (TAU_TRUNCATED,)
    elif method is Method.RE_SJ:
        try:
            t = sj_tau(studies)
        except DegenerateData:
            t, flags = 0.0, (TAU_DEGENERATE,)
    else:
        t = reml_tau(studies)
    return re_pool(studies, t, method, flags)


def cumulative_meta(series: CpmSeries, method: Method, tau: Optional[float] = None) -> list[MetaResult]:
    """Element ``m`` pools the first ``m + 1`` validations in sequence order."""
    return [pool(series.head(m), method, tau) for m in range(1, len(series) + 1)]


def as_studies(pairs: Iterable[tuple[float, float]]) -> list[ValidationStudy]:
    """Convenience constructor from ``(auc_hat, se)`` pairs."""
    return [ValidationStudy(y, s, str(j), j) for j, (y, s) in enumerate(pairs)]
