"""Leave-one-study-out cross-validation of the pooling methods.

For a fixed ``n``, every CPM with at least ``n + 1`` validations is fitted on
its first ``n`` studies; the method then predicts the observed AUC of study
``n + 1`` and forms the observed-AUC prediction interval using that study's
standard error.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .bayes import PriorMode, fit_prior, posterior_pooled
from .core import CpmSeries, HyperParams, Method, PredictionInterval, tau_bar
from .errors import InvalidArgument
from .freq import pool
from .intervals import pi_observed_next

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class CvRecord:
    cpm_label: str
    n_used: int
    method: Method
    predicted: float
    interval: PredictionInterval
    actual: float
    covered: bool
    error: float


def _prior_mode(method: Method) -> PriorMode:
    return PriorMode.FULL if method is Method.BAYES_FULL else PriorMode.FLAT_AUC


def _predict(train: CpmSeries, s_next: float, method: Method, hp, tau, level, literal):
    if method.is_bayes:
        post = posterior_pooled(train, hp)
        return post.auc_post, pi_observed_next(post, s_next, level, literal)
    fit = pool(train, method, tau)
    return fit.pooled, pi_observed_next(fit, s_next, level)


def loso_eval(registry: Sequence[CpmSeries], n: int, method: Method,
              hp: Optional[HyperParams] = None, *, tau: Optional[float] = None,
              level: float = 0.95, literal: bool = False, strict: bool = False,
              at_least: bool = False) -> list[CvRecord]:
    """Cross-validated records for one ``(n, method)`` cell.

    ``hp`` is required for the Bayes methods, and for RE_FIXED_TAU unless an
    explicit ``tau`` is given (then ``tau_bar(hp)`` is not used). With
    ``strict`` the hyperparameters are refitted without the evaluated CPM.
    With ``at_least`` each CPM with more than ``n`` validations predicts its
    last study from all the preceding ones.
    """
    method = Method(method)
    if n < 1:
        raise InvalidArgument("n must be >= 1")
    needs_hp = method.is_bayes or (method is Method.RE_FIXED_TAU and tau is None)
    if needs_hp and hp is None:
        raise InvalidArgument(f"{method.value} needs hyperparameters")

    records, skipped = [], 0
    for series in sorted(registry, key=lambda s: s.cpm_label):
        k = len(series)
        if k < n + 1:
            skipped += 1
            continue
        used = k - 1 if at_least else n
        cpm_hp, cpm_tau = hp, tau
        if strict and needs_hp:
            others = [s for s in registry if s.cpm_label != series.cpm_label]
            cpm_hp = fit_prior(others, _prior_mode(method), start=hp).hp
        if method is Method.RE_FIXED_TAU and tau is None:
            cpm_tau = tau_bar(cpm_hp)
        nxt = series.studies[used]
        pred, iv = _predict(series.head(used), nxt.se, method, cpm_hp, cpm_tau, level, literal)
        records.append(CvRecord(series.cpm_label, used, method, pred, iv, nxt.auc_hat,
                                iv.contains(nxt.auc_hat), pred - nxt.auc_hat))
    log.info("loso n=%d %s: %d records, %d CPMs skipped", n, method.value, len(records), skipped)
    return records


def count_skipped(registry: Sequence[CpmSeries], n: int) -> int:
    return sum(len(s) < n + 1 for s in registry)


def coverage(records: Sequence[CvRecord]) -> tuple[float, float]:
    """Fraction of covered records and its binomial standard error."""
    if not records:
        raise InvalidArgument("coverage of zero records")
    p = sum(r.covered for r in records) / len(records)
    return p, math.sqrt(p * (1.0 - p) / len(records))


def rmse(records: Sequence[CvRecord]) -> float:
    if not records:
        raise InvalidArgument("rmse of zero records")
    e = np.array([r.error for r in records])
    return float(np.sqrt(np.mean(e * e)))


def validation_count_histogram(registry: Iterable[CpmSeries]) -> dict[int, int]:
    counts: dict[int, int] = {}
    for s in registry:
        counts[len(s)] = counts.get(len(s), 0) + 1
    return dict(sorted(counts.items()))


def count_quantiles(registry: Iterable[CpmSeries]) -> dict:
    """Median and interquartile range of validations per CPM."""
    ks = np.array([len(s) for s in registry])
    if ks.size == 0:
        return {}
    q1, med, q3 = np.percentile(ks, [25, 50, 75])
    return {"median": float(med), "q1": float(q1), "q3": float(q3)}


def summarize(cells: dict) -> list[dict]:
    """One row per ``(n, method)`` cell: coverage, its SE, RMSE and record count."""
    rows = []
    for (n, method), recs in cells.items():
        if not recs:
            rows.append({"n": n, "method": Method(method).value, "records": 0,
                         "coverage": None, "coverage_se": None, "rmse": None})
            continue
        p, se = coverage(recs)
        rows.append({"n": n, "method": Method(method).value, "records": len(recs),
                     "coverage": p, "coverage_se": se, "rmse": rmse(recs)})
    return rows


RECORD_COLUMNS = ("cpm_id", "n_used", "method", "predicted", "lower", "upper", "actual", "covered", "error")


def write_records(records: Iterable[CvRecord], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RECORD_COLUMNS)
        for r in records:
            w.writerow([r.cpm_label, r.n_used, r.method.value, repr(r.predicted),
                        repr(r.interval.lower), repr(r.interval.upper), repr(r.actual),
                        int(r.covered), repr(r.error)])
