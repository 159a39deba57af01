"""Prediction intervals for the true and the observed AUC of the next validation."""

from __future__ import annotations

import math
from typing import Union

from scipy.stats import norm

from .bayes import PosteriorSummary
from .core import MetaResult, PredictionInterval, Target
from .errors import InvalidArgument

Fit = Union[MetaResult, PosteriorSummary]


def z_quantile(level: float) -> float:
    if not (0.0 < level < 1.0):
        raise InvalidArgument(f"level must lie in (0, 1), got {level!r}")
    if level == 0.95:
        return 1.96
    return float(norm.ppf(0.5 * (1.0 + level)))


def _center_var(fit: Fit, literal: bool) -> tuple[float, float]:
    if isinstance(fit, PosteriorSummary):
        spread = fit.sd_post if literal else fit.predictive_sd
        return fit.auc_post, spread * spread
    return fit.pooled, fit.pooled_se**2 + fit.tau**2


def _interval(center, var, level, target):
    half = z_quantile(level) * math.sqrt(var)
    return PredictionInterval(center, center - half, center + half, level, target)


def pi_true_next(fit: Fit, level: float = 0.95, literal: bool = False) -> PredictionInterval:
    """Interval for the true AUC in a new setting.

    Frequentist fits use ``pooled_se^2 + tau^2``. Posterior summaries use the
    predictive spread by default; ``literal=True`` uses the posterior SD of
    the pooled AUC alone.
    """
    center, var = _center_var(fit, literal)
    return _interval(center, var, level, Target.TRUE_AUC)


def pi_observed_next(fit: Fit, s_next: float, level: float = 0.95,
                     literal: bool = False) -> PredictionInterval:
    """Interval for the observed AUC of the next study with standard error ``s_next``."""
    if not (math.isfinite(s_next) and s_next > 0):
        raise InvalidArgument(f"s_next must be positive, got {s_next!r}")
    center, var = _center_var(fit, literal)
    return _interval(center, var + s_next * s_next, level, Target.OBSERVED_AUC)
