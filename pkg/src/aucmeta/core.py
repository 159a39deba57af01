"""Domain types and the two-level normal likelihood for validation AUCs.

Observed AUCs are modelled on the raw probability scale::

    auc_hat_ij ~ N(auc_ij, s_ij^2)      (sampling error, s_ij known)
    auc_ij     ~ N(auc_i, tau_i^2)      (between-setting heterogeneity)

with ``i`` indexing the prediction model (CPM) and ``j`` its validations.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import InvalidArgument

LOG_2PI = math.log(2.0 * math.pi)


class Method(str, enum.Enum):
    FE = "FE"
    RE_REML = "RE_REML"
    RE_DL = "RE_DL"
    RE_SJ = "RE_SJ"
    RE_FIXED_TAU = "RE_FIXED_TAU"
    BAYES_FLAT = "BAYES_FLAT"
    BAYES_FULL = "BAYES_FULL"

    @property
    def is_bayes(self) -> bool:
        return self in (Method.BAYES_FLAT, Method.BAYES_FULL)


class Target(str, enum.Enum):
    TRUE_AUC = "TRUE_AUC"
    OBSERVED_AUC = "OBSERVED_AUC"


@dataclass(frozen=True)
class ValidationStudy:
    auc_hat: float
    se: float
    study_label: str = ""
    sequence_index: int = 0

    def __post_init__(self):
        if not (0.0 < self.auc_hat < 1.0):
            raise InvalidArgument(f"auc_hat must lie in (0, 1), got {self.auc_hat!r}")
        if not (math.isfinite(self.se) and self.se > 0.0):
            raise InvalidArgument(f"se must be positive and finite, got {self.se!r}")
        if self.sequence_index < 0:
            raise InvalidArgument("sequence_index must be nonnegative")


@dataclass(frozen=True)
class CpmSeries:
    """All external validations of one prediction model, in sequence order."""

    cpm_label: str
    studies: tuple[ValidationStudy, ...]
    development_auc: Optional[float] = None

    def __post_init__(self):
        studies = tuple(self.studies)
        if not studies:
            raise InvalidArgument(f"CPM {self.cpm_label!r} has no validation studies")
        idx = [s.sequence_index for s in studies]
        if len(set(idx)) != len(idx):
            raise InvalidArgument(f"duplicate sequence_index in CPM {self.cpm_label!r}")
        if idx != sorted(idx):
            raise InvalidArgument(f"studies of CPM {self.cpm_label!r} not sorted by sequence_index")
        object.__setattr__(self, "studies", studies)

    @classmethod
    def from_arrays(cls, label, auc_hat, se, development_auc=None) -> "CpmSeries":
        studies = tuple(
            ValidationStudy(float(y), float(s), f"{label}-{j}", j)
            for j, (y, s) in enumerate(zip(auc_hat, se))
        )
        return cls(str(label), studies, development_auc)

    def __len__(self):
        return len(self.studies)

    @property
    def y(self) -> np.ndarray:
        return np.array([s.auc_hat for s in self.studies])

    @property
    def se(self) -> np.ndarray:
        return np.array([s.se for s in self.studies])

    def head(self, n: int) -> "CpmSeries":
        """The first ``n`` validations as a new series."""
        return CpmSeries(self.cpm_label, self.studies[:n], self.development_auc)


@dataclass(frozen=True)
class MetaResult:
    pooled: float
    pooled_se: float
    tau: float
    method: Method
    k: int
    flags: tuple[str, ...] = field(default=())

    def __post_init__(self):
        if self.method is Method.FE and self.tau != 0.0:
            raise InvalidArgument("fixed-effects result must have tau == 0")
        if not self.pooled_se > 0.0:
            raise InvalidArgument("pooled_se must be positive")
        if self.tau < 0.0:
            raise InvalidArgument("tau must be nonnegative")


@dataclass(frozen=True)
class HyperParams:
    """Normal prior on the pooled AUC and lognormal prior on tau.

    ``sigma_tau = 0`` is accepted and means a point mass at ``exp(mu_tau)``.
    """

    mu_auc: float
    sigma_auc: float
    mu_tau: float
    sigma_tau: float

    def __post_init__(self):
        vals = (self.mu_auc, self.sigma_auc, self.mu_tau, self.sigma_tau)
        if not all(math.isfinite(v) for v in vals):
            raise InvalidArgument(f"non-finite hyperparameter in {vals}")
        if self.sigma_auc < 0 or self.sigma_tau < 0:
            raise InvalidArgument("sigma_auc and sigma_tau must be nonnegative")


# Estimated priors reported for the Tufts-PACE registry.
FLAT_PRIOR_TABLE = HyperParams(mu_auc=0.0, sigma_auc=10.0, mu_tau=-2.94, sigma_tau=0.27)
FULL_PRIOR_TABLE = HyperParams(mu_auc=0.73, sigma_auc=0.07, mu_tau=-2.89, sigma_tau=0.21)


@dataclass(frozen=True)
class PredictionInterval:
    center: float
    lower: float
    upper: float
    level: float
    target: Target

    def __post_init__(self):
        if not (0.0 < self.level < 1.0):
            raise InvalidArgument("level must lie in (0, 1)")
        if not (self.lower <= self.center <= self.upper):
            raise InvalidArgument("interval must satisfy lower <= center <= upper")

    @property
    def half_width(self) -> float:
        return 0.5 * (self.upper - self.lower)

    def contains(self, x: float) -> bool:
        return self.lower <= x <= self.upper

    @property
    def outside_unit(self) -> bool:
        """True when an endpoint falls outside (0, 1). Endpoints are never clipped."""
        return self.lower <= 0.0 or self.upper >= 1.0


def lognormal_mean_var(mu_tau: float, sigma_tau: float) -> tuple[float, float]:
    """Mean and variance of ``exp(N(mu_tau, sigma_tau^2))``."""
    if not (math.isfinite(mu_tau) and math.isfinite(sigma_tau)):
        raise InvalidArgument("lognormal parameters must be finite")
    if sigma_tau < 0:
        raise InvalidArgument("sigma_tau must be nonnegative")
    s2 = sigma_tau * sigma_tau
    mean = math.exp(mu_tau + 0.5 * s2)
    var = math.expm1(s2) * math.exp(2.0 * mu_tau + s2)
    return mean, var


def tau_bar(hp: HyperParams) -> float:
    """Prior mean of tau, used as the fixed heterogeneity in the fixed-tau random-effects model."""
    return lognormal_mean_var(hp.mu_tau, hp.sigma_tau)[0]


def loglik_series_given_tau(series: CpmSeries, auc_i: float, tau: float) -> float:
    """Log-likelihood of a series at pooled AUC ``auc_i`` and heterogeneity ``tau``.

    The per-study true AUCs are integrated out, so each observation is
    ``N(auc_i, s_ij^2 + tau^2)`` independently.
    """
    y, se = series.y, series.se
    v = se**2 + tau * tau
    return float(-0.5 * np.sum(LOG_2PI + np.log(v) + (y - auc_i) ** 2 / v))
