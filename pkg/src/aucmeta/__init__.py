"""Meta-analysis of external-validation AUCs with empirical-Bayes heterogeneity priors."""

from .bayes import (
    PosteriorSummary,
    PriorFit,
    PriorMode,
    fit_hyperparams,
    fit_prior,
    marginal_loglik_cpm,
    posterior_pooled,
)
from .core import (
    FLAT_PRIOR_TABLE,
    FULL_PRIOR_TABLE,
    CpmSeries,
    HyperParams,
    Method,
    MetaResult,
    PredictionInterval,
    Target,
    ValidationStudy,
    lognormal_mean_var,
    loglik_series_given_tau,
    tau_bar,
)
from .freq import cumulative_meta, dl_tau, fe_pool, pool, re_pool, reml_tau, sj_tau
from .intervals import pi_observed_next, pi_true_next

__version__ = "0.1.0"
