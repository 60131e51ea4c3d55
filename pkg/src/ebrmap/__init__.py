"""Empirical Bayes robust meta-analytic-predictive priors."""

__version__ = "0.1.0"

from .analysis import (
    DecisionRule,
    EbWeightResult,
    PosteriorSummary,
    analyze,
    analyze_pwe,
    calibration_curve,
    eb_weight,
    posterior_update,
    ppp,
    prior_predictive,
    summarize_posterior,
)
from .conjmix import (
    ConjugateMixture,
    DomainError,
    Family,
    MixtureComponent,
    default_vague,
    ess_moment,
    fit_mixture_em,
    mix_cdf,
    mix_pdf,
    mix_quantile,
    robustify,
    select_mixture,
)
from .datasets import collapse_intervals, embedded_appendix_data, parse_pwe, parse_trials
from .mapmcmc import HierarchicalSpec, McmcConfig, derive_map
from .ocsim import EmpiricalBayes, Fixed, OcRow, Scenario, oc_compare, run_scenario, simulate_current
from .records import Binomial, Design, Endpoint, NormalMean, TrialRecord, Tte
