"""Ready-made configurations for the oncology re-analysis and the simulation studies."""
from __future__ import annotations

import numpy as np

from .analysis import DecisionRule
from .conjmix import ConjugateMixture, MixtureComponent, default_vague, select_mixture
from .datasets import APPENDIX_STUDY_IDS, collapse_intervals, embedded_appendix_data
from .mapmcmc import HierarchicalSpec, McmcConfig, derive_map
from .ocsim import Scenario
from .records import Design, NormalMean, TrialRecord, Tte

# ---------------------------------------------------------------------------
# oncology data, first 1.5 years pooled

ONCOLOGY_COLLAPSE = (1, 6)

PUBLISHED_MAP = ConjugateMixture(
    (MixtureComponent.gamma_mn(0.37, 21.4), MixtureComponent.gamma_mn(0.62, 3.8)), (0.82, 0.18)
)
PUBLISHED_VAGUE = MixtureComponent.gamma_mn(0.42, 1.0)
ONCOLOGY_SPEC = HierarchicalSpec("tte", mu_mean=0.0, mu_sd=10.0, tau_scale=0.5)


def oncology_records(collapse=ONCOLOGY_COLLAPSE) -> tuple[list[TrialRecord], Tte]:
    """Nine historical records and the current (events, exposure) pooled over the interval range."""
    recs = collapse_intervals(embedded_appendix_data(), *collapse)
    hist = [r for r in recs if r.study_id != APPENDIX_STUDY_IDS[-1]]
    current = next(r for r in recs if r.study_id == APPENDIX_STUDY_IDS[-1])
    return hist, current.payload


def oncology_map(seed: int = 1, iterations: int = 10_000, k_max: int = 5):
    """MCMC plus Gamma-mixture selection on the pooled historical data."""
    hist, _ = oncology_records()
    draws = derive_map(hist, ONCOLOGY_SPEC, McmcConfig(iterations=iterations, seed=seed))
    mix, report = select_mixture(draws.theta_new, "gamma", k_max, seed=seed)
    return draws, mix, report


# ---------------------------------------------------------------------------
# normal endpoint with known SD
#
# The original five studies are not bundled. This synthetic set has the same
# size range (20 to 328), SD 40 and a pooled mean near -46.8, and gives a MAP
# prior with an ESS in the low thirties.

NORMAL_SIGMA = 40.0
NORMAL_HISTORY = ((-51.0, 74), (-49.0, 166), (-38.0, 328), (-47.0, 20), (-54.0, 58))
NORMAL_SPEC = HierarchicalSpec("normal", mu_mean=-50.0, mu_sd=40.0, tau_scale=5.0)
NORMAL_VAGUE = MixtureComponent.normal(-50.0, 40.0)
NORMAL_RULE = DecisionRule("less", -40.0, 0.95)
NORMAL_TRUTHS = tuple(np.arange(-55.0, -34.9, 2.5).tolist())
COMPARATORS = ("fixed:0", "fixed:0.5", "fixed:1")


def normal_history() -> list[TrialRecord]:
    return [
        TrialRecord(f"Study {i + 1}", NormalMean(m, n, NORMAL_SIGMA))
        for i, (m, n) in enumerate(NORMAL_HISTORY)
    ]


def normal_map(seed: int = 1, k_max: int = 4) -> ConjugateMixture:
    draws = derive_map(normal_history(), NORMAL_SPEC, McmcConfig(seed=seed))
    return select_mixture(draws.theta_new, "normal", k_max, seed=seed)[0]


def normal_scenario(
    replications: int = 5000, seed: int = 2024, map_seed: int = 1, gamma: float = 0.9, n_c: int = 50
) -> Scenario:
    return Scenario(
        map_mix=normal_map(map_seed),
        vague=NORMAL_VAGUE,
        methods=(f"eb:{gamma}",) + COMPARATORS,
        design=Design("normal", n=n_c, sd=NORMAL_SIGMA),
        truth_grid=NORMAL_TRUTHS,
        rule=NORMAL_RULE,
        replications=replications,
        seed=seed,
    )


# ---------------------------------------------------------------------------
# time-to-event endpoint, simulated history

TTE_EXPOSURES = (5.0, 10.0, 15.0, 20.0)
TTE_HISTORY_HAZARD = 0.4
TTE_RULE = DecisionRule("less", 0.5, 0.9)
TTE_TRUTHS = (0.3, 0.4, 0.5, 0.6, 0.7)


def tte_history(seed: int) -> list[TrialRecord]:
    """One Poisson draw of deaths per historical study at the common hazard."""
    rng = np.random.default_rng(np.random.SeedSequence([seed]))
    return [
        TrialRecord(f"H{i + 1}", Tte(int(rng.poisson(TTE_HISTORY_HAZARD * e)), e))
        for i, e in enumerate(TTE_EXPOSURES)
    ]


def tte_scenario(
    replications: int = 1000, seed: int = 1, history_seed: int = 1, gamma: float = 0.75
) -> Scenario:
    draws = derive_map(tte_history(history_seed), ONCOLOGY_SPEC, McmcConfig(seed=history_seed))
    mix = select_mixture(draws.theta_new, "gamma", 5, seed=history_seed)[0]
    return Scenario(
        map_mix=mix,
        vague=default_vague("gamma", mix, "median"),
        methods=(f"eb:{gamma}",) + COMPARATORS,
        design=Design("tte", exposure=30.0),
        truth_grid=TTE_TRUTHS,
        rule=TTE_RULE,
        replications=replications,
        seed=seed,
    )
