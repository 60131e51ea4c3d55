import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from ebrmap.analysis import (
    DecisionRule,
    analyze,
    analyze_pwe,
    calibration_curve,
    eb_weight,
    posterior_update,
    ppp,
    prior_predictive,
    summarize_posterior,
    weight_grid,
)
from ebrmap.conjmix import ConjugateMixture, DomainError, MixtureComponent, robustify
from ebrmap.experiments import PUBLISHED_MAP, PUBLISHED_VAGUE
from ebrmap.records import Binomial, Design, NormalMean, Tte

from oracles import beta_binomial_pmf, enumerated_ppp, neg_binomial_pmfs

B = MixtureComponent.beta
G = MixtureComponent.gamma
N = MixtureComponent.normal


def mix(comps, weights):
    return ConjugateMixture(tuple(comps), tuple(weights))


def uniform():
    return mix([B(1, 1)], [1.0])


# ---------------------------------------------------------------------------
# predictive


def test_predictive_examples():
    bb = prior_predictive(uniform(), Design("binomial", n=2))
    np.testing.assert_allclose(bb.pmf([0, 1, 2]), [1 / 3] * 3, rtol=1e-14)
    nb = prior_predictive(mix([G(1, 1)], [1.0]), Design("tte", exposure=1.0))
    r = np.arange(12)
    np.testing.assert_allclose(nb.pmf(r), 0.5 ** (r + 1), rtol=1e-13)
    nn = prior_predictive(mix([N(0, 1)], [1.0]), Design("normal", n=1, sd=1.0))
    x = np.linspace(-4, 4, 9)
    np.testing.assert_allclose(nn.pmf(x), stats.norm(0, math.sqrt(2)).pdf(x), rtol=1e-13)


def test_predictive_family_mismatch():
    with pytest.raises(ValueError):
        prior_predictive(uniform(), Design("tte", exposure=3.0))
    with pytest.raises(ValueError):
        ppp(mix([G(1, 1)], [1.0]), Binomial(1, 4))


def test_predictive_pmf_sums_to_one():
    m = mix([B(2, 5), B(30, 3)], [0.4, 0.6])
    assert prior_predictive(m, Design("binomial", n=40)).pmf(np.arange(41)).sum() == pytest.approx(1.0, abs=1e-13)


# ---------------------------------------------------------------------------
# ppp


def test_ppp_examples():
    assert ppp(uniform(), Binomial(0, 2)) == pytest.approx(2 / 3, abs=1e-15)
    assert ppp(uniform(), Binomial(1, 2)) == 1.0


def test_ppp_mixture_example_matches_enumeration():
    a = [(1.0, 1.0), (10.0, 10.0)]
    pmf = [sum(0.5 * beta_binomial_pmf(y, 5, *ab) for ab in a) for y in range(6)]
    m = mix([B(*a[0]), B(*a[1])], [0.5, 0.5])
    assert ppp(m, Binomial(0, 5)) == pytest.approx(enumerated_ppp(pmf, 0), abs=1e-12)


@st.composite
def beta_mixtures(draw):
    k = draw(st.integers(1, 3))
    w = draw(st.lists(st.floats(0.05, 1), min_size=k, max_size=k))
    p = [(draw(st.floats(0.2, 40)), draw(st.floats(0.2, 40))) for _ in range(k)]
    return ConjugateMixture.from_arrays("beta", w, [a for a, _ in p], [b for _, b in p])


@st.composite
def gamma_mixtures(draw):
    k = draw(st.integers(1, 3))
    w = draw(st.lists(st.floats(0.05, 1), min_size=k, max_size=k))
    p = [(draw(st.floats(0.2, 30)), draw(st.floats(0.5, 60))) for _ in range(k)]
    return ConjugateMixture.from_arrays("gamma", w, [a for a, _ in p], [b for _, b in p])


@given(beta_mixtures(), st.integers(1, 25), st.data())
def test_ppp_beta_enumeration_property(m, n, data):
    y = data.draw(st.integers(0, n))
    pmf = [
        math.fsum(w * beta_binomial_pmf(t, n, c.p1, c.p2) for w, c in zip(m.weights, m.components))
        for t in range(n + 1)
    ]
    assert ppp(m, Binomial(y, n)) == pytest.approx(enumerated_ppp(pmf, y), abs=1e-12)


@given(gamma_mixtures(), st.floats(0.5, 50), st.integers(0, 200))
def test_ppp_gamma_enumeration_property(m, exposure, r):
    comp = [neg_binomial_pmfs(r, c.p1, c.p2, exposure) for c in m.components]
    pmf = [math.fsum(w * p[t] for w, p in zip(m.weights, comp)) for t in range(r + 1)]
    assert ppp(m, Tte(r, exposure)) == pytest.approx(enumerated_ppp(pmf, r), abs=1e-12)


@given(st.floats(-50, 50), st.floats(0.1, 20), st.integers(1, 200), st.floats(0.5, 50))
def test_ppp_normal_at_center_is_one(mu, s, n, sd):
    assert ppp(mix([N(mu, s)], [1.0]), NormalMean(mu, n, sd)) == pytest.approx(1.0, abs=1e-9)


@given(beta_mixtures(), st.integers(1, 30), st.data())
def test_ppp_in_unit_interval(m, n, data):
    y = data.draw(st.integers(0, n))
    assert 0.0 <= ppp(m, Binomial(y, n)) <= 1.0


# ---------------------------------------------------------------------------
# EB weight


def test_weight_grid():
    g = weight_grid(0.01)
    assert g.size == 101 and g[0] == 0.0 and g[-1] == 1.0
    g = weight_grid(0.03)
    assert g[0] == 0.0 and g[-1] == 1.0
    assert np.all(np.diff(g) > 0)


def test_eb_weight_center_gives_zero():
    m = mix([N(0.0, 1.0)], [1.0])
    r = eb_weight(m, N(0.0, 10.0), NormalMean(0.0, 10, 2.0), gamma=0.5)
    assert r.w_eb == 0.0 and not r.fallback_used


def test_eb_weight_oncology():
    r = eb_weight(PUBLISHED_MAP, PUBLISHED_VAGUE, Tte(32, 117.6), 0.9, 0.01)
    assert r.w_eb == pytest.approx(0.54, abs=0.02)


def test_eb_weight_fallback():
    r = eb_weight(mix([B(12, 28)], [1.0]), B(1, 1), Binomial(0, 2), 0.999)
    assert r.w_eb == 1.0 and r.fallback_used
    assert r.curve[-1][1] == pytest.approx(2 / 3)
    assert max(p for _, p in r.curve) < 0.999


def test_eb_weight_validation():
    with pytest.raises(DomainError, match=r"gamma must be in \(0,1\)"):
        eb_weight(uniform(), B(1, 1), Binomial(1, 3), 1.5)
    with pytest.raises(DomainError):
        eb_weight(uniform(), B(1, 1), Binomial(1, 3), 0.5, grid_step=0.1)
    with pytest.raises(ValueError):
        eb_weight(uniform(), G(1, 1), Binomial(1, 3), 0.5)


@given(beta_mixtures(), st.integers(1, 40), st.floats(0.05, 0.99), st.data())
def test_eb_curve_matches_direct_ppp(m, n, gamma, data):
    y = data.draw(st.integers(0, n))
    d = Binomial(y, n)
    r = eb_weight(m, B(1, 1), d, gamma, 0.05)
    for w, p in r.curve:
        assert p == pytest.approx(ppp(robustify(m, B(1, 1), w), d), abs=1e-12)
    assert len(r.curve) == 21 and r.curve[0][0] == 0.0 and r.curve[-1][0] == 1.0
    # recheck the argmin from the recorded curve
    hits = [w for w, p in r.curve if p >= gamma]
    assert r.w_eb == (hits[0] if hits else 1.0)
    assert r.fallback_used == (not hits)


@given(gamma_mixtures(), st.floats(1, 80), st.integers(0, 80), st.floats(0.05, 0.99))
def test_grid_refinement_never_increases_weight(m, exposure, r, gamma):
    d = Tte(r, exposure)
    vague = G(m.mean(), 1.0)
    ws = [eb_weight(m, vague, d, gamma, s).w_eb for s in (0.05, 0.01, 0.002)]
    assert ws[1] <= ws[0] + 1e-12
    assert ws[2] <= ws[1] + 1e-12


# ---------------------------------------------------------------------------
# calibration


def test_calibration_cardinality_and_monotonicity():
    m = mix([B(12, 28), B(3, 5)], [0.8, 0.2])
    rows = calibration_curve(m, B(1, 1), Design("binomial", n=50), [0.7, 0.8, 0.9])
    assert len(rows) == 3 * 51
    by = {(r.gamma, r.observed): r.w_eb for r in rows}
    for y in range(51):
        assert by[(0.7, y)] <= by[(0.8, y)] <= by[(0.9, y)]


def test_calibration_oncology_rows():
    rows = calibration_curve(PUBLISHED_MAP, PUBLISHED_VAGUE, Design("tte", exposure=117.6),
                             [0.85, 0.9, 0.95], [32])
    np.testing.assert_allclose([r.w_eb for r in rows], [0.47, 0.54, 0.62], atol=0.02)


def test_calibration_needs_grid_for_continuous():
    with pytest.raises(ValueError):
        calibration_curve(mix([N(0, 1)], [1.0]), N(0, 10), Design("normal", n=5, sd=1.0), [0.9])


# ---------------------------------------------------------------------------
# posterior


def test_posterior_examples():
    p = posterior_update(uniform(), Binomial(3, 10))
    assert p.components == (B(4, 8),)
    p = posterior_update(mix([B(1, 1), B(10, 10)], [0.5, 0.5]), Binomial(0, 5))
    m1 = 1 / 6
    m2 = math.prod((10 + i) / (20 + i) for i in range(5))
    assert p.weights[0] == pytest.approx(m1 / (m1 + m2), abs=1e-12)
    assert p.weights == pytest.approx((0.780, 0.220), abs=1e-3)
    assert p.components == (B(1, 6), B(10, 15))
    p = posterior_update(mix([G(1, 1)], [1.0]), Tte(2, 3.0))
    assert p.components == (G(3, 4),)


def test_posterior_normal_precision_weighting():
    p = posterior_update(mix([N(0, 2)], [1.0]), NormalMean(3.0, 4, 4.0))
    # prior precision 1/4, data precision 4/16
    assert p.components[0].p1 == pytest.approx(1.5)
    assert p.components[0].p2 == pytest.approx(math.sqrt(2.0))


def test_posterior_tiny_exposure_keeps_weights():
    m = mix([G(2, 5), G(9, 3), G(0.5, 1)], [0.2, 0.5, 0.3])
    p = posterior_update(m, Tte(0, 1e-9))
    np.testing.assert_allclose(p.weights, m.weights, atol=1e-6)


def test_posterior_zero_weight_component():
    m = robustify(mix([B(5, 5)], [1.0]), B(1, 1), 0.0)
    p = posterior_update(m, Binomial(3, 9))
    assert p.weights[1] == 0.0


# ---------------------------------------------------------------------------
# summaries and rules


def test_summary_uniform_rule():
    s = summarize_posterior(uniform(), DecisionRule("greater", 0.5, 0.9))
    assert s.rule_probability == pytest.approx(0.5)
    assert s.success is False
    assert s.ci[0] < s.median < s.ci[1]


def test_rule_parsing_and_validation():
    r = DecisionRule.parse("<,0.5,0.9")
    assert r.direction == "less" and r.theta_star == 0.5
    with pytest.raises(ValueError):
        DecisionRule("sideways", 0.5, 0.9)
    with pytest.raises(DomainError):
        DecisionRule("less", 0.5, 1.0)
    with pytest.raises(ValueError):
        DecisionRule.parse("less,0.5")


def test_rule_outside_support_is_clamped():
    assert DecisionRule("greater", 1.0, 0.5).probability(uniform()) == 0.0
    assert DecisionRule("less", -1.0, 0.5).probability(mix([G(2, 2)], [1.0])) == 0.0


@pytest.mark.parametrize(
    "w_v, median, lo, hi",
    [(0.54, 0.281, 0.199, 0.384), (0.0, 0.285, 0.203, 0.386), (1.0, 0.270, 0.187, 0.375)],
)
def test_oncology_posterior_summaries(w_v, median, lo, hi):
    res = analyze(PUBLISHED_MAP, PUBLISHED_VAGUE, Tte(32, 117.6), w_v=w_v)
    assert res.summary.median == pytest.approx(median, abs=0.005)
    assert res.summary.ci == pytest.approx((lo, hi), abs=0.005)


def test_analyze_argument_check():
    with pytest.raises(ValueError):
        analyze(uniform(), B(1, 1), Binomial(1, 3))
    with pytest.raises(ValueError):
        analyze(uniform(), B(1, 1), Binomial(1, 3), gamma=0.5, w_v=0.2)


# ---------------------------------------------------------------------------
# piecewise-exponential analysis


def test_pwe_single_interval_equals_scalar():
    d = Tte(32, 117.6)
    (r,) = analyze_pwe([PUBLISHED_MAP], [d], 0.9, PUBLISHED_VAGUE)
    s = analyze(PUBLISHED_MAP, PUBLISHED_VAGUE, d, gamma=0.9)
    assert r.w_v == s.w_v and r.summary.median == s.summary.median


def test_pwe_identical_intervals():
    d = Tte(7, 20.0)
    a, b = analyze_pwe([PUBLISHED_MAP, PUBLISHED_MAP], [d, d], [0.8, 0.8])
    assert a.w_v == b.w_v and a.summary.ci == b.summary.ci


def test_pwe_length_mismatch():
    with pytest.raises(ValueError):
        analyze_pwe([PUBLISHED_MAP], [Tte(1, 2.0), Tte(1, 2.0)], 0.9)
    with pytest.raises(ValueError):
        analyze_pwe([PUBLISHED_MAP, PUBLISHED_MAP], [Tte(1, 2.0), Tte(1, 2.0)], [0.9])
    with pytest.raises(ValueError):
        analyze_pwe([], [], 0.9)


def test_pwe_default_vague_is_median_centred():
    (r,) = analyze_pwe([PUBLISHED_MAP], [Tte(3, 10.0)], 0.9)
    vague = r.prior.components[-1]
    assert vague.p2 == 1.0
    assert vague.mean == pytest.approx(PUBLISHED_MAP.quantile(0.5))
