import math
from pathlib import Path

import numpy as np
import pytest
from scipy import stats

from ebrmap import ocsim
from ebrmap.analysis import DecisionRule, eb_weight
from ebrmap.conjmix import ConjugateMixture, MixtureComponent
from ebrmap.experiments import NORMAL_SIGMA, NORMAL_VAGUE, normal_map
from ebrmap.ocsim import (
    EmpiricalBayes,
    Fixed,
    Scenario,
    SimulationError,
    load_scenario,
    oc_compare,
    parse_method,
    read_oc_csv,
    replicate_stream,
    run_scenario,
    save_scenario,
    simulate_current,
    write_oc_csv,
)
from ebrmap.records import Design, NormalMean

SCENARIOS = Path(__file__).resolve().parents[1] / "scenarios"
UNIFORM = ConjugateMixture((MixtureComponent.beta(1, 1),), (1.0,))


def binary_scenario(**kw):
    base = dict(
        map_mix=ConjugateMixture((MixtureComponent.beta(12, 28), MixtureComponent.beta(2, 3)), (0.7, 0.3)),
        vague=MixtureComponent.beta(1, 1),
        methods=("eb:0.8", "fixed:0", "fixed:1"),
        design=Design("binomial", n=20),
        truth_grid=(0.2, 0.5),
        rule=DecisionRule("greater", 0.2, 0.9),
        replications=200,
        seed=5,
    )
    base.update(kw)
    return Scenario(**base)


def test_simulate_degenerate_binomial():
    rng = np.random.default_rng(0)
    d = Design("binomial", n=17)
    assert all(simulate_current(0.0, d, rng).responders == 0 for _ in range(50))
    assert all(simulate_current(1.0, d, rng).responders == 17 for _ in range(50))


def test_simulate_poisson_mean():
    rng = np.random.default_rng(1)
    d = Design("tte", exposure=30.0)
    x = [simulate_current(0.4, d, rng).events for _ in range(100_000)]
    assert np.mean(x) == pytest.approx(12.0, abs=0.1)


def test_simulate_normal_spread():
    rng = np.random.default_rng(2)
    d = Design("normal", n=25, sd=10.0)
    x = np.array([simulate_current(-3.0, d, rng).mean for _ in range(20_000)])
    assert x.mean() == pytest.approx(-3.0, abs=0.05)
    assert x.std() == pytest.approx(2.0, rel=0.03)


def test_simulate_truth_support():
    with pytest.raises(ValueError):
        simulate_current(1.2, Design("binomial", n=5), np.random.default_rng(0))
    with pytest.raises(ValueError):
        simulate_current(-0.1, Design("tte", exposure=5.0), np.random.default_rng(0))


def test_impossible_rule_never_succeeds():
    rows = run_scenario(binary_scenario(rule=DecisionRule("greater", 1.0, 0.5)))
    assert all(r.pos == 0.0 for r in rows)


def test_row_invariants():
    for r in run_scenario(binary_scenario()):
        assert 0 <= r.pos <= 1 and r.mse >= 0 and r.abs_bias >= 0
        assert r.mc_se_pos == pytest.approx(math.sqrt(r.pos * (1 - r.pos) / r.replications))


def test_vague_only_matches_enumeration():
    s = Scenario(UNIFORM, MixtureComponent.beta(1, 1), ("fixed:1",), Design("binomial", n=20),
                 (0.5,), DecisionRule("greater", 0.2, 0.9), replications=10_000, seed=17)
    (row,) = run_scenario(s)
    success = [y for y in range(21) if stats.beta(1 + y, 21 - y).sf(0.2) > 0.9]
    oracle = stats.binom(20, 0.5).pmf(success).sum()
    assert abs(row.pos - oracle) <= 3 * math.sqrt(oracle * (1 - oracle) / 10_000)


def test_thread_count_does_not_change_results():
    s = binary_scenario(replications=300)
    a = run_scenario(s, threads=1)
    b = run_scenario(s, threads=4)
    assert a == b


def test_replicate_streams_are_distinct():
    a = replicate_stream(1, 0, 0).random(4)
    b = replicate_stream(1, 0, 1).random(4)
    c = replicate_stream(1, 1, 0).random(4)
    assert not np.array_equal(a, b) and not np.array_equal(a, c)
    np.testing.assert_array_equal(a, replicate_stream(1, 0, 0).random(4))


def test_failure_carries_context(monkeypatch):
    real = ocsim.posterior_update
    calls = {"n": 0}

    def flaky(prior, data):
        calls["n"] += 1
        if calls["n"] == 7:
            raise FloatingPointError("boom")
        return real(prior, data)

    monkeypatch.setattr(ocsim, "posterior_update", flaky)
    with pytest.raises(SimulationError, match=r"truth=0.2 .*method=.*replicate=2: boom"):
        run_scenario(binary_scenario())


def test_compare_with_itself_is_zero():
    rows = run_scenario(binary_scenario())
    c = oc_compare(rows, "w=0")
    for d in c.deltas:
        if d.method == "w=0":
            assert d.d_pos == d.d_abs_bias == d.d_mse == 0.0
    assert c.max_abs["w=0"] == {"pos": 0.0, "abs_bias": 0.0, "mse": 0.0}
    with pytest.raises(ValueError):
        oc_compare(rows, "w=0.25")


def test_method_parsing():
    assert parse_method("fixed:0.5") == Fixed(0.5)
    assert parse_method("eb:0.9") == EmpiricalBayes(0.9)
    assert parse_method({"kind": "eb", "gamma": 0.75, "grid_step": 0.005}) == EmpiricalBayes(0.75, 0.005)
    for bad in ("fixed:1.5", "eb:1.0", "mystery:1", "fixed:"):
        with pytest.raises(ValueError):
            parse_method(bad)


def test_scenario_validation():
    with pytest.raises(ValueError):
        binary_scenario(replications=0)
    with pytest.raises(ValueError):
        binary_scenario(truth_grid=(0.5, 1.5))
    with pytest.raises(ValueError):
        binary_scenario(methods=("fixed:0", "fixed:0"))
    with pytest.raises(ValueError):
        binary_scenario(design=Design("tte", exposure=3.0))


def test_scenario_round_trip(tmp_path):
    s = binary_scenario()
    save_scenario(s, tmp_path / "s.json")
    assert load_scenario(tmp_path / "s.json") == s


def test_bundled_scenarios_load():
    s = load_scenario(SCENARIOS / "binary_small.toml")
    assert s.design.n == 20 and s.rule.direction == "greater"
    for name in ("normal_known_sd.json", "tte_exponential.json"):
        assert load_scenario(SCENARIOS / name).replications >= 1000


def test_oc_csv_round_trip(tmp_path):
    rows = run_scenario(binary_scenario())
    write_oc_csv(rows, tmp_path / "oc.csv")
    assert read_oc_csv(tmp_path / "oc.csv") == rows


# ---------------------------------------------------------------------------
# EB weight behaviour in the known-SD normal configuration


@pytest.fixture(scope="module")
def normal_prior():
    return normal_map()


def test_weight_near_zero_at_predictive_center(normal_prior):
    center = normal_prior.mean()
    for n_c in (25, 50, 100):
        r = eb_weight(normal_prior, NORMAL_VAGUE, NormalMean(center, n_c, NORMAL_SIGMA), 0.9)
        assert r.w_eb <= 0.2


def test_weight_tends_to_one_under_conflict(normal_prior):
    s = Scenario(normal_prior, NORMAL_VAGUE, ("eb:0.9",), Design("normal", n=50, sd=NORMAL_SIGMA),
                 (-80.0, -10.0), DecisionRule("less", -40.0, 0.95), replications=300, seed=3)
    for row in run_scenario(s):
        assert row.median_w >= 0.9


def test_smaller_gamma_widens_window(normal_prior):
    ys = np.linspace(-70, -25, 91)
    for g_lo, g_hi in ((0.8, 0.85), (0.85, 0.9)):
        lo = [eb_weight(normal_prior, NORMAL_VAGUE, NormalMean(y, 50, NORMAL_SIGMA), g_lo).w_eb for y in ys]
        hi = [eb_weight(normal_prior, NORMAL_VAGUE, NormalMean(y, 50, NORMAL_SIGMA), g_hi).w_eb for y in ys]
        assert all(a <= b for a, b in zip(lo, hi))
