"""Prior predictives, prior-predictive p-values, empirical Bayes weights and
conjugate posterior updates for robustified MAP priors."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import special

from .conjmix import (
    ConjugateMixture,
    DomainError,
    Family,
    MixtureComponent,
    default_vague,
    robustify,
)
from .records import Binomial, Design, Endpoint, NormalMean, Payload, Tte, observed_value


def _check_family(prior: ConjugateMixture, design: Design):
    if prior.family is not design.endpoint.family:
        raise ValueError(
            f"{prior.family.value} prior does not match a {design.endpoint.value} endpoint"
        )


@dataclass(frozen=True)
class PredictiveMixture:
    """Componentwise prior predictive of the current-trial statistic.

    ``kind`` is ``beta_binomial`` (size = n), ``neg_binomial`` (size =
    exposure) or ``normal`` (size = standard error of the sample mean).
    Component parameters are those of the generating prior.
    """

    kind: str
    weights: np.ndarray
    p1: np.ndarray
    p2: np.ndarray
    size: float

    @property
    def discrete(self) -> bool:
        return self.kind != "normal"

    def component_pmf(self, t):
        """Per-component mass (discrete) or density (normal) at t, shape (K,) + shape(t)."""
        t = np.asarray(t, dtype=float)[..., None]
        a, b = self.p1, self.p2
        if self.kind == "beta_binomial":
            n = self.size
            lp = (
                special.gammaln(n + 1) - special.gammaln(t + 1) - special.gammaln(n - t + 1)
                + special.betaln(t + a, n - t + b) - special.betaln(a, b)
            )
            out = np.where((t >= 0) & (t <= n) & (t == np.floor(t)), np.exp(lp), 0.0)
        elif self.kind == "neg_binomial":
            q = b / (b + self.size)
            lp = (
                special.gammaln(t + a) - special.gammaln(a) - special.gammaln(t + 1)
                + a * np.log(q) + special.xlog1py(t, -q)
            )
            out = np.where((t >= 0) & (t == np.floor(t)), np.exp(lp), 0.0)
        else:
            sd = np.sqrt(b * b + self.size**2)
            z = (t - a) / sd
            out = np.exp(-0.5 * z * z) / (sd * math.sqrt(2 * math.pi))
        return np.moveaxis(out, -1, 0)

    def pmf(self, t):
        return np.tensordot(self.weights, self.component_pmf(t), axes=1)

    def component_tails(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        """Per-component P(T <= t) and P(T >= t); discrete tails both include t."""
        a, b = self.p1, self.p2
        if self.kind == "beta_binomial":
            n = int(self.size)
            k = np.arange(n + 1)
            t = int(t)
            pm = self.component_pmf(k)  # (K, n + 1)
            le = pm[:, : t + 1].sum(axis=1) if t >= 0 else np.zeros_like(a)
            ge = pm[:, max(t, 0):].sum(axis=1) if t <= n else np.zeros_like(a)
            return le, ge
        if self.kind == "neg_binomial":
            q = b / (b + self.size)
            t = int(t)
            if t < 0:
                return np.zeros_like(a), np.ones_like(a)
            le = special.betainc(a, t + 1.0, q)
            ge = np.ones_like(a) if t == 0 else special.betainc(float(t), a, 1.0 - q)
            return le, ge
        z = (t - a) / np.sqrt(b * b + self.size**2)
        return special.ndtr(z), special.ndtr(-z)

    def tails(self, t) -> tuple[float, float]:
        le, ge = self.component_tails(t)
        return float(self.weights @ le), float(self.weights @ ge)


def prior_predictive(prior: ConjugateMixture, design: Design | Payload) -> PredictiveMixture:
    design = Design.of(design)
    _check_family(prior, design)
    if design.endpoint is Endpoint.BINOMIAL:
        kind, size = "beta_binomial", float(design.n)
    elif design.endpoint is Endpoint.TTE:
        kind, size = "neg_binomial", float(design.exposure)
    else:
        kind, size = "normal", design.sd / math.sqrt(design.n)
    return PredictiveMixture(kind, prior.w, prior.p1, prior.p2, size)


def _two_sided(le, ge):
    return np.minimum(1.0, 2.0 * np.minimum(le, ge))


def ppp(prior: ConjugateMixture, data: Payload) -> float:
    """Two-sided prior-predictive p-value of the observed statistic, capped at 1."""
    pred = prior_predictive(prior, data)
    le, ge = pred.tails(observed_value(data))
    return float(_two_sided(le, ge))


# ---------------------------------------------------------------------------
# empirical Bayes weight


def weight_grid(step: float) -> np.ndarray:
    n = 1.0 / step
    if abs(n - round(n)) < 1e-9:
        return np.linspace(0.0, 1.0, int(round(n)) + 1)
    return np.append(np.arange(0.0, 1.0, step), 1.0)


def _validate_gamma(gamma: float, grid_step: float):
    if not 0.0 < gamma < 1.0:
        raise DomainError("gamma must be in (0,1)")
    if not 0.0 < grid_step <= 0.05:
        raise DomainError("grid_step must be in (0,0.05]")


@dataclass(frozen=True)
class EbWeightResult:
    gamma: float
    grid_step: float
    grid: np.ndarray
    ppp: np.ndarray
    w_eb: float
    fallback_used: bool

    @property
    def curve(self) -> list[tuple[float, float]]:
        return list(zip(self.grid.tolist(), self.ppp.tolist()))

    def to_dict(self) -> dict:
        return {
            "gamma": self.gamma,
            "grid_step": self.grid_step,
            "w_eb": self.w_eb,
            "fallback_used": self.fallback_used,
            "curve": [{"w_v": w, "ppp": p} for w, p in self.curve],
        }


def _split_tails(map_mix, vague, data):
    """P(T <= t), P(T >= t) under the MAP mixture and under the vague component."""
    t = observed_value(data)
    le_m, ge_m = prior_predictive(map_mix, data).tails(t)
    le_v, ge_v = prior_predictive(ConjugateMixture.single(vague), data).tails(t)
    return le_m, ge_m, le_v, ge_v


def select_weight(grid, curve, gamma) -> tuple[float, bool]:
    """Smallest grid weight whose p-value reaches gamma, else 1."""
    hits = np.flatnonzero(curve >= gamma)
    if hits.size:
        return float(grid[hits[0]]), False
    return 1.0, True


def eb_weight(
    map_mix: ConjugateMixture,
    vague: MixtureComponent,
    data: Payload,
    gamma: float,
    grid_step: float = 0.01,
) -> EbWeightResult:
    """Smallest vague-component weight on the grid whose p-value reaches gamma."""
    _validate_gamma(gamma, grid_step)
    if vague.family is not map_mix.family:
        raise ValueError("vague component and map prior differ in family")
    grid = weight_grid(grid_step)
    le_m, ge_m, le_v, ge_v = _split_tails(map_mix, vague, data)
    # predictive tails are linear in the vague weight
    curve = _two_sided((1 - grid) * le_m + grid * le_v, (1 - grid) * ge_m + grid * ge_v)
    w, fallback = select_weight(grid, curve, gamma)
    curve.setflags(write=False)
    grid.setflags(write=False)
    return EbWeightResult(float(gamma), float(grid_step), grid, curve, w, fallback)


@dataclass(frozen=True)
class CalibrationRow:
    gamma: float
    observed: float
    w_eb: float
    ppp_at_w0: float
    ppp_at_w1: float


CALIBRATION_COLUMNS = ("gamma", "observed", "w_eb", "ppp_at_w0", "ppp_at_w1")


def calibration_curve(
    map_mix: ConjugateMixture,
    vague: MixtureComponent,
    design: Design | Payload,
    gammas: Sequence[float],
    observed_grid: Sequence[float] | None = None,
    grid_step: float = 0.01,
) -> list[CalibrationRow]:
    """EB weight for every (gamma, observed statistic) pair.

    With no ``observed_grid`` a binomial design enumerates 0..n; other
    endpoints need an explicit grid.
    """
    design = Design.of(design)
    _check_family(map_mix, design)
    for g in gammas:
        _validate_gamma(g, grid_step)
    if observed_grid is None:
        if design.endpoint is not Endpoint.BINOMIAL:
            raise ValueError(f"{design.endpoint.value} calibration needs an observed grid")
        observed_grid = range(design.n + 1)
    grid = weight_grid(grid_step)
    rows = []
    per_obs = []
    for obs in observed_grid:
        data = design.observe(obs)
        le_m, ge_m, le_v, ge_v = _split_tails(map_mix, vague, data)
        curve = _two_sided((1 - grid) * le_m + grid * le_v, (1 - grid) * ge_m + grid * ge_v)
        per_obs.append((observed_value(data), curve))
    for g in gammas:
        for obs, curve in per_obs:
            w, _ = select_weight(grid, curve, g)
            rows.append(CalibrationRow(float(g), obs, w, float(curve[0]), float(curve[-1])))
    return rows


def write_calibration_csv(rows: Sequence[CalibrationRow], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CALIBRATION_COLUMNS)
        for r in rows:
            w.writerow([format(getattr(r, c), ".17g") for c in CALIBRATION_COLUMNS])


# ---------------------------------------------------------------------------
# posterior


def posterior_update(prior: ConjugateMixture, data: Payload) -> ConjugateMixture:
    """Conjugate update of every component; weights rescale by marginal likelihoods."""
    design = Design.of(data)
    _check_family(prior, design)
    a, b, w = prior.p1, prior.p2, prior.w
    if isinstance(data, Binomial):
        y, n = data.responders, data.n
        lml = special.betaln(a + y, b + n - y) - special.betaln(a, b)  # binomial coefficient cancels
        p1, p2 = a + y, b + n - y
    elif isinstance(data, Tte):
        r, e = data.events, data.exposure
        lml = (
            special.gammaln(r + a) - special.gammaln(a)
            + a * np.log(b / (b + e)) + special.xlogy(r, e / (b + e))
        )
        p1, p2 = a + r, b + e
    elif isinstance(data, NormalMean):
        se2 = data.sd**2 / data.n
        v = b * b + se2
        lml = -0.5 * (data.mean - a) ** 2 / v - 0.5 * np.log(v)
        prec = 1.0 / (b * b) + 1.0 / se2
        p1 = (a / (b * b) + data.mean / se2) / prec
        p2 = np.sqrt(1.0 / prec)
    else:
        raise TypeError(f"unsupported data {data!r}")
    with np.errstate(divide="ignore"):
        lw = np.log(w) + lml
    lw -= lw[np.isfinite(lw)].max()
    new_w = np.exp(lw)
    return ConjugateMixture.from_arrays(prior.family, new_w, p1, p2)


@dataclass(frozen=True)
class DecisionRule:
    """Success when Pr(theta <direction> theta_star) > prob_cutoff."""

    direction: str
    theta_star: float
    prob_cutoff: float

    def __post_init__(self):
        d = {"<": "less", ">": "greater", "less": "less", "greater": "greater"}.get(self.direction)
        if d is None:
            raise ValueError(f"rule direction must be 'less' or 'greater', got {self.direction!r}")
        object.__setattr__(self, "direction", d)
        if not 0.0 < self.prob_cutoff < 1.0:
            raise DomainError("prob_cutoff must be in (0,1)")

    @classmethod
    def parse(cls, text: str) -> "DecisionRule":
        """``less,0.5,0.9`` or ``<,0.5,0.9``."""
        try:
            d, star, cut = (v.strip() for v in text.split(","))
            return cls(d, float(star), float(cut))
        except ValueError as exc:
            raise ValueError(f"cannot parse rule {text!r}: {exc}") from None

    def probability(self, posterior: ConjugateMixture) -> float:
        x = self.theta_star
        if posterior.family is Family.BETA:
            x = min(max(x, 0.0), 1.0)
        elif posterior.family is Family.GAMMA:
            x = max(x, 0.0)
        p = posterior.cdf(x)
        return float(p if self.direction == "less" else 1.0 - p)

    def to_dict(self) -> dict:
        return {"direction": self.direction, "theta_star": self.theta_star, "prob_cutoff": self.prob_cutoff}


@dataclass(frozen=True)
class PosteriorSummary:
    posterior: ConjugateMixture
    median: float
    ci: tuple[float, float]
    ci_level: float
    rule_probability: float | None = None
    success: bool | None = None

    def to_dict(self) -> dict:
        return {
            "median": self.median,
            "ci": list(self.ci),
            "ci_level": self.ci_level,
            "rule_probability": self.rule_probability,
            "success": self.success,
        }


def summarize_posterior(
    posterior: ConjugateMixture, rule: DecisionRule | None = None, ci_level: float = 0.95
) -> PosteriorSummary:
    """Median, equal-tailed interval and the rule's posterior probability."""
    if not 0.0 < ci_level < 1.0:
        raise DomainError("ci_level must be in (0,1)")
    tail = 0.5 * (1.0 - ci_level)
    med = posterior.quantile(0.5)
    ci = (posterior.quantile(tail), posterior.quantile(1.0 - tail))
    prob = success = None
    if rule is not None:
        prob = rule.probability(posterior)
        success = prob > rule.prob_cutoff
    return PosteriorSummary(posterior, med, ci, ci_level, prob, success)


# ---------------------------------------------------------------------------
# pipelines


@dataclass(frozen=True)
class AnalysisResult:
    w_v: float
    prior: ConjugateMixture
    summary: PosteriorSummary
    eb: EbWeightResult | None = None

    @property
    def posterior(self) -> ConjugateMixture:
        return self.summary.posterior


def analyze(
    map_mix: ConjugateMixture,
    vague: MixtureComponent,
    data: Payload,
    *,
    gamma: float | None = None,
    w_v: float | None = None,
    grid_step: float = 0.01,
    rule: DecisionRule | None = None,
    ci_level: float = 0.95,
) -> AnalysisResult:
    """Robustify (EB weight when ``gamma`` is given, else the fixed ``w_v``), update, summarise."""
    if (gamma is None) == (w_v is None):
        raise ValueError("give exactly one of gamma or w_v")
    eb = None
    if gamma is not None:
        eb = eb_weight(map_mix, vague, data, gamma, grid_step)
        w_v = eb.w_eb
    prior = robustify(map_mix, vague, w_v)
    post = posterior_update(prior, data)
    return AnalysisResult(float(w_v), prior, summarize_posterior(post, rule, ci_level), eb)


def analysis_report(res: AnalysisResult, map_mix, vague, data, rule=None) -> dict:
    from dataclasses import asdict

    inputs = {
        "map": map_mix.to_dict(),
        "vague": {"family": vague.family.value, "params": [vague.p1, vague.p2]},
        "current": {"endpoint": Design.of(data).endpoint.value, **asdict(data)},
        "rule": rule.to_dict() if rule else None,
    }
    return {
        "inputs": inputs,
        "w_v": res.w_v,
        "eb": res.eb.to_dict() if res.eb else None,
        "prior": res.prior.to_dict(),
        "posterior": res.posterior.to_dict(),
        "summary": res.summary.to_dict(),
        "verdict": None if res.summary.success is None else ("success" if res.summary.success else "failure"),
    }


def analyze_pwe(
    per_interval_map: Sequence[ConjugateMixture],
    per_interval_data: Sequence[Payload],
    gammas: float | Sequence[float],
    vague: MixtureComponent | Sequence[MixtureComponent] | None = None,
    *,
    vague_center: str | float = "median",
    grid_step: float = 0.01,
    rule: DecisionRule | None = None,
    ci_level: float = 0.95,
) -> list[AnalysisResult]:
    """Independent EB analysis per piecewise-exponential interval.

    ``gammas`` and ``vague`` may be scalars or per-interval lists; with no
    vague component each interval gets the one-event Gamma centred on its
    MAP prior (``vague_center``).
    """
    maps, data = list(per_interval_map), list(per_interval_data)
    n = len(maps)
    if n == 0 or len(data) != n:
        raise ValueError(f"{n} interval priors but {len(data)} interval datasets")
    gam = [float(gammas)] * n if np.ndim(gammas) == 0 else [float(g) for g in gammas]
    if len(gam) != n:
        raise ValueError(f"{len(gam)} thresholds for {n} intervals")
    if vague is None:
        vg = [default_vague(m.family, m, vague_center) for m in maps]
    elif isinstance(vague, MixtureComponent):
        vg = [vague] * n
    else:
        vg = list(vague)
        if len(vg) != n:
            raise ValueError(f"{len(vg)} vague components for {n} intervals")
    return [
        analyze(m, v, d, gamma=g, grid_step=grid_step, rule=rule, ci_level=ci_level)
        for m, v, d, g in zip(maps, vg, data, gam)
    ]



