"""Mixtures of conjugate Beta, Gamma and Normal densities.

Everything here is an immutable value plus pure functions: density, CDF and
quantile evaluation, EM fitting of a mixture to a sample of draws,
robustification with a vague component, and a moment-based effective sample
size.

Gamma components are stored as (shape, rate).  The (mean, n) form used in
published mixtures maps to ``shape = mean * n, rate = n``.
"""
from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import optimize, special

log = logging.getLogger(__name__)

WEIGHT_FLOOR = 1e-6
KS_WARN = 0.02


class DomainError(ValueError):
    """Argument outside the support or admissible range."""


class Family(str, enum.Enum):
    BETA = "beta"
    GAMMA = "gamma"
    NORMAL = "normal"


@dataclass(frozen=True)
class MixtureComponent:
    """One conjugate density.

    Beta(a=p1, b=p2), Gamma(shape=p1, rate=p2) or Normal(mean=p1, sd=p2).
    """

    family: Family
    p1: float
    p2: float

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        object.__setattr__(self, "p1", float(self.p1))
        object.__setattr__(self, "p2", float(self.p2))
        if not (math.isfinite(self.p1) and math.isfinite(self.p2)):
            raise ValueError(f"non-finite parameters for {self.family.value} component")
        if self.p2 <= 0 or (self.family is not Family.NORMAL and self.p1 <= 0):
            raise ValueError(
                f"invalid {self.family.value} parameters ({self.p1}, {self.p2})"
            )

    @classmethod
    def beta(cls, a: float, b: float) -> "MixtureComponent":
        return cls(Family.BETA, a, b)

    @classmethod
    def gamma(cls, shape: float, rate: float) -> "MixtureComponent":
        return cls(Family.GAMMA, shape, rate)

    @classmethod
    def gamma_mn(cls, mean: float, n: float) -> "MixtureComponent":
        """Gamma from its mean and pseudo-observation count."""
        return cls(Family.GAMMA, mean * n, n)

    @classmethod
    def normal(cls, mean: float, sd: float) -> "MixtureComponent":
        return cls(Family.NORMAL, mean, sd)

    @property
    def mean(self) -> float:
        return float(_comp_mean(self.family, self.p1, self.p2))

    @property
    def var(self) -> float:
        return float(_comp_var(self.family, self.p1, self.p2))


# ---------------------------------------------------------------------------
# vectorised component primitives; p1/p2 broadcast against x

def _comp_mean(family, p1, p2):
    if family is Family.BETA:
        return p1 / (p1 + p2)
    if family is Family.GAMMA:
        return p1 / p2
    return p1


def _comp_var(family, p1, p2):
    if family is Family.BETA:
        s = p1 + p2
        return p1 * p2 / (s * s * (s + 1.0))
    if family is Family.GAMMA:
        return p1 / (p2 * p2)
    return p2 * p2


def _comp_logpdf(family, x, p1, p2):
    if family is Family.BETA:
        return special.xlogy(p1 - 1.0, x) + special.xlog1py(p2 - 1.0, -x) - special.betaln(p1, p2)
    if family is Family.GAMMA:
        return special.xlogy(p1 - 1.0, x) - p2 * x + p1 * np.log(p2) - special.gammaln(p1)
    z = (x - p1) / p2
    return -0.5 * z * z - np.log(p2) - 0.5 * math.log(2.0 * math.pi)


def _comp_cdf(family, x, p1, p2):
    if family is Family.BETA:
        return special.betainc(p1, p2, x)
    if family is Family.GAMMA:
        return special.gammainc(p1, p2 * x)
    return special.ndtr((x - p1) / p2)


def _comp_ppf(family, q, p1, p2):
    if family is Family.BETA:
        return special.betaincinv(p1, p2, q)
    if family is Family.GAMMA:
        return special.gammaincinv(p1, q) / p2
    return p1 + p2 * special.ndtri(q)


def _check_support(family, x):
    x = np.asarray(x, dtype=float)
    if np.any(np.isnan(x)):
        raise DomainError("x is NaN")
    if family is Family.BETA and (np.any(x < 0) or np.any(x > 1)):
        raise DomainError("beta support is [0, 1]")
    if family is Family.GAMMA and np.any(x < 0):
        raise DomainError("gamma support is [0, inf)")
    return x


def _scalar_or_array(v, like):
    return float(v) if np.ndim(like) == 0 else v


@dataclass(frozen=True)
class ConjugateMixture:
    """Weighted mixture of same-family conjugate components."""

    components: tuple[MixtureComponent, ...]
    weights: tuple[float, ...]

    def __post_init__(self):
        comps = tuple(self.components)
        w = tuple(float(v) for v in self.weights)
        object.__setattr__(self, "components", comps)
        object.__setattr__(self, "weights", w)
        if not comps:
            raise ValueError("a mixture needs at least one component")
        if len(w) != len(comps):
            raise ValueError("weights and components differ in length")
        if len({c.family for c in comps}) != 1:
            raise ValueError("mixture components must share one family")
        if any(not math.isfinite(v) or v < 0 for v in w):
            raise ValueError("weights must be finite and nonnegative")
        if abs(math.fsum(w) - 1.0) > 1e-12:
            raise ValueError(f"weights sum to {math.fsum(w)!r}, not 1")

    @classmethod
    def from_arrays(cls, family, weights, p1, p2) -> "ConjugateMixture":
        """Build from parallel arrays, renormalising the weights."""
        family = Family(family)
        w = np.asarray(weights, dtype=float)
        w = w / w.sum()
        comps = tuple(MixtureComponent(family, a, b) for a, b in zip(p1, p2))
        return cls(comps, tuple(w.tolist()))

    @classmethod
    def single(cls, comp: MixtureComponent) -> "ConjugateMixture":
        return cls((comp,), (1.0,))

    @property
    def family(self) -> Family:
        return self.components[0].family

    @property
    def k(self) -> int:
        return len(self.components)

    @cached_property
    def w(self) -> np.ndarray:
        return np.array(self.weights)

    @cached_property
    def p1(self) -> np.ndarray:
        return np.array([c.p1 for c in self.components])

    @cached_property
    def p2(self) -> np.ndarray:
        return np.array([c.p2 for c in self.components])

    def mean(self) -> float:
        return float(self.w @ _comp_mean(self.family, self.p1, self.p2))

    def var(self) -> float:
        m = _comp_mean(self.family, self.p1, self.p2)
        second = _comp_var(self.family, self.p1, self.p2) + m * m
        mu = self.w @ m
        return float(self.w @ second - mu * mu)

    def logpdf(self, x):
        x = _check_support(self.family, x)
        lp = _comp_logpdf(self.family, x[..., None], self.p1, self.p2)
        with np.errstate(divide="ignore"):
            out = special.logsumexp(lp + np.log(self.w), axis=-1)
        return _scalar_or_array(out, x)

    def pdf(self, x):
        x = _check_support(self.family, x)
        with np.errstate(divide="ignore", invalid="ignore"):
            dens = np.exp(_comp_logpdf(self.family, x[..., None], self.p1, self.p2))
        out = np.sum(np.where(self.w > 0, self.w * dens, 0.0), axis=-1)
        return _scalar_or_array(out, x)

    def cdf(self, x):
        x = _check_support(self.family, x)
        out = _comp_cdf(self.family, x[..., None], self.p1, self.p2) @ self.w
        return _scalar_or_array(out, x)

    def quantile(self, q):
        if np.ndim(q) == 0:
            return self._quantile1(float(q))
        return np.array([self._quantile1(float(v)) for v in np.ravel(q)]).reshape(np.shape(q))

    def _quantile1(self, q: float) -> float:
        if not 0.0 < q < 1.0:
            raise DomainError("quantile level must lie in (0, 1)")
        live = self.w > 0
        cq = _comp_ppf(self.family, q, self.p1[live], self.p2[live])
        if live.sum() == 1:
            return float(cq[0])
        # the mixture quantile lies between the smallest and largest component quantiles
        lo, hi = float(cq.min()), float(cq.max())
        if lo == hi:
            return lo
        f = lambda x: float(_comp_cdf(self.family, x, self.p1, self.p2) @ self.w) - q
        span = hi - lo
        while f(lo) > 0:
            lo = max(lo - span, 0.0) if self.family is not Family.NORMAL else lo - span
        while f(hi) < 0:
            hi = min(hi + span, 1.0) if self.family is Family.BETA else hi + span
        return float(optimize.brentq(f, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500))

    def to_dict(self, parameterization: str = "shape_rate") -> dict:
        d = {"family": self.family.value, "weights": list(self.weights)}
        if self.family is Family.GAMMA and parameterization == "mean_n":
            d["parameterization"] = "mean_n"
            d["params"] = [[c.p1 / c.p2, c.p2] for c in self.components]
        else:
            d["params"] = [[c.p1, c.p2] for c in self.components]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ConjugateMixture":
        family = Family(d["family"])
        params = [tuple(map(float, p)) for p in d["params"]]
        parameterization = d.get("parameterization", "shape_rate")
        if parameterization not in ("shape_rate", "mean_n"):
            raise ValueError(f"unknown parameterization {parameterization!r}")
        if parameterization == "mean_n":
            if family is not Family.GAMMA:
                raise ValueError("mean_n parameterization applies to gamma mixtures only")
            params = [(m * n, n) for m, n in params]
        w = [float(v) for v in d["weights"]]
        total = math.fsum(w)
        if abs(total - 1.0) > 1e-6:
            raise ValueError(f"weights sum to {total!r}, not 1")
        if abs(total - 1.0) > 1e-12:  # rounded inputs; exact ones pass through untouched
            w = [v / total for v in w]
        comps = tuple(MixtureComponent(family, a, b) for a, b in params)
        return cls(comps, tuple(w))


def mix_pdf(m: ConjugateMixture, x):
    return m.pdf(x)


def mix_cdf(m: ConjugateMixture, x):
    return m.cdf(x)


def mix_quantile(m: ConjugateMixture, q):
    return m.quantile(q)


# ---------------------------------------------------------------------------
# EM fitting


@dataclass(frozen=True)
class FitReport:
    k: int
    log_likelihood: float
    aic: float
    ks_distance: float
    iterations: int
    converged: bool
    restarts_used: int
    trace: tuple[float, ...] = field(default=(), repr=False)


def aic(log_likelihood: float, k: int) -> float:
    # 2 parameters per component plus k - 1 free weights
    return 2.0 * (3 * k - 1) - 2.0 * log_likelihood


def ks_distance(m: ConjugateMixture, draws) -> float:
    x = np.sort(np.asarray(draws, dtype=float))
    n = x.size
    F = m.cdf(x)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - F), np.max(F - (i - 1) / n)))


class _Sample:
    """Draws plus the sufficient-statistic columns the E- and M-steps need."""

    def __init__(self, family: Family, draws):
        x = np.asarray(draws, dtype=float).ravel()
        if x.size == 0:
            raise ValueError("no draws to fit")
        if not np.all(np.isfinite(x)):
            raise ValueError("draws must be finite")
        _check_support(family, x)
        if np.ptp(x) == 0:
            raise ValueError("zero-variance sample")
        # boundary draws (rounded MCMC output) have zero density under most components
        if family is Family.BETA:
            x = np.clip(x, 1e-12, 1.0 - 1e-12)
            stats = np.vstack([np.log(x), np.log1p(-x)])
        elif family is Family.GAMMA:
            x = np.maximum(x, 1e-300)
            stats = np.vstack([np.log(x), x])
        else:
            stats = np.vstack([x, x * x])
        self.family = family
        self.x = x
        self.stats = stats

    def component_logpdf(self, p1, p2):
        """(K, N) log densities as a linear map of the statistic rows."""
        if self.family is Family.BETA:
            coef = np.column_stack([p1 - 1.0, p2 - 1.0])
            const = -special.betaln(p1, p2)
        elif self.family is Family.GAMMA:
            coef = np.column_stack([p1 - 1.0, -p2])
            const = p1 * np.log(p2) - special.gammaln(p1)
        else:
            prec = 1.0 / (p2 * p2)
            coef = np.column_stack([p1 * prec, -0.5 * prec])
            const = -0.5 * p1 * p1 * prec - np.log(p2) - 0.5 * math.log(2.0 * math.pi)
        return coef @ self.stats + const[:, None]


def _moments_to_params(family, m, v, fallback_v):
    if not (v > 0 and math.isfinite(v)):
        v = fallback_v
    if family is Family.NORMAL:
        return m, math.sqrt(v)
    if family is Family.GAMMA:
        m = max(m, 1e-12)
        return m * m / v, m / v
    m = min(max(m, 1e-9), 1 - 1e-9)
    c = m * (1 - m) / v - 1.0
    if c <= 0:
        c = 1.0
    return m * c, (1 - m) * c


def _initial_params(sample: _Sample, k: int):
    x = np.sort(sample.x)
    v_all = float(np.var(x))
    p1, p2 = [], []
    for block in np.array_split(x, k):
        a, b = _moments_to_params(sample.family, float(block.mean()), float(block.var()), v_all)
        p1.append(a)
        p2.append(b)
    return np.full(k, 1.0 / k), np.array(p1), np.array(p2)


def _jitter(rng, sample, w, p1, p2):
    w = w * np.exp(rng.normal(0.0, 0.3, w.size))
    w /= w.sum()
    if sample.family is Family.NORMAL:
        p1 = p1 + rng.normal(0.0, 0.25, p1.size) * p2
        p2 = p2 * np.exp(rng.normal(0.0, 0.25, p2.size))
    else:
        p1 = p1 * np.exp(rng.normal(0.0, 0.25, p1.size))
        p2 = p2 * np.exp(rng.normal(0.0, 0.25, p2.size))
    return w, p1, p2


_LOG_PARAM_MAX = math.log(1e9)


def _trigamma(v):
    return special.zeta(2.0, v)


def _beta_mstep(s1, s2, a, b, tol=1e-10, max_iter=100):
    """Weighted Beta MLE given mean log x (s1) and mean log(1-x) (s2).

    Newton on (log a, log b), falling back to the Fisher-type Hessian when the
    log-scale Hessian is not negative definite, with backtracking so the
    objective never decreases.
    """
    digamma, trigamma, betaln = special.digamma, _trigamma, special.betaln

    def obj(u, v):
        a, b = math.exp(u), math.exp(v)
        return (a - 1) * s1 + (b - 1) * s2 - betaln(a, b)

    u, v = math.log(a), math.log(b)
    f = obj(u, v)
    for _ in range(max_iter):
        a, b = math.exp(u), math.exp(v)
        dab = digamma(a + b)
        ga, gb = a * (s1 - digamma(a) + dab), b * (s2 - digamma(b) + dab)
        t = trigamma(a + b)
        haa, hbb, hab = a * a * (t - trigamma(a)), b * b * (t - trigamma(b)), a * b * t
        if not (haa + ga < 0 and (haa + ga) * (hbb + gb) - hab * hab > 0):
            ga_, gb_ = 0.0, 0.0
        else:
            ga_, gb_ = ga, gb
        h11, h22 = haa + ga_, hbb + gb_
        det = h11 * h22 - hab * hab
        du = -(h22 * ga - hab * gb) / det
        dv = -(h11 * gb - hab * ga) / det
        norm = max(abs(du), abs(dv))
        if norm > 2.0:
            du, dv = du * 2.0 / norm, dv * 2.0 / norm
        while True:
            un, vn = min(u + du, _LOG_PARAM_MAX), min(v + dv, _LOG_PARAM_MAX)
            fn = obj(un, vn)
            if fn >= f or max(abs(du), abs(dv)) < tol:
                break
            du, dv = 0.5 * du, 0.5 * dv
        if fn < f:
            break
        moved = max(abs(un - u), abs(vn - v))
        u, v, f = un, vn, fn
        if moved < tol:
            break
    return math.exp(u), math.exp(v)


def _gamma_mstep(slx, xbar, shape, tol=1e-10, max_iter=100):
    """Weighted Gamma MLE from mean log x and mean x; rate profiles out as shape / xbar."""
    c = math.log(xbar) - slx  # >= 0 by Jensen

    def obj(v):
        a = math.exp(v)
        return a * (math.log(a) - 1.0 - c) - special.gammaln(a) - slx

    v = math.log(shape)
    f = obj(v)
    for _ in range(max_iter):
        a = math.exp(v)
        g = math.log(a) - c - special.digamma(a)
        h = 1.0 / a - _trigamma(a)
        gv = a * g
        hv = a * a * h + gv
        if hv >= 0:
            hv = a * a * h
        step = max(min(-gv / hv, 2.0), -2.0)
        while True:
            vn = min(v + step, _LOG_PARAM_MAX)
            fn = obj(vn)
            if fn >= f or abs(step) < tol:
                break
            step *= 0.5
        if fn < f:
            break
        moved = abs(vn - v)
        v, f = vn, fn
        if moved < tol:
            break
    a = math.exp(v)
    return a, a / xbar


def _estep(sample, w, p1, p2):
    with np.errstate(divide="ignore"):
        lp = sample.component_logpdf(p1, p2) + np.log(w)[:, None]
    top = lp.max(axis=0)
    e = np.exp(lp - top)
    tot = e.sum(axis=0)
    ll = float(np.sum(top) + np.sum(np.log(tot)))
    return ll, e / tot


def _mstep(sample, resp, w, p1, p2):
    nk = resp.sum(axis=1)
    w = nk / sample.x.size
    p1, p2 = p1.copy(), p2.copy()
    with np.errstate(invalid="ignore", divide="ignore"):
        means = (resp @ sample.stats.T) / nk[:, None]
    floor_sd = 1e-12 * float(np.ptp(sample.x))
    for j in range(w.size):
        if nk[j] <= 1e-300:
            continue
        s1, s2 = means[j]
        if sample.family is Family.NORMAL:
            p1[j] = s1
            p2[j] = max(math.sqrt(max(s2 - s1 * s1, 0.0)), floor_sd)
        elif sample.family is Family.BETA:
            p1[j], p2[j] = _beta_mstep(s1, s2, p1[j], p2[j])
        else:
            p1[j], p2[j] = _gamma_mstep(s1, s2, p1[j])
    return w, p1, p2


def _run_em(sample, w, p1, p2, tol, max_iter):
    ll, resp = _estep(sample, w, p1, p2)
    trace = [ll]
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        w, p1, p2 = _mstep(sample, resp, w, p1, p2)
        ll_new, resp = _estep(sample, w, p1, p2)
        trace.append(ll_new)
        change = abs(ll_new - ll) / max(abs(ll), 1e-300)
        ll = ll_new
        if change < tol:
            converged = True
            break
    return w, p1, p2, trace, it, converged


def fit_mixture_em(
    draws,
    family,
    k: int,
    *,
    restarts: int = 10,
    seed: int = 0,
    tol: float = 1e-8,
    max_iter: int = 500,
    _warn: bool = True,
) -> tuple[ConjugateMixture, FitReport]:
    """Fit a k-component conjugate mixture to draws by EM.

    Restart 0 starts from quantile-sliced moment estimates; the remaining
    restarts jitter that start.  The best log-likelihood wins, lowest restart
    index on ties.
    """
    family = Family(family)
    if k < 1:
        raise ValueError("k must be >= 1")
    sample = _Sample(family, draws)
    rng = np.random.default_rng(np.random.SeedSequence([seed, k]))
    w0, p10, p20 = _initial_params(sample, k)
    best = None
    n_restarts = max(1, restarts) if k > 1 else 1
    for r in range(n_restarts):
        init = (w0, p10, p20) if r == 0 else _jitter(rng, sample, w0, p10, p20)
        res = _run_em(sample, *init, tol=tol, max_iter=max_iter)
        if best is None or res[3][-1] > best[3][-1]:
            best = res
    w, p1, p2, trace, iterations, converged = best

    keep = w >= WEIGHT_FLOOR
    if not keep.all():
        log.debug("pruning %d components below weight %g", int((~keep).sum()), WEIGHT_FLOOR)
        w, p1, p2 = w[keep], p1[keep], p2[keep]
        w = w / w.sum()
    order = np.argsort(_comp_mean(family, p1, p2), kind="stable")
    mix = ConjugateMixture.from_arrays(family, w[order], p1[order], p2[order])
    ll = _estep(sample, mix.w, mix.p1, mix.p2)[0]
    report = FitReport(
        k=mix.k,
        log_likelihood=ll,
        aic=aic(ll, mix.k),
        ks_distance=ks_distance(mix, sample.x),
        iterations=iterations,
        converged=converged,
        restarts_used=n_restarts,
        trace=tuple(trace),
    )
    if _warn:
        _warn_fit(mix, report)
    return mix, report


def _warn_fit(mix, report):
    if report.ks_distance > KS_WARN:
        log.warning("k=%d %s mixture fit: KS distance %.4f exceeds %.2f",
                    mix.k, mix.family.value, report.ks_distance, KS_WARN)
    if not report.converged:
        log.warning("EM stopped after %d iterations without converging (k=%d)",
                    report.iterations, report.k)


def select_mixture(
    draws,
    family,
    k_max: int,
    *,
    criterion: str = "adequate",
    ks_threshold: float = KS_WARN,
    **fit_kwargs,
) -> tuple[ConjugateMixture, FitReport]:
    """Choose the number of components for k = 1..k_max.

    ``criterion="adequate"`` keeps the smallest k whose KS distance to the
    draws is at most ``ks_threshold``; if no k qualifies it falls back to the
    lowest AIC.  ``criterion="aic"`` always takes the lowest AIC.  Ties go to
    the smaller k.
    """
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    if criterion not in ("adequate", "aic"):
        raise ValueError(f"unknown criterion {criterion!r}")
    fits = []
    for k in range(1, k_max + 1):
        mix, rep = fit_mixture_em(draws, family, k, _warn=False, **fit_kwargs)
        log.debug("k=%d  loglik=%.3f  AIC=%.3f  KS=%.4f", k, rep.log_likelihood, rep.aic, rep.ks_distance)
        fits.append((mix, rep))
        if criterion == "adequate" and rep.ks_distance <= ks_threshold:
            break
    if criterion == "adequate" and fits[-1][1].ks_distance <= ks_threshold:
        chosen = fits[-1]
    else:
        chosen = fits[0]
        for f in fits[1:]:
            if f[1].aic < chosen[1].aic:
                chosen = f
    _warn_fit(*chosen)
    return chosen


# ---------------------------------------------------------------------------
# robustification and informativeness


def robustify(map_mix: ConjugateMixture, vague: MixtureComponent, w_v: float) -> ConjugateMixture:
    """Append a vague component with weight w_v, scaling the rest by 1 - w_v."""
    if vague.family is not map_mix.family:
        raise ValueError(
            f"vague component is {vague.family.value}, map prior is {map_mix.family.value}"
        )
    w_v = float(w_v)
    if not 0.0 <= w_v <= 1.0:
        raise DomainError("w_v must lie in [0, 1]")
    weights = tuple((1.0 - w_v) * v for v in map_mix.weights) + (w_v,)
    # exact renormalisation guards the 1e-12 sum invariant against rounding
    total = math.fsum(weights)
    return ConjugateMixture(map_mix.components + (vague,), tuple(v / total for v in weights))


def default_vague(
    family,
    map_mix: ConjugateMixture | None = None,
    center: str | float = "median",
    unit_sd: float | None = None,
) -> MixtureComponent:
    """Vague component carrying one observation's worth of information.

    ``center`` is ``"median"``, ``"mean"`` (of ``map_mix``) or an explicit number.
    Beta ignores the centre and returns Beta(1, 1).  Normal needs ``unit_sd``,
    the sampling SD of one observation.
    """
    family = Family(family)
    if family is Family.BETA:
        return MixtureComponent.beta(1.0, 1.0)
    if isinstance(center, str):
        if map_mix is None:
            raise ValueError(f"centering on the map {center} needs a map mixture")
        if center == "median":
            c = map_mix.quantile(0.5)
        elif center == "mean":
            c = map_mix.mean()
        else:
            raise ValueError(f"unknown centering {center!r}")
    else:
        c = float(center)
    if family is Family.GAMMA:
        return MixtureComponent.gamma_mn(c, 1.0)
    if unit_sd is None:
        raise ValueError("normal vague component needs unit_sd")
    return MixtureComponent.normal(c, unit_sd)


def ess_moment(m: ConjugateMixture, sigma_ref: float | None = None) -> float:
    """Effective sample size of the moment-matched single conjugate density.

    Beta: a + b.  Gamma: the rate (pseudo-exposure).  Normal: (sigma_ref / sd)^2.
    """
    mean, var = m.mean(), m.var()
    if m.family is Family.BETA:
        return mean * (1.0 - mean) / var - 1.0
    if m.family is Family.GAMMA:
        return mean / var
    if sigma_ref is None:
        raise ValueError("normal ESS needs the reference sampling SD")
    return sigma_ref * sigma_ref / var


def parse_component(text: str) -> MixtureComponent:
    """Parse ``beta:a,b``, ``gamma:mean,n`` or ``normal:mean,sd``."""
    try:
        fam, rest = text.split(":", 1)
        a, b = (float(v) for v in rest.split(","))
    except ValueError as exc:
        raise ValueError(f"cannot parse component {text!r}; expected family:p1,p2") from exc
    fam = fam.strip().lower()
    if fam == "gamma":
        return MixtureComponent.gamma_mn(a, b)
    return MixtureComponent(Family(fam), a, b)


__all__ = [
    "ConjugateMixture",
    "DomainError",
    "Family",
    "FitReport",
    "MixtureComponent",
    "default_vague",
    "ess_moment",
    "fit_mixture_em",
    "mix_cdf",
    "mix_pdf",
    "mix_quantile",
    "parse_component",
    "robustify",
    "select_mixture",
]
