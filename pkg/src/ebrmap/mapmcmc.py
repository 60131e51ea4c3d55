"""MAP prior derivation: predictive draws for a new trial's parameter.

The exchangeable model puts trial parameters (logit rate, mean, or log hazard)
on a common normal N(mu, tau^2) with mu ~ N(m0, s0^2) and tau ~ HalfNormal(s).
Sampling is Gibbs-within-Metropolis:

* each trial parameter by adaptive random-walk Metropolis,
* mu from its conjugate normal full conditional,
* log tau by random walk, once with the trial parameters held fixed and once
  with the deviations from mu rescaled alongside tau,
* a joint shift of mu and every trial parameter.

The last two moves keep the chain mixing when tau is near zero, where the
plain conditional updates can only crawl.  Step sizes adapt by Robbins-Monro
during burn-in only and are frozen afterwards.

Chains run in lockstep as array rows.  Every chain pre-draws its own noise
from a generator spawned off the configured seed, so chain c's output depends
on (seed, c) only.
"""
from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import special

from .records import Endpoint, TrialRecord

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class HierarchicalSpec:
    """Endpoint plus hyper-priors mu ~ N(mu_mean, mu_sd^2), tau ~ HN(tau_scale)."""

    endpoint: Endpoint
    mu_mean: float = 0.0
    mu_sd: float = 10.0
    tau_scale: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "endpoint", Endpoint(self.endpoint))
        if not self.mu_sd > 0:
            raise ValueError("mu_sd must be positive")
        if not self.tau_scale > 0:
            raise ValueError("tau_scale must be positive")


@dataclass(frozen=True)
class McmcConfig:
    chains: int = 4
    iterations: int = 10_000
    burn_in_fraction: float = 0.5
    seed: int = 0
    target_accept: float = 0.35

    def __post_init__(self):
        if self.chains < 1:
            raise ValueError("need at least one chain")
        if not 0 < self.burn_in_fraction < 1:
            raise ValueError("burn_in_fraction must lie in (0, 1)")
        if not 0 < self.target_accept < 1:
            raise ValueError("target_accept must lie in (0, 1)")
        if self.kept_per_chain < 1:
            raise ValueError("no draws left after burn-in")
        if self.kept_per_chain * self.chains < 1000:
            log.warning("only %d post-burn-in draws", self.kept_per_chain * self.chains)

    @property
    def burn_in(self) -> int:
        return int(round(self.iterations * self.burn_in_fraction))

    @property
    def kept_per_chain(self) -> int:
        return self.iterations - self.burn_in


@dataclass(frozen=True)
class MapDraws:
    """Post-burn-in predictive draws, concatenated in chain order."""

    endpoint: Endpoint
    transformed: np.ndarray  # logit / identity / log scale
    chain: np.ndarray
    mu: np.ndarray  # (chains, kept)
    tau: np.ndarray  # (chains, kept)
    rhat: dict
    accept_rates: tuple[float, ...]
    block_accept: dict = field(default_factory=dict)

    @property
    def theta_new(self) -> np.ndarray:
        return to_natural(self.endpoint, self.transformed)

    @property
    def n_chains(self) -> int:
        return self.mu.shape[0]


def to_natural(endpoint: Endpoint, t):
    if endpoint is Endpoint.BINOMIAL:
        return special.expit(t)
    if endpoint is Endpoint.TTE:
        return np.exp(t)
    return np.asarray(t, dtype=float).copy()


# ---------------------------------------------------------------------------


class _Likelihood:
    """Per-trial log-likelihood on the transformed scale, vectorised over trials."""

    def __init__(self, endpoint: Endpoint, records: Sequence[TrialRecord]):
        self.endpoint = endpoint
        p = [r.payload for r in records]
        if endpoint is Endpoint.BINOMIAL:
            self.a = np.array([q.responders for q in p], float)
            self.b = np.array([q.n for q in p], float)
            rate = (self.a + 0.5) / (self.b + 1.0)
            self.init = special.logit(rate)
            self.scale = 1.0 / np.sqrt(self.b * rate * (1 - rate))
        elif endpoint is Endpoint.NORMAL:
            self.a = np.array([q.mean for q in p], float)
            self.b = np.array([q.n / q.sd**2 for q in p], float)  # precision of the mean
            self.init = self.a.copy()
            self.scale = 1.0 / np.sqrt(self.b)
        else:
            self.a = np.array([q.events for q in p], float)
            self.b = np.array([q.exposure for q in p], float)
            self.init = np.log((self.a + 0.5) / self.b)
            self.scale = 1.0 / np.sqrt(self.a + 0.5)

    def __call__(self, theta):
        if self.endpoint is Endpoint.BINOMIAL:
            return self.a * theta - self.b * np.logaddexp(0.0, theta)
        if self.endpoint is Endpoint.NORMAL:
            d = self.a - theta
            return -0.5 * self.b * d * d
        with np.errstate(over="ignore"):  # overflow gives -inf, a clean rejection
            return self.a * theta - self.b * np.exp(theta)


# per iteration: mu, two tau moves and the shift (normal + uniform each), predictive z
_N_SCALAR_NOISE = 8


def _chain_noise(seed_seq, iterations, h):
    rng = np.random.default_rng(seed_seq)
    jitter = rng.standard_normal(h + 1)
    z_theta = rng.standard_normal((iterations, h))
    u_theta = rng.random((iterations, h))
    scal = np.empty((iterations, _N_SCALAR_NOISE))
    scal[:, [0, 1, 3, 5, 7]] = rng.standard_normal((iterations, 5))
    scal[:, [2, 4, 6]] = rng.random((iterations, 3))
    return jitter, z_theta, u_theta, scal


def _accept(log_alpha, u):
    with np.errstate(divide="ignore"):
        return np.log(u) < log_alpha


def derive_map(
    data: Sequence[TrialRecord], spec: HierarchicalSpec, cfg: McmcConfig = McmcConfig()
) -> MapDraws:
    """Sample the predictive distribution of a new trial's parameter."""
    data = list(data)
    if not data:
        raise ValueError("historical dataset is empty")
    for r in data:
        if r.endpoint is not spec.endpoint:
            raise ValueError(
                f"study {r.study_id!r} is {r.endpoint.value}, model expects {spec.endpoint.value}"
            )
    lik = _Likelihood(spec.endpoint, data)
    h = len(data)
    C, T, B = cfg.chains, cfg.iterations, cfg.burn_in
    m0, s0, hs = spec.mu_mean, spec.mu_sd, spec.tau_scale
    target = cfg.target_accept

    streams = np.random.SeedSequence(cfg.seed).spawn(C)
    noise = [_chain_noise(ss, T, h) for ss in streams]
    z_theta = np.stack([n[1] for n in noise], axis=1)  # (T, C, H)
    u_theta = np.stack([n[2] for n in noise], axis=1)
    scal = np.stack([n[3] for n in noise], axis=1)  # (T, C, 8)

    jit = np.stack([n[0] for n in noise])
    theta = lik.init[None, :] + 0.1 * lik.scale[None, :] * jit[:, :h]
    mu = theta.mean(axis=1)
    ltau = np.full(C, math.log(0.5 * hs)) + 0.1 * jit[:, h]

    log_step_theta = np.log(np.tile(lik.scale, (C, 1)))
    log_step_tau = np.full(C, math.log(0.5))
    log_step_scale = np.full(C, math.log(0.5))
    log_step_shift = np.full(C, math.log(float(np.mean(lik.scale)) / math.sqrt(h)))

    ll = lik(theta)
    kept = T - B
    out_t = np.empty((C, kept))
    out_mu = np.empty((C, kept))
    out_tau = np.empty((C, kept))
    acc = np.zeros((4, C))

    for t in range(T):
        tau = np.exp(ltau)
        inv2v = 0.5 / (tau * tau)
        z, u, s = z_theta[t], u_theta[t], scal[t]

        # trial parameters
        prop = theta + np.exp(log_step_theta) * z
        ll_p = lik(prop)
        dev, dev_p = theta - mu[:, None], prop - mu[:, None]
        la = ll_p - ll - inv2v[:, None] * (dev_p * dev_p - dev * dev)
        ok = _accept(la, u)
        theta = np.where(ok, prop, theta)
        ll = np.where(ok, ll_p, ll)
        a_theta = ok.astype(float)

        # mu | theta, tau
        prec = 1.0 / (s0 * s0) + h / (tau * tau)
        mean = (m0 / (s0 * s0) + theta.sum(axis=1) / (tau * tau)) / prec
        mu = mean + s[:, 0] / np.sqrt(prec)

        # log tau, trial parameters fixed
        dev = theta - mu[:, None]
        ss = np.sum(dev * dev, axis=1)
        lt_p = ltau + np.exp(log_step_tau) * s[:, 1]
        tau_p = np.exp(lt_p)

        def log_post_tau(lt, tv):
            return -h * lt - 0.5 * ss / (tv * tv) - 0.5 * (tv / hs) ** 2 + lt

        la = log_post_tau(lt_p, tau_p) - log_post_tau(ltau, np.exp(ltau))
        ok = _accept(la, s[:, 2])
        ltau = np.where(ok, lt_p, ltau)
        a_tau = ok.astype(float)

        # log tau with deviations rescaled; the hierarchical term and the
        # Jacobian of the rescaling cancel
        eps = np.exp(log_step_scale) * s[:, 3]
        prop = mu[:, None] + (theta - mu[:, None]) * np.exp(eps)[:, None]
        ll_p = lik(prop)
        tau, tau_p = np.exp(ltau), np.exp(ltau + eps)
        la = ll_p.sum(axis=1) - ll.sum(axis=1) - 0.5 * (tau_p**2 - tau**2) / hs**2 + eps
        ok = _accept(la, s[:, 4])
        theta = np.where(ok[:, None], prop, theta)
        ll = np.where(ok[:, None], ll_p, ll)
        ltau = np.where(ok, ltau + eps, ltau)
        a_scale = ok.astype(float)

        # joint shift of mu and the trial parameters
        delta = np.exp(log_step_shift) * s[:, 5]
        prop = theta + delta[:, None]
        ll_p = lik(prop)
        mu_p = mu + delta
        la = (
            ll_p.sum(axis=1)
            - ll.sum(axis=1)
            - 0.5 * ((mu_p - m0) ** 2 - (mu - m0) ** 2) / (s0 * s0)
        )
        ok = _accept(la, s[:, 6])
        theta = np.where(ok[:, None], prop, theta)
        ll = np.where(ok[:, None], ll_p, ll)
        mu = np.where(ok, mu_p, mu)
        a_shift = ok.astype(float)

        if t < B:
            g = (t + 1) ** -0.6
            log_step_theta += g * (a_theta - target)
            log_step_tau += g * (a_tau - target)
            log_step_scale += g * (a_scale - target)
            log_step_shift += g * (a_shift - target)
        else:
            i = t - B
            tau = np.exp(ltau)
            out_mu[:, i] = mu
            out_tau[:, i] = tau
            out_t[:, i] = mu + tau * s[:, 7]
            acc += np.stack([a_theta.mean(axis=1), a_tau, a_scale, a_shift])

    acc /= kept
    rhat = {"mu": split_rhat(out_mu), "tau": split_rhat(out_tau)}
    block = {
        "theta": acc[0].tolist(),
        "tau": acc[1].tolist(),
        "tau_rescale": acc[2].tolist(),
        "shift": acc[3].tolist(),
    }
    draws = MapDraws(
        endpoint=spec.endpoint,
        transformed=out_t.reshape(-1),
        chain=np.repeat(np.arange(C), kept),
        mu=out_mu,
        tau=out_tau,
        rhat=rhat,
        accept_rates=tuple(acc[0].tolist()),
        block_accept=block,
    )
    for arr in (draws.transformed, draws.chain, draws.mu, draws.tau):
        arr.setflags(write=False)
    return draws


def split_rhat(x) -> float:
    """Split-chain potential scale reduction; NaN with one chain or no variance."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[0] < 2 or x.shape[1] < 4:
        return float("nan")
    half = x.shape[1] // 2
    parts = np.concatenate([x[:, :half], x[:, -half:]], axis=0)
    n = parts.shape[1]
    w = parts.var(axis=1, ddof=1).mean()
    if not w > 0:
        return float("nan")
    b = n * parts.mean(axis=1).var(ddof=1)
    var_plus = (n - 1) / n * w + b / n
    return float(math.sqrt(var_plus / w))


@dataclass(frozen=True)
class ConvergenceReport:
    status: str  # "pass", "fail" or "degraded"
    rhat: dict
    rhat_limit: float
    accept_rates: tuple[float, ...]
    n_draws: int
    message: str = ""

    @property
    def passed(self) -> bool:
        return self.status == "pass"


def check_convergence(d: MapDraws, rhat_limit: float = 1.05) -> ConvergenceReport:
    n = int(d.transformed.size)
    if d.n_chains < 2:
        return ConvergenceReport("degraded", d.rhat, rhat_limit, d.accept_rates, n,
                                 "R-hat needs at least two chains")
    values = list(d.rhat.values())
    if any(not math.isfinite(v) for v in values):
        return ConvergenceReport("degraded", d.rhat, rhat_limit, d.accept_rates, n,
                                 "R-hat undefined (zero within-chain variance)")
    ok = all(v <= rhat_limit for v in values)
    worst = max(d.rhat, key=d.rhat.get)
    msg = "" if ok else f"R-hat for {worst} is {d.rhat[worst]:.4f} > {rhat_limit}"
    return ConvergenceReport("pass" if ok else "fail", d.rhat, rhat_limit, d.accept_rates, n, msg)


# ---------------------------------------------------------------------------
# export


def write_draws_csv(d: MapDraws, path) -> None:
    kept = d.mu.shape[1]
    nat = d.theta_new
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "chain", "theta_natural", "theta_transformed"])
        for j in range(d.transformed.size):
            w.writerow([j % kept, int(d.chain[j]), f"{nat[j]:.17g}", f"{d.transformed[j]:.17g}"])


def read_draws_csv(path) -> np.ndarray:
    """Natural-scale draws from an exported CSV (or a bare one-column file)."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty draws file")
    header = [h.strip() for h in rows[0]]
    if "theta_natural" in header:
        col = header.index("theta_natural")
        body = rows[1:]
    else:
        col = 0
        try:
            float(rows[0][0])
            body = rows
        except ValueError:
            body = rows[1:]
    try:
        return np.array([float(r[col]) for r in body if r])
    except (ValueError, IndexError) as exc:
        raise ValueError(f"{path}: non-numeric draw") from exc


def diagnostics(d: MapDraws, rhat_limit: float = 1.05) -> dict:
    rep = check_convergence(d, rhat_limit)
    nat = d.theta_new
    return {
        "endpoint": d.endpoint.value,
        "status": rep.status,
        "message": rep.message,
        "rhat": d.rhat,
        "rhat_limit": rhat_limit,
        "accept_rates": list(d.accept_rates),
        "block_accept": d.block_accept,
        "n_draws": rep.n_draws,
        "theta_natural_mean": float(nat.mean()),
        "theta_natural_median": float(np.median(nat)),
    }


def write_diagnostics(d: MapDraws, path, rhat_limit: float = 1.05) -> None:
    with open(path, "w") as fh:
        json.dump(diagnostics(d, rhat_limit), fh, indent=2)
