"""Reference computations that share no code path with the package."""
import math

import numpy as np
from scipy import integrate


def beta_binomial_pmf(y: int, n: int, a: float, b: float) -> float:
    # product form: C(n,y) (a)_y (b)_{n-y} / (a+b)_n
    num = math.comb(n, y)
    for i in range(y):
        num *= (a + i) / (a + b + i)
    for j in range(n - y):
        num *= (b + j) / (a + b + y + j)
    return num


def neg_binomial_pmfs(t_max: int, shape: float, rate: float, exposure: float) -> list[float]:
    # Gamma-Poisson predictive by the recursion p(r+1) = p(r) (r + shape) / (r + 1) (1 - q)
    q = rate / (rate + exposure)
    p = [q**shape]
    for r in range(t_max):
        p.append(p[-1] * (r + shape) / (r + 1) * (1 - q))
    return p


def enumerated_ppp(pmf: list[float], t: int) -> float:
    """Two-sided p-value from an explicit pmf list that covers 0..t (and the full support for the upper tail)."""
    le = math.fsum(pmf[: t + 1])
    lt = math.fsum(pmf[:t])
    ge = 1.0 - lt
    return min(1.0, 2.0 * min(le, ge))


def quadrature_posterior(prior_pdf, lik, grid, lo, hi, breaks=()):
    """prior * likelihood normalised by adaptive quadrature, evaluated on ``grid``.

    ``prior_pdf`` and ``lik`` must accept arrays as well as scalars.
    """
    f = lambda x: prior_pdf(x) * lik(x)
    pts = sorted(p for p in breaks if lo < p < hi)
    z = integrate.quad(f, lo, hi, points=pts or None, limit=500, epsabs=0, epsrel=1e-12)[0]
    return f(np.asarray(grid, dtype=float)) / z
