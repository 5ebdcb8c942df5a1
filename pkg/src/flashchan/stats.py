"""Random variate generation and the two-sample Kolmogorov-Smirnov test.

Every sampler takes an explicit :class:`numpy.random.Generator`; nothing in
this package draws from ambient global state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Ecdf",
    "KsResult",
    "beta_sample",
    "binomial_sample",
    "ecdf",
    "gamma_sample",
    "kolmogorov_sf",
    "ks_two_sample",
    "normal_sample",
    "poisson_sample",
]

_SERIES_TOL = 1e-10


def _log_gamma_variates(shape: float, n: int, rng: np.random.Generator) -> np.ndarray:
    """Logs of ``n`` Gamma(shape, 1) variates (Marsaglia-Tsang squeeze).

    Working in log space keeps tiny shapes (where the variate underflows)
    usable for the beta ratio.
    """
    if shape < 1.0:
        # Gamma(a) = Gamma(a + 1) * U**(1/a)
        boosted = _log_gamma_variates(shape + 1.0, n, rng)
        return boosted + np.log(rng.random(n)) / shape

    d = shape - 1.0 / 3.0
    c = 1.0 / math.sqrt(9.0 * d)
    out = np.empty(n)
    pending = np.arange(n)
    while pending.size:
        k = pending.size
        x = rng.standard_normal(k)
        v = 1.0 + c * x
        positive = v > 0.0
        v3 = np.where(positive, v, 1.0) ** 3
        u = rng.random(k)
        with np.errstate(divide="ignore"):
            accept = positive & (
                np.log(u) < 0.5 * x * x + d - d * v3 + d * np.log(v3)
            )
        out[pending[accept]] = math.log(d) + np.log(v3[accept])
        pending = pending[~accept]
    return out


def gamma_sample(shape: float, rng: np.random.Generator, size: int | None = None):
    """Gamma(shape, 1) variates."""
    if not shape > 0:
        raise ValueError(f"gamma shape must be positive, got {shape!r}")
    n = 1 if size is None else int(size)
    draws = np.exp(_log_gamma_variates(float(shape), n, rng))
    return float(draws[0]) if size is None else draws


def beta_sample(a: float, b: float, rng: np.random.Generator, size: int | None = None):
    """Beta(a, b) variates built as X / (X + Y) from two gamma variates.

    Returns a float when ``size`` is None, otherwise an array of ``size``
    draws.
    """
    if not (a > 0 and b > 0):
        raise ValueError(f"beta parameters must be positive, got a={a!r}, b={b!r}")
    n = 1 if size is None else int(size)
    lx = _log_gamma_variates(float(a), n, rng)
    ly = _log_gamma_variates(float(b), n, rng)
    # X / (X + Y) = 1 / (1 + exp(ly - lx)), stable for extreme magnitudes
    with np.errstate(over="ignore"):
        draws = 1.0 / (1.0 + np.exp(ly - lx))
    return float(draws[0]) if size is None else draws


def poisson_sample(lam, rng: np.random.Generator, size=None):
    """Poisson(lam) counts.

    numpy's generator uses inversion below lam = 10 and PTRS rejection above.
    """
    lam_arr = np.asarray(lam, dtype=float)
    if np.any(~np.isfinite(lam_arr)) or np.any(lam_arr < 0):
        raise ValueError(f"Poisson rate must be finite and nonnegative, got {lam!r}")
    return rng.poisson(lam, size=size)


def normal_sample(mean, var, rng: np.random.Generator, size=None):
    """Normal(mean, var) draws; ``var = 0`` gives the constant ``mean``."""
    var_arr = np.asarray(var, dtype=float)
    if np.any(var_arr < 0):
        raise ValueError(f"variance must be nonnegative, got {var!r}")
    return rng.normal(mean, np.sqrt(var_arr), size=size)


def binomial_sample(n, p, rng: np.random.Generator, size=None):
    """Binomial(n, p) counts (inversion for small n*p, BTPE rejection otherwise)."""
    p_arr = np.asarray(p, dtype=float)
    if np.any(np.asarray(n) < 0) or np.any((p_arr < 0) | (p_arr > 1)):
        raise ValueError(f"invalid binomial parameters n={n!r}, p={p!r}")
    return rng.binomial(n, p, size=size)


@dataclass(frozen=True)
class Ecdf:
    """Right-continuous empirical CDF of a sample."""

    values: np.ndarray  # sorted, distinct
    heights: np.ndarray  # F at each value
    n: int

    def __call__(self, t):
        idx = np.searchsorted(self.values, t, side="right")
        heights = np.concatenate(([0.0], self.heights))
        return heights[idx]


def ecdf(samples) -> Ecdf:
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    if x.size == 0:
        raise ValueError("ecdf of an empty sample")
    values, counts = np.unique(x, return_counts=True)
    heights = np.cumsum(counts) / x.size
    heights[-1] = 1.0
    return Ecdf(values=values, heights=heights, n=int(x.size))


@dataclass(frozen=True)
class KsResult:
    statistic: float
    p_value: float
    n1: int
    n2: int

    def to_dict(self) -> dict:
        return {"statistic": self.statistic, "p_value": self.p_value, "n1": self.n1, "n2": self.n2}


def kolmogorov_sf(lam: float) -> float:
    """Survival function of the limiting Kolmogorov distribution, P(K > lam)."""
    if lam <= 0.0:
        return 1.0
    if lam < 1.18:
        # Jacobi theta form converges fast for small arguments
        total = 0.0
        k = 1
        while True:
            term = math.exp(-((2 * k - 1) ** 2) * math.pi**2 / (8.0 * lam * lam))
            total += term
            if term < _SERIES_TOL:
                break
            k += 1
        cdf = math.sqrt(2.0 * math.pi) / lam * total
        return min(1.0, max(0.0, 1.0 - cdf))
    total = 0.0
    k = 1
    while True:
        term = math.exp(-2.0 * k * k * lam * lam)
        total += term if k % 2 else -term
        if term < _SERIES_TOL:
            break
        k += 1
    return min(1.0, max(0.0, 2.0 * total))


def ks_two_sample(x, y) -> KsResult:
    """Two-sample K-S test.

    The statistic is evaluated at every distinct observed value, which is the
    exact supremum for step-function ECDFs (ties included). The p-value is
    the asymptotic Kolmogorov tail at effective size n1*n2/(n1+n2); on
    discrete data it is conservative.
    """
    xs = np.sort(np.asarray(x, dtype=float).ravel())
    ys = np.sort(np.asarray(y, dtype=float).ravel())
    n1, n2 = xs.size, ys.size
    if n1 == 0 or n2 == 0:
        raise ValueError("K-S test needs two nonempty samples")
    support = np.union1d(xs, ys)
    fx = np.searchsorted(xs, support, side="right") / n1
    fy = np.searchsorted(ys, support, side="right") / n2
    stat = float(np.max(np.abs(fx - fy)))
    n_eff = n1 * n2 / (n1 + n2)
    return KsResult(statistic=stat, p_value=kolmogorov_sf(math.sqrt(n_eff) * stat), n1=n1, n2=n2)
