"""Closed-form moments and exact distributions of the per-frame error count."""

from __future__ import annotations

import numpy as np
from scipy.special import betaln, gammaln

from .params import BacParams, BbmParams

BAC_EXACT_LIMIT = 1 << 14
BBM_EXACT_LIMIT = 1 << 13

# mixture components below this weight are dropped (total < N * 1e-18)
_WEIGHT_FLOOR = 1e-18
# conditional pmfs are cut where their upper tail falls below this
_TAIL_FLOOR = 1e-30


class SizeLimitExceeded(ValueError):
    pass


def bac_moments(params: BacParams, frame_length: int) -> tuple[float, float]:
    """Mean and variance of K for uniformly random data through a BAC."""
    p, q, n = params.p, params.q, frame_length
    mean = n / 2.0 * (p + q)
    var = n / 2.0 * ((p + q) - p * q - 0.5 * (p * p + q * q))
    return mean, var


def _bbm_direction(alpha: float, beta: float, n: int) -> tuple[float, float, float]:
    # mean, raw second moment and variance of one direction's count
    s = alpha + beta
    rate = alpha / s
    mean = n / 2.0 * rate
    second = n / 4.0 * (alpha * (alpha + 2 * beta + 1) + n * alpha * (alpha + 1)) / (s * (s + 1))
    var = n / 4.0 * (rate * (alpha + 2 * beta + 1) + n * rate * (1 - rate)) / (s + 1)
    return mean, second, var


def bbm_moments(params: BbmParams, frame_length: int) -> tuple[float, float]:
    n = frame_length
    m0, _, v0 = _bbm_direction(params.a, params.b, n)
    m1, _, v1 = _bbm_direction(params.c, params.d, n)
    # K0 and K1 compete for the same N bits: Cov = -(N/4) * 2 * E[p] * E[q]
    cov2 = -n / 4.0 * 2.0 * params.mean_p * params.mean_q
    return m0 + m1, v0 + v1 + cov2


def bbm_split_moments(params: BbmParams, frame_length: int) -> tuple[float, float, float, float]:
    """(E[K0], E[K0^2], E[K1], E[K1^2])."""
    m0, s0, _ = _bbm_direction(params.a, params.b, frame_length)
    m1, s1, _ = _bbm_direction(params.c, params.d, frame_length)
    return m0, s0, m1, s1


def _log_binom_coef(n, k):
    return gammaln(n + 1.0) - gammaln(k + 1.0) - gammaln(n - k + 1.0)


_RISING_LIMIT = 1 << 16


def _log_rising(x: float, n: int) -> np.ndarray:
    """log of x (x+1) ... (x+j-1) for j = 0..n."""
    out = np.zeros(n + 1)
    np.cumsum(np.log(x + np.arange(n, dtype=float)), out=out[1:])
    return out


def beta_binomial_pmf(k, m: int, alpha: float, beta: float):
    """P(X = k) for X ~ Beta-Binomial(m, alpha, beta), evaluated in log space."""
    if not (alpha > 0 and beta > 0):
        raise ValueError("alpha and beta must be positive")
    k_arr = np.asarray(k)
    if np.any(k_arr < 0) or np.any(k_arr > m):
        raise ValueError(f"k must lie in [0, {m}]")
    kf = k_arr.astype(float)
    if m <= _RISING_LIMIT:
        # B(a+k, b+m-k) / B(a, b) as rising factorials; betaln loses ~1e-11
        # relative accuracy once b reaches the thousands
        ki = k_arr.astype(np.int64)
        up = _log_rising(alpha, m)
        down = _log_rising(beta, m)
        total = _log_rising(alpha + beta, m)
        logp = _log_binom_coef(float(m), kf) + up[ki] + down[m - ki] - total[m]
    else:
        logp = _log_binom_coef(float(m), kf) + betaln(alpha + kf, beta + m - kf) - betaln(alpha, beta)
    out = np.exp(logp)
    return float(out) if out.ndim == 0 else out


def binomial_pmf(n: int, p: float) -> np.ndarray:
    """Full Binomial(n, p) pmf over 0..n."""
    k = np.arange(n + 1, dtype=float)
    if p <= 0.0 or p >= 1.0:
        out = np.zeros(n + 1)
        out[0 if p <= 0.0 else n] = 1.0
        return out
    return np.exp(_log_binom_coef(float(n), k) + k * np.log(p) + (n - k) * np.log1p(-p))


def _trim_tail(pmf: np.ndarray) -> np.ndarray:
    above = np.flatnonzero(pmf > _TAIL_FLOOR)
    return pmf[: above[-1] + 1] if above.size else pmf[:1]


def _mixture_pmf(frame_length: int, pmf0, pmf1) -> np.ndarray:
    """P(K = k) = sum_m C(N, m)/2^N P(K_m^(0) + K_{N-m}^(1) = k)."""
    n = frame_length
    m_all = np.arange(n + 1, dtype=float)
    logw = _log_binom_coef(float(n), m_all) - n * np.log(2.0)
    out = np.zeros(n + 1)
    for m in np.flatnonzero(logw > np.log(_WEIGHT_FLOOR)):
        conv = np.convolve(_trim_tail(pmf0(int(m))), _trim_tail(pmf1(n - int(m))))
        out[: conv.size] += np.exp(logw[m]) * conv
    return out


def k_pmf_mixture(params, frame_length: int) -> np.ndarray:
    """pmf of K through the zero-count mixture, for BAC or BBM."""
    if isinstance(params, BacParams):
        return _mixture_pmf(frame_length, lambda m: binomial_pmf(m, params.p),
                            lambda m: binomial_pmf(m, params.q))
    if isinstance(params, BbmParams):
        return _mixture_pmf(
            frame_length,
            lambda m: beta_binomial_pmf(np.arange(m + 1), m, params.a, params.b),
            lambda m: beta_binomial_pmf(np.arange(m + 1), m, params.c, params.d),
        )
    raise TypeError(f"no exact pmf for {type(params).__name__}")


def k_pmf_exact(params, frame_length: int) -> np.ndarray:
    """pmf of the per-frame error count K over 0..N.

    BAC: with uniform data each bit errs independently with probability
    (p + q) / 2, so K ~ Binomial(N, (p + q) / 2). BBM: the zero-count
    mixture of beta-binomial convolutions, with negligible components and
    tails trimmed.
    """
    n = int(frame_length)
    if n < 1:
        raise ValueError("frame length must be >= 1")
    if isinstance(params, BacParams):
        if n > BAC_EXACT_LIMIT:
            raise SizeLimitExceeded(f"N={n} exceeds exact BAC limit {BAC_EXACT_LIMIT}")
        return binomial_pmf(n, 0.5 * (params.p + params.q))
    if isinstance(params, BbmParams):
        if n > BBM_EXACT_LIMIT:
            raise SizeLimitExceeded(f"N={n} exceeds exact BBM limit {BBM_EXACT_LIMIT}")
        return k_pmf_mixture(params, n)
    raise TypeError(f"no exact pmf for {type(params).__name__}")
