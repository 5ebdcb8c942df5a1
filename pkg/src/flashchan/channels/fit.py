"""Parameter fitting from sample moments of the per-direction error counts."""

from __future__ import annotations

from .params import BacParams, BbmParams, NaBacParams, PaBacParams


class UnderdispersedData(ValueError):
    """Moments too close to binomial for a beta-binomial fit."""


def _frame_length(moments, frame_length):
    n = frame_length if frame_length is not None else moments.frame_length
    if n is None:
        raise ValueError("frame length unknown; pass frame_length")
    return int(n)


def fit_bac(moments, frame_length: int | None = None) -> BacParams:
    """p, q as per-direction error rates over the N/2 expected zeros / ones."""
    n = _frame_length(moments, frame_length)
    if moments.mu1 < 0 or moments.mu3 < 0:
        raise ValueError("mean error counts must be nonnegative")
    p = 2.0 * moments.mu1 / n
    q = 2.0 * moments.mu3 / n
    if p > 1 or q > 1:
        raise ValueError(f"fitted rates exceed 1 (p={p}, q={q})")
    return BacParams(p, q)


def _bbm_pair(first: float, second: float, n: int, label: str) -> tuple[float, float]:
    denom = n * (second - first) - first * first * (n - 1)
    numer = first * first * (n + 1) - 2.0 * first * second
    if first <= 0 or denom <= 0:
        raise UnderdispersedData(
            f"{label}: method-of-moments denominator {denom:.6g} <= 0 "
            f"(mean {first:.6g}); data not overdispersed, fit a BAC instead"
        )
    alpha = numer / denom
    beta = alpha * (n / (2.0 * first) - 1.0)
    if not (alpha > 0 and beta > 0):
        raise UnderdispersedData(
            f"{label}: non-positive estimates ({alpha:.6g}, {beta:.6g}); fit a BAC instead"
        )
    return alpha, beta


def fit_bbm(moments, frame_length: int | None = None) -> BbmParams:
    """Method-of-moments beta-binomial fit from raw moments mu1..mu4."""
    n = _frame_length(moments, frame_length)
    a, b = _bbm_pair(moments.mu1, moments.mu2, n, "0->1 errors")
    c, d = _bbm_pair(moments.mu3, moments.mu4, n, "1->0 errors")
    return BbmParams(a, b, c, d)


def fit_na_bac(moments) -> NaBacParams:
    return NaBacParams(moments.mu1, moments.var0, moments.mu3, moments.var1)


def fit_pa_bac(moments) -> PaBacParams:
    if moments.var0 < moments.mu1 or moments.var1 < moments.mu3:
        raise UnderdispersedData(
            f"PA-BAC needs variance >= mean per direction (0->1: {moments.var0:.4g} vs "
            f"{moments.mu1:.4g}; 1->0: {moments.var1:.4g} vs {moments.mu3:.4g})"
        )
    return PaBacParams(moments.mu1, moments.var0, moments.mu3, moments.var1)


FITTERS = {
    "bac": lambda m, n: fit_bac(m, n),
    "bbm": lambda m, n: fit_bbm(m, n),
    "na_bac": lambda m, n: fit_na_bac(m),
    "pa_bac": lambda m, n: fit_pa_bac(m),
}
