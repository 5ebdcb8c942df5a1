"""Independent reference computations used by the tests.

Nothing here calls into flashchan; each function takes the slow, literal
route so it can catch mistakes in the optimized library code.
"""

from __future__ import annotations

import itertools
import math
from fractions import Fraction

import numpy as np
from scipy import integrate, stats


def all_words(n: int) -> np.ndarray:
    """Every length-``n`` 0/1 word, one per row."""
    return np.array(list(itertools.product((0, 1), repeat=n)), dtype=np.int8)


def bac_k_pmf_enumerated(n: int, p: float, q: float) -> np.ndarray:
    """P(K = k) for uniform data through a BAC, by summing over every data
    word and every error pattern."""
    words = all_words(n)
    errs = words.astype(bool)
    weight = errs.sum(axis=1)
    pmf = np.zeros(n + 1)
    for x in words:
        zero = x == 0
        # per-bit flip probability and its complement
        flip = np.where(zero, p, q)
        probs = np.where(errs, flip, 1.0 - flip).prod(axis=1)
        np.add.at(pmf, weight, probs)
    return pmf / 2**n


def bac_moments_fraction(p: str, q: str, n: int) -> tuple[Fraction, Fraction]:
    """Mean and variance of K from K ~ Binomial(N, (p+q)/2), in exact arithmetic."""
    r = (Fraction(p) + Fraction(q)) / 2
    return n * r, n * r * (1 - r)


def beta_binomial_quad(k: int, m: int, alpha: float, beta: float) -> float:
    """Integral of Binomial(k; m, t) against the Beta(alpha, beta) density."""
    val, _ = integrate.quad(
        lambda t: stats.binom.pmf(k, m, t) * stats.beta.pdf(t, alpha, beta), 0.0, 1.0,
        epsabs=1e-14, epsrel=1e-12, limit=200,
    )
    return val


def bbm_k_pmf_enumerated(n: int, a: float, b: float, c: float, d: float) -> np.ndarray:
    """P(K = k) for uniform data through a BBM with tiny ``n``.

    Enumerates data words; for a word with m zeros the two directions are
    independent beta-binomials, each obtained by quadrature.
    """
    pmf = np.zeros(n + 1)
    for m in range(n + 1):
        w = math.comb(n, m) / 2**n
        g0 = np.array([beta_binomial_quad(j, m, a, b) for j in range(m + 1)])
        g1 = np.array([beta_binomial_quad(j, n - m, c, d) for j in range(n - m + 1)])
        pmf += w * np.convolve(g0, g1)
    return pmf


def total_variation(p: np.ndarray, q: np.ndarray) -> float:
    size = max(p.size, q.size)
    pp = np.pad(p, (0, size - p.size))
    qq = np.pad(q, (0, size - q.size))
    return 0.5 * float(np.abs(pp - qq).sum())
