"""Channel transmit operations.

Frames are 0/1 arrays; a 2-D array is a batch with one frame per row, and
models with per-frame randomness (BBM, NA-BAC, PA-BAC) draw afresh for each
row. Every function takes an explicit generator.

Two kernels coexist. The literal ones (:func:`bac_transmit`,
:func:`bbm_transmit`) visit every bit. :func:`transmit_by_counts` first draws
the per-frame 0->1 / 1->0 error counts and then places them uniformly among
the zeros / ones of the frame; conditional on the counts, per-bit flipping
also yields uniformly placed errors, so both kernels share one output
distribution. :func:`sample_counts` skips placement altogether for
simulations that only need counts of uniformly random data.
"""

from __future__ import annotations

import numpy as np

from .. import stats
from .params import BacParams, BbmParams, Dmc4Params, NaBacParams, PaBacParams


def _as_frames(frame) -> tuple[np.ndarray, bool]:
    x = np.asarray(frame, dtype=np.uint8)
    if x.size == 0:
        raise ValueError("frame must be nonempty")
    if np.any(x > 1):
        raise ValueError("frame must contain only 0/1 bits")
    single = x.ndim == 1
    return (x[None, :] if single else x), single


def _flip(x: np.ndarray, p, q, rng: np.random.Generator) -> np.ndarray:
    # per-row thresholds; u in [0, 1) so u < t fires with probability exactly t
    p = np.asarray(p, dtype=float).reshape(-1, 1)
    q = np.asarray(q, dtype=float).reshape(-1, 1)
    u = rng.random(x.shape)
    e = u < np.where(x == 0, p, q)
    return x ^ e.astype(np.uint8)


def bac_transmit(frame, params: BacParams, rng: np.random.Generator) -> np.ndarray:
    """Flip each 0 with probability p and each 1 with probability q."""
    x, single = _as_frames(frame)
    y = _flip(x, params.p, params.q, rng)
    return y[0] if single else y


def _bbm_draws(params: BbmParams, n: int, rng: np.random.Generator):
    p = stats.beta_sample(params.a, params.b, rng, size=n)
    q = stats.beta_sample(params.c, params.d, rng, size=n)
    return p, q


def bbm_transmit(frame, params: BbmParams, rng: np.random.Generator) -> np.ndarray:
    """Draw p ~ Beta(a, b), q ~ Beta(c, d) per frame, then transmit as BAC(p, q)."""
    x, single = _as_frames(frame)
    p, q = _bbm_draws(params, x.shape[0], rng)
    y = _flip(x, p, q, rng)
    return y[0] if single else y


def _round_half_up(v):
    return np.floor(np.asarray(v, dtype=float) + 0.5)


def _integer_shift(shift: float, n: int, rng: np.random.Generator) -> np.ndarray:
    """Unbiased integer rounding of a real Poisson shift.

    Rounding to nearest would move the mean by up to 1/2; taking
    ceil(shift) with probability frac(shift) keeps E[g] = mu exactly and adds
    frac * (1 - frac) <= 1/4 to the variance.
    """
    base = np.floor(shift)
    frac = shift - base
    if frac == 0.0:
        return np.full(n, base)
    return base + (rng.random(n) < frac)


def draw_error_counts(params, zeros, ones, rng: np.random.Generator):
    """Per-frame (g0, g1) error counts for frames with the given numbers of
    zeros and ones. Approximation rules are clamped to [0, available]."""
    zeros = np.asarray(zeros, dtype=np.int64)
    ones = np.asarray(ones, dtype=np.int64)
    n = zeros.size
    if isinstance(params, BacParams):
        return rng.binomial(zeros, params.p), rng.binomial(ones, params.q)
    if isinstance(params, BbmParams):
        p, q = _bbm_draws(params, n, rng)
        return rng.binomial(zeros, p), rng.binomial(ones, q)
    if isinstance(params, PaBacParams):
        g0 = stats.poisson_sample(params.var0, rng, size=n) - _integer_shift(
            params.var0 - params.mu0, n, rng)
        g1 = stats.poisson_sample(params.var1, rng, size=n) - _integer_shift(
            params.var1 - params.mu1, n, rng)
    elif isinstance(params, NaBacParams):
        g0 = stats.normal_sample(params.mu0, params.var0, rng, size=n)
        g1 = stats.normal_sample(params.mu1, params.var1, rng, size=n)
    else:
        raise TypeError(f"unsupported page channel {type(params).__name__}")
    g0 = np.clip(_round_half_up(g0), 0, zeros).astype(np.int64)
    g1 = np.clip(_round_half_up(g1), 0, ones).astype(np.int64)
    return g0, g1


def _place(x: np.ndarray, g0, g1, rng: np.random.Generator) -> np.ndarray:
    y = x.copy()
    for i, row in enumerate(x):
        for bit, g in ((0, g0[i]), (1, g1[i])):
            if g:
                where = np.flatnonzero(row == bit)
                y[i, where[rng.choice(where.size, size=int(g), replace=False)]] ^= 1
    return y


def transmit_by_counts(frame, params, rng: np.random.Generator) -> np.ndarray:
    """Draw per-frame error counts, then flip uniformly chosen zeros and ones."""
    x, single = _as_frames(frame)
    ones = x.sum(axis=1, dtype=np.int64)
    g0, g1 = draw_error_counts(params, x.shape[1] - ones, ones, rng)
    y = _place(x, g0, g1, rng)
    return y[0] if single else y


def na_bac_transmit(frame, params: NaBacParams, rng: np.random.Generator) -> np.ndarray:
    """Normal-approximation BAC: g ~ round(N(mu, var)) flips per direction."""
    if isinstance(params, PaBacParams) or not isinstance(params, NaBacParams):
        raise TypeError("na_bac_transmit expects NaBacParams")
    return transmit_by_counts(frame, params, rng)


def pa_bac_transmit(frame, params: PaBacParams, rng: np.random.Generator) -> np.ndarray:
    """Shifted-Poisson BAC: g ~ Poisson(var) - (var - mu) per direction, the real
    shift rounded stochastically (see :func:`_integer_shift`)."""
    if not isinstance(params, PaBacParams):
        raise TypeError("pa_bac_transmit expects PaBacParams")
    return transmit_by_counts(frame, params, rng)


def dmc4_transmit(levels, params: Dmc4Params, rng: np.random.Generator) -> np.ndarray:
    """Map each written cell level independently through its transition row."""
    lv = np.asarray(levels, dtype=np.int64)
    if lv.size and (lv.min() < 0 or lv.max() > 3):
        raise ValueError("cell levels must lie in {0, 1, 2, 3}")
    cum = np.cumsum(params.transition, axis=1)
    cum[:, -1] = 1.0
    u = rng.random(lv.shape)
    read = (u[..., None] >= cum[lv]).sum(axis=-1)
    return np.minimum(read, 3).astype(np.uint8)


def transmit(frame, params, rng: np.random.Generator) -> np.ndarray:
    """Dispatch to the literal transmit operation of ``params``' family."""
    if isinstance(params, BacParams):
        return bac_transmit(frame, params, rng)
    if isinstance(params, BbmParams):
        return bbm_transmit(frame, params, rng)
    if isinstance(params, PaBacParams):
        return pa_bac_transmit(frame, params, rng)
    if isinstance(params, NaBacParams):
        return na_bac_transmit(frame, params, rng)
    if isinstance(params, Dmc4Params):
        return dmc4_transmit(frame, params, rng)
    raise TypeError(f"unsupported channel {type(params).__name__}")


def sample_counts(params, frame_length: int, n_frames: int, rng: np.random.Generator):
    """(K0, K1) per frame for uniformly random data, without building frames.

    The number of zeros in each frame is Binomial(N, 1/2); counts are then
    drawn as in :func:`draw_error_counts`.
    """
    zeros = rng.binomial(frame_length, 0.5, size=n_frames)
    return draw_error_counts(params, zeros, frame_length - zeros, rng)
