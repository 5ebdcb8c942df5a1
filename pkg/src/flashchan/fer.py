"""Frame-error-rate estimation by Monte-Carlo simulation and by replaying
recorded error data.

Random streams are tied to fixed-size blocks of consecutive frames: block
``b`` draws from ``SeedSequence(master_seed, spawn_key=(b,))``. Blocks are
accumulated in index order and the run stops at the first block boundary
where the error target is met, so the estimate is identical for any number
of workers.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Iterable, Mapping

import numpy as np
from scipy import stats as sps

from .channels import (
    BacParams,
    Dmc4Params,
    TwoPageModel,
    fit_bac,
    mean_bac,
    sample_counts,
    transmit,
)
from .ecc import BoundedDistanceCode, LdpcDecoder, ParityCheckCode, bd_decode, channel_llr, sp_decode_batch
from .errordata import (
    ErrorDataset,
    PageKind,
    frame_error_counts,
    levels_to_pages,
    sample_moments,
)

MIN_FRAME_ERRORS = 400
BD_FRAME_CAP = 10**8
LDPC_FRAME_CAP = 10**6
BD_BLOCK = 1 << 16
LDPC_BLOCK = 64

REASONS = ("min_errors_reached", "frame_cap", "data_exhausted")
CSV_COLUMNS = ["pe", "model", "code", "page", "frames", "errors", "fer", "ci_lo", "ci_hi", "reason"]


def wilson_interval(errors: int, frames: int, level: float = 0.95) -> tuple[float, float]:
    if frames <= 0:
        raise ValueError("no frames simulated")
    z = float(sps.norm.ppf(0.5 + level / 2))
    phat = errors / frames
    denom = 1 + z * z / frames
    centre = (phat + z * z / (2 * frames)) / denom
    half = z * math.sqrt(phat * (1 - phat) / frames + z * z / (4 * frames * frames)) / denom
    return max(0.0, centre - half), min(1.0, centre + half)


@dataclass(frozen=True)
class FerEstimate:
    frames_simulated: int
    frame_errors: int
    stopping_reason: str
    config: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.frames_simulated <= 0:
            raise ValueError("zero frames simulated")
        if not 0 <= self.frame_errors <= self.frames_simulated:
            raise ValueError("frame errors must lie in [0, frames]")
        if self.stopping_reason not in REASONS:
            raise ValueError(f"unknown stopping reason {self.stopping_reason!r}")

    @property
    def fer(self) -> float:
        return self.frame_errors / self.frames_simulated

    @property
    def ci95(self) -> tuple[float, float]:
        return wilson_interval(self.frame_errors, self.frames_simulated)

    @property
    def provisional(self) -> bool:
        """Fewer errors than the requested target; the point is under-resolved."""
        target = self.config.get("min_frame_errors", MIN_FRAME_ERRORS)
        return self.frame_errors < target

    def to_dict(self) -> dict:
        lo, hi = self.ci95
        return {
            "frames_simulated": self.frames_simulated,
            "frame_errors": self.frame_errors,
            "fer": self.fer,
            "ci95": [lo, hi],
            "stopping_reason": self.stopping_reason,
            "provisional": self.provisional,
            "config": self.config,
        }


def _resolve_channel(channel, page):
    """Return (page channel or Dmc4Params, page kind or None)."""
    if isinstance(channel, tuple):
        channel, page = channel
    if isinstance(channel, TwoPageModel):
        if page is None:
            raise ValueError("a two-page model needs a page selection")
        kind = PageKind.parse(page)
        return channel.page(kind), kind
    if isinstance(channel, Dmc4Params):
        if page is None:
            raise ValueError("a cell-level channel needs a page selection")
        return channel, PageKind.parse(page)
    return channel, (PageKind.parse(page) if page is not None else None)


def dmc4_page_bac(params: Dmc4Params, page) -> BacParams:
    """Average per-direction bit error rates of one page under the 4-ary DMC."""
    kind = PageKind.parse(page)
    col = 0 if kind is PageKind.LOWER else 1
    levels = np.arange(4)
    bits = np.stack(levels_to_pages(levels), axis=1)[:, col]
    T = params.transition
    flip = (bits[:, None] != bits[None, :]).astype(float)
    per_level = (T * flip).sum(axis=1)
    return BacParams(float(per_level[bits == 0].mean()), float(per_level[bits == 1].mean()))


def _decoder_bac(params, kind, frame_length) -> BacParams:
    if isinstance(params, Dmc4Params):
        return dmc4_page_bac(params, kind)
    return mean_bac(params, frame_length)


def _channel_frames(params, kind, frame_length, count, rng, data=None):
    """(written, read) bit frames; uniform random data unless ``data`` given."""
    if isinstance(params, Dmc4Params):
        if data is not None:
            raise ValueError("the cell-level channel only simulates random data")
        levels = rng.integers(0, 4, size=(count, frame_length))
        read = transmit(levels, params, rng)
        col = 0 if kind is PageKind.LOWER else 1
        return levels_to_pages(levels)[col], levels_to_pages(read)[col]
    x = rng.integers(0, 2, size=(count, frame_length), dtype=np.uint8) if data is None else data
    return x, transmit(x, params, rng)


def _describe_code(decoder) -> str:
    if isinstance(decoder, BoundedDistanceCode):
        return f"bd(n={decoder.n},k={decoder.k},t={decoder.t})"
    code = decoder.code
    return f"ldpc(n={code.n},k={code.k_effective},iters={decoder.max_iter},llr={decoder.llr_mode})"


def _describe_channel(params) -> dict:
    if isinstance(params, Dmc4Params):
        return {"model": "dmc4", "transition": params.transition.tolist()}
    return {"model": params.family, **{k: float(v) for k, v in asdict(params).items()}}


def _as_decoder(decoder):
    if isinstance(decoder, ParityCheckCode):
        return LdpcDecoder(decoder)
    if not isinstance(decoder, (BoundedDistanceCode, LdpcDecoder)):
        raise TypeError(f"unsupported decoder {type(decoder).__name__}")
    return decoder


def _block_rng(master_seed, block: int) -> np.random.Generator:
    entropy = list(master_seed) if isinstance(master_seed, (tuple, list)) else master_seed
    return np.random.default_rng(np.random.SeedSequence(entropy, spawn_key=(block,)))


def _ldpc_errors(decoder: LdpcDecoder, sent, received, llr_params) -> int:
    llrs = channel_llr(received, llr_params, mode=decoder.llr_mode)
    words, success, _ = sp_decode_batch(llrs, decoder.code, decoder.max_iter, decoder.early_stop)
    wrong = success & np.any(words != sent, axis=1)
    return int(np.count_nonzero(~success | wrong))


def _simulate_block(task) -> tuple[int, int]:
    params, kind, decoder, frame_length, seed, block, size = task
    rng = _block_rng(seed, block)
    if isinstance(decoder, BoundedDistanceCode):
        if isinstance(params, Dmc4Params):
            x, y = _channel_frames(params, kind, frame_length, size, rng)
            k = np.count_nonzero(x != y, axis=1)
        else:
            k0, k1 = sample_counts(params, frame_length, size, rng)
            k = k0 + k1
        return size, int(np.count_nonzero(~bd_decode(k, decoder)))

    llr_params = _decoder_bac(params, kind, frame_length)
    code = decoder.code
    if decoder.llr_mode == "symmetric":
        # all-zero codeword; error pattern from random data through the channel
        x, y = _channel_frames(params, kind, frame_length, size, rng)
        received = (x != y).astype(np.uint8)
        sent = np.zeros_like(received)
    else:
        sent = code.random_codewords(size, rng)
        _, received = _channel_frames(params, kind, frame_length, size, rng, data=sent)
    return size, _ldpc_errors(decoder, sent, received, llr_params)


def estimate_fer(
    channel,
    decoder,
    frame_length: int | None = None,
    *,
    page=None,
    min_frame_errors: int = MIN_FRAME_ERRORS,
    max_frames: int | None = None,
    master_seed=0,
    workers: int = 1,
    block_size: int | None = None,
) -> FerEstimate:
    """Monte-Carlo FER of ``decoder`` over a page channel.

    ``channel`` is a page-channel parameter set, a ``(TwoPageModel, page)``
    pair (or a TwoPageModel / Dmc4Params with ``page=``). The bounded-distance
    path draws per-frame error counts for uniform random data; the LDPC path
    decodes full frames. LDPC decoders see the channel's mean BAC.
    """
    params, kind = _resolve_channel(channel, page)
    decoder = _as_decoder(decoder)
    is_bd = isinstance(decoder, BoundedDistanceCode)
    n = decoder.n if frame_length is None else int(frame_length)
    if n != decoder.n:
        raise ValueError(f"frame length {n} does not match decoder length {decoder.n}")
    if max_frames is None:
        max_frames = BD_FRAME_CAP if is_bd else LDPC_FRAME_CAP
    if max_frames < 1:
        raise ValueError("max_frames must be >= 1")
    if min_frame_errors < 1:
        raise ValueError("min_frame_errors must be >= 1")
    if workers < 1:
        raise ValueError("workers must be >= 1")
    block = block_size or (BD_BLOCK if is_bd else LDPC_BLOCK)

    config = {
        "channel": _describe_channel(params),
        "page": kind.value if kind else None,
        "code": _describe_code(decoder),
        "frame_length": n,
        "master_seed": list(master_seed) if isinstance(master_seed, (tuple, list)) else master_seed,
        "workers": workers,
        "block_size": block,
        "min_frame_errors": min_frame_errors,
        "max_frames": max_frames,
    }
    if not is_bd:
        config["decoder_channel"] = asdict(_decoder_bac(params, kind, n))

    n_blocks = -(-max_frames // block)

    def task(b):
        size = min(block, max_frames - b * block)
        return (params, kind, decoder, n, master_seed, b, size)

    frames = errors = 0
    reason = "frame_cap"
    if workers == 1:
        for b in range(n_blocks):
            f, e = _simulate_block(task(b))
            frames += f
            errors += e
            if errors >= min_frame_errors:
                reason = "min_errors_reached"
                break
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            b = 0
            done = False
            while b < n_blocks and not done:
                wave = range(b, min(n_blocks, b + workers))
                for f, e in pool.map(_simulate_block, [task(i) for i in wave]):
                    frames += f
                    errors += e
                    if errors >= min_frame_errors:
                        reason = "min_errors_reached"
                        done = True
                        break
                b = wave.stop
    return FerEstimate(frames, errors, reason, config)


def _replay_frames(dataset: ErrorDataset, kind, pe_cycle, n):
    """Error vectors of consecutive length-``n`` frames from each record."""
    out = []
    for rec in dataset.select(page_kind=kind, pe_cycle=pe_cycle):
        for f in range(rec.frame_length // n):
            out.append(rec.error_vector(f * n, (f + 1) * n))
    return np.array(out, dtype=np.uint8).reshape(len(out), n)


def replay_fer(dataset: ErrorDataset, decoder, page_kind, pe_cycle=None,
               frame_length: int | None = None, batch: int = LDPC_BLOCK) -> FerEstimate:
    """FER from applying each recorded error vector to the all-zero codeword.

    LDPC decoding uses a BAC fitted to the selected data (collapsed to a BSC
    in symmetric mode).
    """
    decoder = _as_decoder(decoder)
    kind = PageKind.parse(page_kind)
    n = decoder.n if frame_length is None else int(frame_length)
    if n != decoder.n:
        raise ValueError(f"frame length {n} does not match decoder length {decoder.n}")
    config = {
        "source": "replay",
        "page": kind.value,
        "pe_cycle": pe_cycle,
        "code": _describe_code(decoder),
        "frame_length": n,
        "vendor": dataset.vendor,
        "chip": dataset.chip,
    }
    if not dataset.select(page_kind=kind, pe_cycle=pe_cycle):
        raise ValueError(f"no records for page={kind.value}, pe_cycle={pe_cycle}")
    counts = frame_error_counts(dataset, page_kind=kind, pe_cycle=pe_cycle, frame_length=n)
    total = counts.k.size
    if total == 0:
        raise ValueError(f"records are shorter than one {n}-bit frame")
    if isinstance(decoder, BoundedDistanceCode):
        errors = int(np.count_nonzero(~bd_decode(counts.k, decoder)))
        return FerEstimate(total, errors, "data_exhausted", config)

    if total >= 2:
        llr_params = fit_bac(sample_moments(counts), n)
    else:
        rate = float(counts.k[0]) / n
        llr_params = BacParams(rate, rate)
    config["decoder_channel"] = asdict(llr_params)
    vectors = _replay_frames(dataset, kind, pe_cycle, n)
    errors = 0
    zeros = np.zeros((1, n), dtype=np.uint8)
    for start in range(0, total, batch):
        e = vectors[start:start + batch]
        errors += _ldpc_errors(decoder, zeros, e, llr_params)
    return FerEstimate(total, errors, "data_exhausted", config)


@dataclass(frozen=True)
class FerCurve:
    points: tuple[tuple[int, FerEstimate], ...]
    model: str
    code: str
    page: str

    def __post_init__(self):
        pes = [pe for pe, _ in self.points]
        if any(b <= a for a, b in zip(pes, pes[1:])):
            raise ValueError("P/E cycles must be strictly increasing")

    @property
    def pe_cycles(self) -> list[int]:
        return [pe for pe, _ in self.points]

    @property
    def fers(self) -> np.ndarray:
        return np.array([est.fer for _, est in self.points])

    def rows(self) -> list[dict]:
        out = []
        for pe, est in self.points:
            lo, hi = est.ci95
            out.append({
                "pe": pe, "model": self.model, "code": self.code, "page": self.page,
                "frames": est.frames_simulated, "errors": est.frame_errors, "fer": est.fer,
                "ci_lo": lo, "ci_hi": hi, "reason": est.stopping_reason,
            })
        return out

    def write_csv(self, stream) -> None:
        writer = csv.DictWriter(stream, fieldnames=CSV_COLUMNS, lineterminator="\n")
        writer.writeheader()
        writer.writerows(self.rows())

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "code": self.code,
            "page": self.page,
            "points": [{"pe": pe, **est.to_dict()} for pe, est in self.points],
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


def fer_curve(
    inputs: Mapping[int, object] | ErrorDataset,
    decoder,
    pe_cycles: Iterable[int] | None = None,
    *,
    page,
    model: str | None = None,
    master_seed: int = 0,
    **kwargs,
) -> FerCurve:
    """FER at each P/E cycle.

    ``inputs`` maps P/E cycle to a channel (simulation), or is an
    ErrorDataset (replay). Point ``pe`` is simulated with seed
    ``(master_seed, pe)``.
    """
    decoder = _as_decoder(decoder)
    kind = PageKind.parse(page)
    if isinstance(inputs, ErrorDataset):
        available = inputs.pe_cycles
    else:
        available = sorted(inputs)
    cycles = sorted(available if pe_cycles is None else pe_cycles)
    missing = [pe for pe in cycles if pe not in available]
    if missing:
        raise ValueError(f"no input for P/E cycles {missing}")
    if not cycles:
        raise ValueError("no P/E cycles selected")
    points = []
    for pe in cycles:
        if isinstance(inputs, ErrorDataset):
            est = replay_fer(inputs, decoder, kind, pe_cycle=pe, **kwargs)
        else:
            est = estimate_fer(inputs[pe], decoder, page=kind, master_seed=(master_seed, pe), **kwargs)
        points.append((pe, est))
    if model is None:
        if isinstance(inputs, ErrorDataset):
            model = "empirical"
        else:
            params, _ = _resolve_channel(inputs[cycles[0]], kind)
            model = "dmc4" if isinstance(params, Dmc4Params) else params.family
    return FerCurve(tuple(points), model, _describe_code(decoder), kind.value)
