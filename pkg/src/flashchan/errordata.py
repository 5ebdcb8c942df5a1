"""Empirical error records: ingestion, synthesis and summary statistics.

Records are stored as error positions plus direction so that individual error
vectors can be replayed through a decoder; per-frame counts are derived.

JSON-Lines layout, one record per line::

    {"pe":8000,"block":0,"page":12,"kind":"lower","n":8192,"err":[[3,0],[97,1]]}

``err`` entries are ``[position, direction]`` with direction 0 for a 0->1
error and 1 for a 1->0 error. An optional line ``{"meta": {...}}`` carries
dataset metadata (vendor, chip).
"""

from __future__ import annotations

import csv
import enum
import io
import json
import logging
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple

import numpy as np

logger = logging.getLogger(__name__)

ZERO_TO_ONE = 0
ONE_TO_ZERO = 1


class PageKind(enum.Enum):
    LOWER = "lower"  # MSB of the cell
    UPPER = "upper"  # LSB of the cell

    @classmethod
    def parse(cls, value) -> "PageKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"page kind must be 'lower' or 'upper', got {value!r}") from None


# level -> (lower bit, upper bit); adjacent levels differ in one bit
GRAY_MAP = {0: (1, 1), 1: (1, 0), 2: (0, 0), 3: (0, 1)}
_LOWER_BIT = np.array([GRAY_MAP[lv][0] for lv in range(4)], dtype=np.uint8)
_UPPER_BIT = np.array([GRAY_MAP[lv][1] for lv in range(4)], dtype=np.uint8)
_BITS_TO_LEVEL = np.zeros((2, 2), dtype=np.uint8)
for _lv, (_lo, _up) in GRAY_MAP.items():
    _BITS_TO_LEVEL[_lo, _up] = _lv


def level_to_bits(level: int) -> tuple[int, int]:
    return GRAY_MAP[int(level)]


def bits_to_level(lower: int, upper: int) -> int:
    return int(_BITS_TO_LEVEL[int(lower), int(upper)])


def levels_to_pages(levels) -> tuple[np.ndarray, np.ndarray]:
    """Split cell levels into (lower page bits, upper page bits)."""
    lv = np.asarray(levels)
    if lv.size and (lv.min() < 0 or lv.max() > 3):
        raise ValueError("cell levels must lie in {0, 1, 2, 3}")
    return _LOWER_BIT[lv], _UPPER_BIT[lv]


def pages_to_levels(lower, upper) -> np.ndarray:
    return _BITS_TO_LEVEL[np.asarray(lower), np.asarray(upper)]


class DatasetError(ValueError):
    """Malformed or inconsistent error data."""


@dataclass(frozen=True, eq=False)
class ErrorRecord:
    pe_cycle: int
    block: int
    page: int
    kind: PageKind
    frame_length: int
    positions: np.ndarray = field(repr=False)
    directions: np.ndarray = field(repr=False)

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=np.int64).ravel()
        dirs = np.asarray(self.directions, dtype=np.uint8).ravel()
        object.__setattr__(self, "kind", PageKind.parse(self.kind))
        if pos.shape != dirs.shape:
            raise DatasetError("positions and directions differ in length")
        if self.frame_length < 1:
            raise DatasetError(f"frame length must be positive, got {self.frame_length}")
        if self.pe_cycle < 0:
            raise DatasetError(f"P/E cycle must be nonnegative, got {self.pe_cycle}")
        if pos.size:
            if np.any(np.diff(pos) <= 0):
                raise DatasetError("error positions must be strictly increasing (no duplicates)")
            if pos[0] < 0 or pos[-1] >= self.frame_length:
                raise DatasetError(f"error position outside [0, {self.frame_length})")
            if np.any(dirs > 1):
                raise DatasetError("error direction must be 0 (0->1) or 1 (1->0)")
        pos.setflags(write=False)
        dirs.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "directions", dirs)

    @classmethod
    def from_errors(cls, pe_cycle, block, page, kind, frame_length, errors) -> "ErrorRecord":
        pairs = list(errors)
        pos = [int(p) for p, _ in pairs]
        dirs = [int(d) for _, d in pairs]
        return cls(int(pe_cycle), int(block), int(page), kind, int(frame_length), pos, dirs)

    @property
    def n_errors(self) -> int:
        return int(self.positions.size)

    def error_vector(self, start: int = 0, stop: int | None = None) -> np.ndarray:
        """Dense 0/1 error vector over bit range [start, stop)."""
        stop = self.frame_length if stop is None else stop
        e = np.zeros(stop - start, dtype=np.uint8)
        sel = (self.positions >= start) & (self.positions < stop)
        e[self.positions[sel] - start] = 1
        return e

    def to_json(self) -> dict:
        return {
            "pe": self.pe_cycle,
            "block": self.block,
            "page": self.page,
            "kind": self.kind.value,
            "n": self.frame_length,
            "err": [[int(p), int(d)] for p, d in zip(self.positions, self.directions)],
        }

    def __eq__(self, other):
        if not isinstance(other, ErrorRecord):
            return NotImplemented
        return (
            (self.pe_cycle, self.block, self.page, self.kind, self.frame_length)
            == (other.pe_cycle, other.block, other.page, other.kind, other.frame_length)
            and np.array_equal(self.positions, other.positions)
            and np.array_equal(self.directions, other.directions)
        )

    __hash__ = None


@dataclass(frozen=True)
class ErrorDataset:
    records: tuple[ErrorRecord, ...] = ()
    frame_length: int | None = None
    vendor: str = ""
    chip: str = ""
    skipped: int = 0  # malformed lines dropped by a lenient load

    def __post_init__(self):
        recs = tuple(self.records)
        lengths = {r.frame_length for r in recs}
        if len(lengths) > 1:
            raise DatasetError(f"records disagree on frame length: {sorted(lengths)}")
        n = self.frame_length
        if lengths:
            (rec_n,) = lengths
            if n is not None and n != rec_n:
                raise DatasetError(f"metadata frame length {n} != record frame length {rec_n}")
            n = rec_n
        object.__setattr__(self, "records", recs)
        object.__setattr__(self, "frame_length", n)

    def __len__(self) -> int:
        return len(self.records)

    def select(self, page_kind=None, pe_cycle=None, block=None) -> list[ErrorRecord]:
        kind = None if page_kind is None else PageKind.parse(page_kind)
        out = [
            r for r in self.records
            if (kind is None or r.kind is kind)
            and (pe_cycle is None or r.pe_cycle == pe_cycle)
            and (block is None or r.block == block)
        ]
        out.sort(key=lambda r: (r.pe_cycle, r.block, r.page))
        return out

    @property
    def pe_cycles(self) -> list[int]:
        return sorted({r.pe_cycle for r in self.records})


_RECORD_KEYS = {"pe", "block", "page", "kind", "n", "err"}


def _parse_line(obj) -> ErrorRecord:
    if not isinstance(obj, dict) or not _RECORD_KEYS <= obj.keys():
        raise DatasetError(f"record must have keys {sorted(_RECORD_KEYS)}")
    errs = obj["err"]
    if not isinstance(errs, list) or any(
        not isinstance(e, list) or len(e) != 2 or not all(isinstance(v, int) for v in e)
        for e in errs
    ):
        raise DatasetError("'err' must be a list of [position, direction] integer pairs")
    for key in ("pe", "block", "page", "n"):
        if not isinstance(obj[key], int) or isinstance(obj[key], bool):
            raise DatasetError(f"'{key}' must be an integer")
    return ErrorRecord.from_errors(obj["pe"], obj["block"], obj["page"], obj["kind"], obj["n"], errs)


def load_dataset(source, strict: bool = True) -> ErrorDataset:
    """Parse a JSON-Lines error stream (text or binary file object, or str/bytes).

    In strict mode the first malformed line raises :class:`DatasetError`;
    otherwise malformed lines are skipped and counted in ``skipped``. A
    frame-length mismatch across records always raises.
    """
    if isinstance(source, bytes):
        source = io.StringIO(source.decode("utf-8"))
    elif isinstance(source, str):
        source = io.StringIO(source)
    records: list[ErrorRecord] = []
    meta: dict = {}
    skipped = 0
    for lineno, raw in enumerate(source, 1):
        line = raw.decode("utf-8") if isinstance(raw, bytes) else raw
        line = line.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
            if isinstance(obj, dict) and "meta" in obj:
                meta.update(obj["meta"])
                continue
            records.append(_parse_line(obj))
        except (json.JSONDecodeError, DatasetError, ValueError, TypeError) as exc:
            if strict:
                raise DatasetError(f"line {lineno}: {exc}") from exc
            skipped += 1
    if skipped:
        logger.warning("skipped %d malformed line(s)", skipped)
    return ErrorDataset(
        records=tuple(records),
        frame_length=meta.get("n"),
        vendor=str(meta.get("vendor", "")),
        chip=str(meta.get("chip", "")),
        skipped=skipped,
    )


def dump_dataset(dataset: ErrorDataset, stream, extra_meta: dict | None = None) -> None:
    meta = {**(extra_meta or {}), "vendor": dataset.vendor, "chip": dataset.chip}
    if dataset.frame_length is not None:
        meta["n"] = dataset.frame_length
    stream.write(json.dumps({"meta": meta}, separators=(",", ":")) + "\n")
    for rec in dataset.records:
        stream.write(json.dumps(rec.to_json(), separators=(",", ":")) + "\n")


def dumps_dataset(dataset: ErrorDataset) -> str:
    buf = io.StringIO()
    dump_dataset(dataset, buf)
    return buf.getvalue()


def _diff_record(pe, block, page, kind, written, read) -> ErrorRecord:
    pos = np.flatnonzero(written != read)
    # written bit is the direction: 0 means a 0->1 error
    return ErrorRecord(pe, block, page, kind, written.size, pos, written[pos])


def synthesize_dataset(
    model,
    n_frames: int,
    frame_length: int,
    pe_cycle: int = 0,
    seed: int = 0,
    *,
    frames_per_page: int = 1,
    pages_per_block: int = 64,
    method: str = "counts",
    vendor: str = "synthetic",
    chip: str = "",
    return_levels: bool = False,
):
    """Write uniform random pages through ``model`` and record the differences.

    ``model`` is a :class:`~flashchan.channels.TwoPageModel` (pages transmitted
    independently, frame by frame) or a
    :class:`~flashchan.channels.Dmc4Params` (cells transmitted jointly).
    ``n_frames`` frames of ``frame_length`` bits are produced per page kind,
    grouped ``frames_per_page`` to a record; wordline ``w`` holds lower page
    ``2w`` and upper page ``2w + 1``. ``method`` selects the transmit kernel
    (``"bitwise"`` or the distribution-equivalent ``"counts"``).

    With ``return_levels`` (cell-level model only) the written and read
    cell levels are returned too, as ``(dataset, written, read)``.
    """
    from . import channels

    if return_levels and not isinstance(model, channels.Dmc4Params):
        raise ValueError("cell levels exist only for the cell-level channel")
    if n_frames < 1 or frame_length < 1 or frames_per_page < 1 or pages_per_block < 1:
        raise ValueError("n_frames, frame_length, frames_per_page and pages_per_block must be >= 1")
    if method not in ("counts", "bitwise"):
        raise ValueError(f"unknown transmit method {method!r}")
    rng = np.random.default_rng(seed)
    n_wordlines = -(-n_frames // frames_per_page)
    page_bits = frames_per_page * frame_length
    wl_per_block = max(1, pages_per_block // 2)
    records: list[ErrorRecord] = []
    cells: list[tuple[np.ndarray, np.ndarray]] = []

    for wl in range(n_wordlines):
        block, wl_in_block = divmod(wl, wl_per_block)
        if isinstance(model, channels.Dmc4Params):
            written = rng.integers(0, 4, size=page_bits, dtype=np.uint8)
            read = channels.dmc4_transmit(written, model, rng)
            cells.append((written, read))
            pages = zip((PageKind.LOWER, PageKind.UPPER), levels_to_pages(written), levels_to_pages(read))
        else:
            pages = []
            for kind in (PageKind.LOWER, PageKind.UPPER):
                params = model.page(kind)
                x = rng.integers(0, 2, size=(frames_per_page, frame_length), dtype=np.uint8)
                if method == "bitwise":
                    y = channels.transmit(x, params, rng)
                else:
                    y = channels.transmit_by_counts(x, params, rng)
                pages.append((kind, x.ravel(), y.ravel()))
        for kind, x, y in pages:
            page_idx = 2 * wl_in_block + (0 if kind is PageKind.LOWER else 1)
            records.append(_diff_record(pe_cycle, block, page_idx, kind, x, y))

    dataset = ErrorDataset(records=tuple(records), frame_length=page_bits, vendor=vendor, chip=chip)
    if return_levels:
        return dataset, np.concatenate([c[0] for c in cells]), np.concatenate([c[1] for c in cells])
    return dataset


class FrameCounts(NamedTuple):
    k: np.ndarray  # total errors per frame
    k0: np.ndarray  # 0->1 errors per frame
    k1: np.ndarray  # 1->0 errors per frame
    frame_length: int


def _record_frame_counts(rec: ErrorRecord, n: int) -> tuple[np.ndarray, np.ndarray]:
    n_fr = rec.frame_length // n
    keep = rec.positions < n_fr * n
    idx = rec.positions[keep] // n
    dirs = rec.directions[keep]
    k0 = np.bincount(idx[dirs == ZERO_TO_ONE], minlength=n_fr)
    k1 = np.bincount(idx[dirs == ONE_TO_ZERO], minlength=n_fr)
    return k0, k1


def frame_error_counts(dataset: ErrorDataset, page_kind=None, pe_cycle=None,
                       frame_length: int | None = None) -> FrameCounts:
    """Per-frame error counts after re-framing records into N-bit frames.

    Records longer than N are cut into consecutive N-bit frames and any
    trailing partial frame is dropped.
    """
    recs = dataset.select(page_kind, pe_cycle)
    if not recs:
        raise DatasetError(f"no records for page={page_kind!r}, pe={pe_cycle!r}")
    n = recs[0].frame_length if frame_length is None else int(frame_length)
    if n < 1 or n > recs[0].frame_length:
        raise DatasetError(f"frame length {n} must lie in [1, {recs[0].frame_length}]")
    parts = [_record_frame_counts(r, n) for r in recs]
    k0 = np.concatenate([p[0] for p in parts]).astype(np.int64)
    k1 = np.concatenate([p[1] for p in parts]).astype(np.int64)
    return FrameCounts(k0 + k1, k0, k1, n)


@dataclass(frozen=True)
class MomentEstimates:
    """Sample moments of per-frame error counts.

    ``mu1, mu2`` are raw first/second moments of the 0->1 count, ``mu3, mu4``
    those of the 1->0 count (NaN when directions are unknown).
    """

    mu1: float
    mu2: float
    mu3: float
    mu4: float
    mean_k: float
    var_k: float
    n_frames: int
    frame_length: int | None = None

    def __post_init__(self):
        if self.n_frames < 2:
            raise ValueError("moment estimates need at least 2 frames")
        for name in ("mu2", "mu4", "var_k"):
            v = getattr(self, name)
            if v < 0:
                raise ValueError(f"{name} must be nonnegative, got {v}")

    def _unbiased(self, first: float, second: float) -> float:
        n = self.n_frames
        return max(0.0, (second - first * first) * n / (n - 1))

    @property
    def var0(self) -> float:
        """Unbiased sample variance of the 0->1 count."""
        return self._unbiased(self.mu1, self.mu2)

    @property
    def var1(self) -> float:
        return self._unbiased(self.mu3, self.mu4)

    def to_row(self) -> dict:
        return {
            "mean": self.mean_k, "var": self.var_k,
            "mu1": self.mu1, "mu2": self.mu2, "mu3": self.mu3, "mu4": self.mu4,
            "n_frames": self.n_frames,
        }


def sample_moments(samples, frame_length: int | None = None) -> MomentEstimates:
    """Moments from a :class:`FrameCounts` (full split) or a plain count array."""
    if isinstance(samples, FrameCounts):
        k = np.asarray(samples.k, dtype=float)
        k0 = np.asarray(samples.k0, dtype=float)
        k1 = np.asarray(samples.k1, dtype=float)
        frame_length = samples.frame_length if frame_length is None else frame_length
        if not np.array_equal(k, k0 + k1):
            raise ValueError("K must equal K0 + K1 frame by frame")
        mu = (k0.mean(), np.mean(k0 * k0), k1.mean(), np.mean(k1 * k1))
    else:
        k = np.asarray(samples, dtype=float).ravel()
        mu = (np.nan,) * 4
    if k.size < 2:
        raise ValueError(f"need at least 2 samples, got {k.size}")
    return MomentEstimates(
        *(float(m) for m in mu),
        mean_k=float(np.mean(k)),
        var_k=float(np.var(k, ddof=1)),
        n_frames=int(k.size),
        frame_length=frame_length,
    )


def dispersion_ratio(samples) -> float:
    """Unbiased sample variance over sample mean (1 for Poisson data)."""
    k = np.asarray(samples, dtype=float).ravel()
    mean = k.mean() if k.size else 0.0
    if not mean > 0:
        raise ValueError("dispersion ratio undefined for zero mean")
    return float(np.var(k, ddof=1) / mean)


def average_rber(dataset: ErrorDataset, page_kind=None, pe_cycle=None,
                 frame_length: int | None = None) -> float:
    counts = frame_error_counts(dataset, page_kind, pe_cycle, frame_length)
    return float(np.mean(counts.k)) / counts.frame_length


def write_moments_csv(rows: Iterable[tuple[int, str, MomentEstimates]], stream) -> None:
    """CSV with columns pe,page,mean,var,mu1,mu2,mu3,mu4,n_frames."""
    cols = ["pe", "page", "mean", "var", "mu1", "mu2", "mu3", "mu4", "n_frames"]
    w = csv.DictWriter(stream, fieldnames=cols, lineterminator="\n")
    w.writeheader()
    for pe, page, m in rows:
        w.writerow({"pe": pe, "page": page, **m.to_row()})


@dataclass(frozen=True)
class CellTransitionMatrix:
    counts: np.ndarray  # [written level, read level]

    @property
    def n_errors(self) -> int:
        c = self.counts
        return int(c.sum() - np.trace(c))

    @property
    def percentages(self) -> np.ndarray:
        """Off-diagonal counts as a percentage of all cell errors (diagonal 0)."""
        pct = self.counts.astype(float)
        np.fill_diagonal(pct, 0.0)
        total = pct.sum()
        return pct * (100.0 / total) if total else pct

    @property
    def cell_error_rate(self) -> float:
        total = self.counts.sum()
        return self.n_errors / total if total else 0.0


def cell_error_frequencies(written, read) -> CellTransitionMatrix:
    w = np.asarray(written, dtype=np.int64).ravel()
    r = np.asarray(read, dtype=np.int64).ravel()
    if w.shape != r.shape:
        raise ValueError(f"level sequences differ in length ({w.size} vs {r.size})")
    if w.size and (min(w.min(), r.min()) < 0 or max(w.max(), r.max()) > 3):
        raise ValueError("cell levels must lie in {0, 1, 2, 3}")
    counts = np.bincount(4 * w + r, minlength=16).reshape(4, 4)
    return CellTransitionMatrix(counts)


@dataclass(frozen=True)
class ErrorMap:
    grid: np.ndarray  # float; NaN marks an absent page/frame
    pages: list[int]


def error_map(dataset: ErrorDataset, block: int, pe_cycle=None,
              frame_length: int | None = None, page_kind=None) -> ErrorMap:
    """Per-frame error counts of one block; row i is page ``pages[i]``.

    Pages missing from the data between the first and last page index appear
    as all-NaN rows.
    """
    recs = dataset.select(page_kind, pe_cycle, block=block)
    if not recs:
        raise DatasetError(f"no records for block {block}")
    if len({r.pe_cycle for r in recs}) > 1:
        raise DatasetError(f"block {block} spans several P/E cycles; pass pe_cycle")
    n = recs[0].frame_length if frame_length is None else int(frame_length)
    n_fr = recs[0].frame_length // n
    if n_fr < 1:
        raise DatasetError(f"frame length {n} exceeds record length")
    by_page = {r.page: r for r in recs}
    pages = list(range(min(by_page), max(by_page) + 1))
    grid = np.full((len(pages), n_fr), np.nan)
    for i, pg in enumerate(pages):
        rec = by_page.get(pg)
        if rec is not None:
            k0, k1 = _record_frame_counts(rec, n)
            grid[i] = k0 + k1
    return ErrorMap(grid=grid, pages=pages)
