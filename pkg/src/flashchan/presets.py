"""Reference measurements for two MLC chips (vendors "A" and "B") and
helpers that turn them into channel models and reference datasets.

Beta-binomial shapes are only tabulated for the upper page; the lower page
of :func:`reference_model` reuses them.
"""

from __future__ import annotations

import json
from functools import lru_cache
from importlib import resources

import numpy as np

from .channels import BacParams, BbmParams, Dmc4Params, TwoPageModel
from .errordata import ErrorDataset, PageKind, synthesize_dataset

FIXTURE = "reference.json"


@lru_cache(maxsize=None)
def _load() -> dict:
    text = resources.files(__package__).joinpath("data", FIXTURE).read_text(encoding="utf-8")
    return json.loads(text)


def fixture() -> dict:
    """A fresh copy of the fixture document."""
    return json.loads(json.dumps(_load()))


def _vendor(vendor: str) -> dict:
    try:
        return _load()["vendors"][vendor.upper()]
    except KeyError:
        raise ValueError(f"unknown vendor {vendor!r}; expected 'A' or 'B'") from None


def _pe_key(doc: dict, pe_cycle: int) -> str:
    key = str(int(pe_cycle))
    if key not in doc:
        raise ValueError(f"no reference data at {pe_cycle} P/E cycles; have {sorted(map(int, doc))}")
    return key


VENDORS = ("A", "B")
FRAME_LENGTH: int = _load()["frame_length"]
MODEL_FRAMES: int = _load()["model_frames"]
PE_CYCLES: tuple[int, ...] = tuple(_load()["pe_cycles"])


def empirical_frames(vendor: str) -> int:
    return int(_vendor(vendor)["empirical_frames"])


def bbm_params(vendor: str, pe_cycle: int) -> BbmParams:
    """Upper-page beta-binomial shapes (a, b, c, d)."""
    table = _vendor(vendor)["bbm_upper"]
    return BbmParams(*table[_pe_key(table, pe_cycle)])


def count_moments(vendor: str, pe_cycle: int, page) -> tuple[float, float]:
    """Measured (mean, variance) of the per-frame error count, N = 8192."""
    table = _vendor(vendor)["count_moments"]
    mean, var = table[_pe_key(table, pe_cycle)][PageKind.parse(page).value]
    return float(mean), float(var)


def ks_reference(vendor: str, model: str, page) -> float:
    """Measured-vs-model K-S statistic at 8000 P/E cycles."""
    return float(_vendor(vendor)["ks_8000"][model][PageKind.parse(page).value])


def cell_error_percentages(vendor: str) -> np.ndarray:
    return np.array(_vendor(vendor)["cell_error_percentages"], dtype=float)


def cell_error_rate(vendor: str) -> float:
    return float(_vendor(vendor)["cell_error_rate"])


def dmc4_params(vendor: str) -> Dmc4Params:
    return Dmc4Params.from_error_percentages(cell_error_percentages(vendor), cell_error_rate(vendor))


def reference_model(vendor: str, pe_cycle: int) -> TwoPageModel:
    upper = bbm_params(vendor, pe_cycle)
    return TwoPageModel(lower=upper, upper=upper)


def mean_matched_bac(params: BbmParams) -> BacParams:
    return BacParams(params.mean_p, params.mean_q)


def reference_dataset(vendor: str, pe_cycle: int, seed: int, n_frames: int | None = None,
                       **kwargs) -> ErrorDataset:
    """Synthetic stand-in for one vendor's measurements at ``pe_cycle``."""
    n = empirical_frames(vendor) if n_frames is None else n_frames
    return synthesize_dataset(
        reference_model(vendor, pe_cycle), n, FRAME_LENGTH, pe_cycle=pe_cycle, seed=seed,
        vendor=f"reference-{vendor.upper()}", **kwargs,
    )
