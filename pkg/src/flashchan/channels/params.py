"""Per-page channel parameter sets and their JSON file format."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Union

import numpy as np

from ..errordata import PageKind


def _check_prob(name: str, value: float) -> None:
    if not (0.0 <= value <= 1.0) or math.isnan(value):
        raise ValueError(f"{name} must lie in [0, 1], got {value!r}")


@dataclass(frozen=True)
class BacParams:
    """Binary asymmetric channel: ``p`` = P(0->1), ``q`` = P(1->0)."""

    p: float
    q: float

    family = "bac"

    def __post_init__(self):
        _check_prob("p", self.p)
        _check_prob("q", self.q)


@dataclass(frozen=True)
class BbmParams:
    """Beta-binomial model: per-frame p ~ Beta(a, b), q ~ Beta(c, d)."""

    a: float
    b: float
    c: float
    d: float

    family = "bbm"

    def __post_init__(self):
        for name in ("a", "b", "c", "d"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise ValueError(f"beta shape {name} must be positive and finite, got {v!r}")

    @property
    def mean_p(self) -> float:
        return self.a / (self.a + self.b)

    @property
    def mean_q(self) -> float:
        return self.c / (self.c + self.d)


@dataclass(frozen=True)
class NaBacParams:
    """Normal-approximation BAC.

    ``mu0, var0`` target the 0->1 count per frame, ``mu1, var1`` the 1->0
    count.
    """

    mu0: float
    var0: float
    mu1: float
    var1: float

    family = "na_bac"

    def __post_init__(self):
        for name in ("mu0", "var0", "mu1", "var1"):
            v = getattr(self, name)
            if not (v >= 0 and math.isfinite(v)):
                raise ValueError(f"{name} must be finite and nonnegative, got {v!r}")


@dataclass(frozen=True)
class PaBacParams(NaBacParams):
    """Shifted-Poisson BAC; the Poisson rate is the variance, so var >= mean."""

    family = "pa_bac"

    def __post_init__(self):
        super().__post_init__()
        if self.var0 < self.mu0 or self.var1 < self.mu1:
            raise ValueError(
                "PA-BAC needs variance >= mean in both directions "
                f"(var0={self.var0}, mu0={self.mu0}, var1={self.var1}, mu1={self.mu1})"
            )


@dataclass(frozen=True)
class Dmc4Params:
    """4-ary cell-level DMC; ``transition[w][r]`` = P(read r | written w)."""

    transition: np.ndarray = field(compare=False)

    family = "dmc4"

    def __post_init__(self):
        t = np.array(self.transition, dtype=float)
        if t.shape != (4, 4):
            raise ValueError(f"transition matrix must be 4x4, got shape {t.shape}")
        if np.any(t < 0) or np.any(t > 1):
            raise ValueError("transition entries must lie in [0, 1]")
        if np.any(np.abs(t.sum(axis=1) - 1.0) > 1e-12):
            raise ValueError(f"transition rows must sum to 1, got {t.sum(axis=1)}")
        t.setflags(write=False)
        object.__setattr__(self, "transition", t)

    def __eq__(self, other):
        return isinstance(other, Dmc4Params) and np.array_equal(self.transition, other.transition)

    __hash__ = None

    @classmethod
    def from_error_percentages(cls, percentages, cell_error_rate: float) -> "Dmc4Params":
        """Build a DMC whose errors follow ``percentages`` (a 4x4 table of
        off-diagonal shares, in percent) at an overall per-cell error
        probability ``cell_error_rate`` under uniformly written levels."""
        pct = np.array(percentages, dtype=float)
        np.fill_diagonal(pct, 0.0)
        off = pct / pct.sum() * 4.0 * cell_error_rate
        if np.any(off.sum(axis=1) > 1):
            raise ValueError("cell_error_rate too large for this error profile")
        t = off.copy()
        np.fill_diagonal(t, 1.0 - off.sum(axis=1))
        return cls(t)


PageChannel = Union[BacParams, BbmParams, NaBacParams, PaBacParams]

_FAMILIES = {
    "bac": BacParams,
    "bbm": BbmParams,
    "na_bac": NaBacParams,
    "nabac": NaBacParams,
    "pa_bac": PaBacParams,
    "pabac": PaBacParams,
}


def family_class(name: str):
    try:
        return _FAMILIES[name.lower()]
    except KeyError:
        raise ValueError(f"unknown channel model {name!r}") from None


@dataclass(frozen=True)
class TwoPageModel:
    """Independent channels for the lower (MSB) and upper (LSB) pages."""

    lower: PageChannel
    upper: PageChannel

    def page(self, kind) -> PageChannel:
        kind = PageKind.parse(kind)
        return self.lower if kind is PageKind.LOWER else self.upper


def mean_bac(params, frame_length: int) -> BacParams:
    """BAC with the same average per-direction error rates as ``params``."""
    if isinstance(params, BacParams):
        return params
    if isinstance(params, BbmParams):
        return BacParams(params.mean_p, params.mean_q)
    if isinstance(params, NaBacParams):
        half = frame_length / 2.0
        return BacParams(min(1.0, params.mu0 / half), min(1.0, params.mu1 / half))
    raise TypeError(f"no mean BAC for {type(params).__name__}")


def _page_dict(params) -> dict:
    return {k: float(v) for k, v in asdict(params).items()}


def model_to_json(model, frame_length: int | None = None, pe_cycle: int | None = None,
                  **extra) -> dict:
    """Serialize a TwoPageModel or Dmc4Params into the parameter-file layout."""
    if isinstance(model, Dmc4Params):
        doc = {"model": "dmc4", "transition": model.transition.tolist()}
    else:
        fams = {model.lower.family, model.upper.family}
        doc = {"model": fams.pop() if len(fams) == 1 else "mixed", "pages": {}}
        for name in ("lower", "upper"):
            page = _page_dict(getattr(model, name))
            if doc["model"] == "mixed":
                page["model"] = getattr(model, name).family
            doc["pages"][name] = page
    if frame_length is not None:
        doc["n"] = int(frame_length)
    if pe_cycle is not None:
        doc["pe"] = int(pe_cycle)
    doc.update(extra)
    return doc


def model_from_json(doc) -> TwoPageModel | Dmc4Params:
    if isinstance(doc, (str, bytes)):
        doc = json.loads(doc)
    family = doc.get("model")
    if family is None:
        raise ValueError("parameter file lacks a 'model' field")
    if family == "dmc4":
        return Dmc4Params(np.asarray(doc["transition"], dtype=float))
    pages = doc.get("pages")
    if not pages or "lower" not in pages or "upper" not in pages:
        raise ValueError("parameter file needs pages.lower and pages.upper")
    built = {}
    for name in ("lower", "upper"):
        fields = dict(pages[name])
        cls = family_class(fields.pop("model", family))
        built[name] = cls(**fields)
    return TwoPageModel(**built)
