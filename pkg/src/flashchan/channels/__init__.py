"""Per-page channel models for MLC flash: BAC, beta-binomial, and the normal /
Poisson approximations, plus the cell-level 4-ary DMC."""

from .analytic import (
    SizeLimitExceeded,
    bac_moments,
    bbm_moments,
    bbm_split_moments,
    beta_binomial_pmf,
    binomial_pmf,
    k_pmf_exact,
    k_pmf_mixture,
)
from .fit import FITTERS, UnderdispersedData, fit_bac, fit_bbm, fit_na_bac, fit_pa_bac
from .params import (
    BacParams,
    BbmParams,
    Dmc4Params,
    NaBacParams,
    PaBacParams,
    TwoPageModel,
    family_class,
    mean_bac,
    model_from_json,
    model_to_json,
)
from .transmit import (
    bac_transmit,
    bbm_transmit,
    dmc4_transmit,
    draw_error_counts,
    na_bac_transmit,
    pa_bac_transmit,
    sample_counts,
    transmit,
    transmit_by_counts,
)

__all__ = [
    "BacParams", "BbmParams", "Dmc4Params", "NaBacParams", "PaBacParams", "TwoPageModel",
    "SizeLimitExceeded", "UnderdispersedData", "FITTERS",
    "bac_moments", "bbm_moments", "bbm_split_moments", "beta_binomial_pmf", "binomial_pmf",
    "k_pmf_exact", "k_pmf_mixture",
    "fit_bac", "fit_bbm", "fit_na_bac", "fit_pa_bac",
    "family_class", "mean_bac", "model_from_json", "model_to_json",
    "bac_transmit", "bbm_transmit", "dmc4_transmit", "draw_error_counts", "na_bac_transmit",
    "pa_bac_transmit", "sample_counts", "transmit", "transmit_by_counts",
]
