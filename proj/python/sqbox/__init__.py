"""Distribution-free prediction boxes and trajectory bands.

Thin wrapper over the compiled core. All estimators are split-conformal:
finite-sample coverage holds for exchangeable data with no distributional
assumptions.
"""

from sqbox._core import (
    Band,
    BoxInterval,
    CteModel,
    SqboxError,
    SqboxModel,
    binomial_cdf,
    binomial_sf,
    conformal_index,
    conformal_quantile,
    coverage_ci_lower,
    fit_bonferroni,
    fit_cte,
    fit_sbox,
    fit_sqbox,
    load_cte_model,
    load_sqbox_model,
    model_kind_in_file,
    simulate,
)

__all__ = [
    "Band",
    "BoxInterval",
    "CteModel",
    "SqboxError",
    "SqboxModel",
    "binomial_cdf",
    "binomial_sf",
    "conformal_index",
    "conformal_quantile",
    "coverage_ci_lower",
    "fit_bonferroni",
    "fit_cte",
    "fit_sbox",
    "fit_sqbox",
    "load_cte_model",
    "load_sqbox_model",
    "model_kind_in_file",
    "simulate",
]
