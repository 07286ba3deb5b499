"""Double cross-validation for the number of factors in approximate factor models."""

__version__ = "0.1.0"

from .criteria import IcCurve, ic1_curve, ic1_penalty, residual_variance  # noqa: E402
from .dcv import (  # noqa: E402
    DcvCurve,
    FoldPlan,
    dcv_curve,
    make_folds,
    press_error,
    select_d,
    select_number_of_factors,
)
from .factors import (  # noqa: E402
    FactorScores,
    LoadingEstimate,
    estimate_loadings,
    ols_factor_scores,
    projection_leverages,
    rescale_loadings,
)
from .spectra import EigenSystem, gram_eigen  # noqa: E402

__all__ = [
    "DcvCurve", "EigenSystem", "FactorScores", "FoldPlan", "IcCurve", "LoadingEstimate",
    "dcv_curve", "estimate_loadings", "gram_eigen", "ic1_curve", "ic1_penalty",
    "make_folds", "ols_factor_scores", "press_error", "projection_leverages",
    "rescale_loadings", "residual_variance", "select_d", "select_number_of_factors",
]
