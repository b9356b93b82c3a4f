"""Statistical engine: correlations, OLS, GAM, and rolling predictions."""

from .correlations import (
    CorrelationResult,
    correlations_to_frame,
    grouped_correlations,
    pearson_bootstrap,
)
from .gam import GamFit, fit_gam
from .regression import RegressionFit, design_matrix, fit_ols, regression_report
from .rolling import rolling_predict
from .seeds import derive_seed

__all__ = [
    "CorrelationResult", "correlations_to_frame", "grouped_correlations",
    "pearson_bootstrap", "GamFit", "fit_gam", "RegressionFit", "design_matrix",
    "fit_ols", "regression_report", "rolling_predict", "derive_seed",
]
