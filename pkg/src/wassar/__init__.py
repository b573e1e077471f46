"""Wasserstein autoregressive models for time series of univariate densities.

Densities are handled through their quantile functions on a shared
probability grid, where the Wasserstein geometry becomes linear.
"""

from .errors import DataError, NumericalError, WassarError
from .ffwar import FfwarFit, FpcaBasis, fit_ffwar, forecast_ffwar, fpca
from .forecast import DistributionForecast, forecast_from_tangent, forecast_multi, forecast_one
from .grid import (
    DensityFn,
    DensitySeries,
    Grid,
    QuantileFn,
    density_to_quantile,
    integrate,
    kde_estimate,
    probability_grid,
    quantile_to_density,
    support_grid,
)
from .metrics import METRICS, REPORT_METRICS, evaluate_metric
from .selection import (
    BacktestScore,
    SelectionResult,
    rolling_backtest,
    select_ffwar,
    select_order_window,
)
from .simulate import InnovationModel, SimConfig, replicate_estimates, simulate_war, validate_compatibility
from .war import (
    WarFit,
    acf_asymptotic_covariance,
    asymptotic_covariance,
    check_causality,
    fit_war,
    psi_truncated,
    psi_weights,
    wasserstein_acf,
)
from .wasserstein import (
    TangentField,
    exp_map,
    frechet_mean,
    log_map,
    wasserstein_distance,
    wasserstein_variance,
)

__version__ = "0.1.0"
