"""Density forecasts from fitted WAR(p) models."""

from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from .errors import DataError, WassarError
from .grid import (
    DensityFn,
    DensitySeries,
    Grid,
    QuantileFn,
    cdf_to_density,
    pushforward_cdf,
    pushforward_quantile,
)
from .wasserstein import TangentField, auto_support_grid, pushforward

DEFAULT_U_POINTS = 512


@dataclass(frozen=True, eq=False)
class DistributionForecast:
    """Forecast distribution ``l`` steps ahead.

    ``quantile`` is the increasing rearrangement of the forecast map; it
    coincides with ``V + Q_mean`` whenever ``monotone_transport`` is true.
    """

    horizon: int
    quantile: QuantileFn
    cdf: np.ndarray
    density: DensityFn
    monotone_transport: bool
    tangent: Optional[TangentField] = None

    @property
    def u_grid(self):
        return self.density.grid


def _forecast_quantile(mean: QuantileFn, v_values):
    s_ext, y_ext = pushforward(mean, v_values)
    q = pushforward_quantile(y_ext, s_ext, mean.grid.points)
    return QuantileFn(mean.grid, np.maximum.accumulate(q)), y_ext


def resolve_u_grid(u_grid, lo, hi, n_points=DEFAULT_U_POINTS):
    """``u_grid`` if it covers ``[lo, hi]``, else a padded grid of the same size covering both."""
    if u_grid is not None:
        if u_grid.points[0] <= lo and u_grid.points[-1] >= hi:
            return u_grid
        n_points = len(u_grid)
        lo, hi = min(lo, u_grid.points[0]), max(hi, u_grid.points[-1])
    return auto_support_grid(lo, hi, n_points)


def _assemble(horizon, mean, v_values, u_grid, smooth=False):
    tangent = TangentField(mean, v_values)
    q, y_ext = _forecast_quantile(mean, v_values)
    cdf = pushforward_cdf(y_ext, mean.grid.extended(), u_grid.points)
    density = cdf_to_density(cdf, u_grid, smooth)
    return DistributionForecast(horizon, q, cdf, density, tangent.monotone_ok, tangent)


def forecast_from_tangent(mean: QuantileFn, v_values, u_grid: Optional[Grid] = None,
                          horizon=1, smooth=False) -> DistributionForecast:
    """Push a predicted tangent vector at ``mean`` through the exponential map."""
    _, y_ext = pushforward(mean, v_values)
    grid = resolve_u_grid(u_grid, float(y_ext.min()), float(y_ext.max()))
    return _assemble(horizon, mean, np.asarray(v_values, dtype=float), grid, smooth)


def predicted_tangent(fit, values):
    """``sum_i beta_i (Q_{n-i+1} - Q_mean)`` from the last ``p`` rows of ``values``."""
    p = fit.order
    if values.shape[0] < p:
        raise DataError("too-short", f"need {p} observations to forecast, got {values.shape[0]}")
    X = values[-p:][::-1] - fit.mean_quantile.values
    return fit.beta @ X


def forecast_one(fit, series: DensitySeries, u_grid: Optional[Grid] = None,
                 smooth=False) -> DistributionForecast:
    """One-step-ahead density forecast."""
    if not series.grid.same_as(fit.grid):
        raise DataError("grid-mismatch", "series and fit use different grids")
    v = predicted_tangent(fit, series.values)
    return forecast_from_tangent(fit.mean_quantile, v, u_grid, 1, smooth)


def forecast_multi(fit, series: DensitySeries, steps: int, u_grid: Optional[Grid] = None,
                   smooth=False) -> List[DistributionForecast]:
    """Iterated forecasts ``1..steps``, all on one support grid.

    Each forecast quantile is appended to the working series before the
    next step.  The quantile path does not depend on the support grid, so
    the grid is fixed afterwards to cover every step.
    """
    if steps < 1:
        raise DataError("bad-steps", "steps must be at least 1")
    if not series.grid.same_as(fit.grid):
        raise DataError("grid-mismatch", "series and fit use different grids")
    mean = fit.mean_quantile
    values = series.values
    predict = predicted_tangent
    if not hasattr(fit, "beta"):
        from .ffwar import predicted_tangent_ffwar as predict
    tangents, lo, hi = [], np.inf, -np.inf
    for step in range(1, steps + 1):
        v = predict(fit, values)
        try:
            q, y_ext = _forecast_quantile(mean, v)
        except WassarError as exc:
            raise WassarError("forecast-degenerate", f"step {step}: {exc}") from exc
        if np.ptp(q.values) == 0:
            raise WassarError("forecast-degenerate", f"step {step}: forecast collapsed to a point")
        tangents.append(v)
        lo, hi = min(lo, float(y_ext.min())), max(hi, float(y_ext.max()))
        values = np.vstack([values[-fit.order:], q.values])
    grid = resolve_u_grid(u_grid, lo, hi)
    return [_assemble(l, mean, v, grid, smooth) for l, v in enumerate(tangents, start=1)]
