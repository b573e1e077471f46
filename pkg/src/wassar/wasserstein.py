"""Wasserstein geometry of univariate distributions in quantile coordinates.

With ``s = F(u)`` the weighted inner product of the tangent space at a base
density becomes the plain L2(ds) inner product, so every quantity here is
a quadrature over the shared probability grid.  A tangent vector ``V`` at
the base is stored through its values ``V(Q_base(s))``.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError
from .grid import (
    DensityFn,
    DensitySeries,
    Grid,
    QuantileFn,
    cdf_to_density,
    check_covers,
    extend_linear,
    integrate,
    is_monotone,
    pushforward_cdf,
)


def _check_same_grid(a, b):
    if not a.same_as(b):
        raise DataError("grid-mismatch", "objects are defined on different grids")


@dataclass(frozen=True, eq=False)
class TangentField:
    """Tangent vector at ``base_quantile``, stored in quantile coordinates."""

    base_quantile: QuantileFn
    values: np.ndarray
    monotone_ok: bool = field(init=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != self.base_quantile.values.shape:
            raise DataError("length-mismatch", "tangent values do not match the base grid")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(
            self, "monotone_ok", is_monotone(v + self.base_quantile.values)
        )

    @property
    def grid(self):
        return self.base_quantile.grid

    def norm(self):
        """Norm in the tangent space at the base (L2(ds) in these coordinates)."""
        return float(np.sqrt(integrate(self.values**2, self.grid)))

    def inner(self, other):
        _check_same_grid(self.grid, other.grid)
        return float(integrate(self.values * other.values, self.grid))


def wasserstein_distance(f: QuantileFn, g: QuantileFn) -> float:
    """2-Wasserstein distance, the L2(ds) distance of the quantile functions."""
    _check_same_grid(f.grid, g.grid)
    return float(np.sqrt(max(integrate((g.values - f.values) ** 2, f.grid), 0.0)))


def log_map(base: QuantileFn, target: QuantileFn) -> TangentField:
    """Optimal transport displacement from ``base`` to ``target``.

    In quantile coordinates ``(G^{-1} o F - id)(Q_base(s))`` is simply
    ``target(s) - base(s)``.
    """
    _check_same_grid(base.grid, target.grid)
    return TangentField(base, target.values - base.values)


def auto_support_grid(lo, hi, n_points, pad=0.05):
    width = hi - lo
    if width <= 0:
        width = max(abs(lo), 1.0)
    return Grid(np.linspace(lo - pad * width, hi + pad * width, n_points))


def pushforward(base: QuantileFn, values):
    """Extended ``(s, y)`` nodes of the map ``s -> values(s) + base(s)``."""
    s_ext = base.grid.extended()
    y_ext = extend_linear(np.asarray(values) + base.values, base.grid)
    return s_ext, y_ext


def exp_map_cdf(base: QuantileFn, v: TangentField, u_grid: Grid) -> np.ndarray:
    """Cdf of ``(V + id)_# mu_base`` on ``u_grid``.

    Equals the measure of ``{s : V(Q_base(s)) + Q_base(s) <= u}``; the
    monotone case reduces to inverting the pushed-forward quantile.
    """
    if not v.grid.same_as(base.grid) or not np.array_equal(
        v.base_quantile.values, base.values
    ):
        raise DataError("base-mismatch", "tangent field is not based at this quantile")
    y = v.values + base.values
    check_covers(u_grid, float(np.min(y)), float(np.max(y)))
    s_ext, y_ext = pushforward(base, v.values)
    return pushforward_cdf(y_ext, s_ext, u_grid.points)


def exp_map(base: QuantileFn, v: TangentField, u_grid: Grid, smooth=False) -> DensityFn:
    """Density of the exponential map ``Exp_base(V)`` on ``u_grid``."""
    return cdf_to_density(exp_map_cdf(base, v, u_grid), u_grid, smooth)


def frechet_mean(series: DensitySeries) -> QuantileFn:
    """Wasserstein (Frechet) mean: the pointwise average of quantile functions."""
    if len(series) < 1:
        raise DataError("empty-series", "cannot average an empty series")
    return QuantileFn(series.grid, np.maximum.accumulate(series.values.mean(axis=0)))


def wasserstein_variance(series: DensitySeries, mean: QuantileFn) -> float:
    """Average squared Wasserstein distance of the series to ``mean``."""
    _check_same_grid(series.grid, mean.grid)
    sq = integrate((series.values - mean.values) ** 2, series.grid)
    return float(np.mean(sq))
