"""Grid-based representations of univariate distributions.

Distributions live on two kinds of grids: a *support* grid over the
variable ``u`` (densities and cdfs) and a *probability* grid over ``s`` in
(0, 1) (quantile functions).  Quantile functions are the canonical element
of a density time series; densities only appear at the boundaries
(kernel estimation on the way in, forecasts on the way out).

Probability grids never contain 0 or 1, so integrals over (0, 1) are
completed by extending the integrand linearly from the two outermost grid
intervals to the endpoints.  The same linear extension is used when a
quantile function is pushed back to a cdf, so the quadrature and the
pushforward agree about where the tail mass sits.
"""

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import DataError

SUPPORT = "support"
PROBABILITY = "probability"

_MONO_TOL = 1e-12


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Grid:
    """Strictly increasing evaluation points.

    Parameters
    ----------
    points : array_like
        At least two strictly increasing reals.
    kind : {"support", "probability"}
        Probability grids must lie inside (0, 1).
    """

    points: np.ndarray
    kind: str = SUPPORT
    weights: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        pts = _frozen(self.points)
        if pts.ndim != 1 or pts.size < 2:
            raise DataError("bad-grid", "a grid needs at least two points")
        if not np.all(np.isfinite(pts)) or np.any(np.diff(pts) <= 0):
            raise DataError("bad-grid", "grid points must be finite and strictly increasing")
        if self.kind not in (SUPPORT, PROBABILITY):
            raise DataError("bad-grid", f"unknown grid kind {self.kind!r}")
        if self.kind == PROBABILITY and (pts[0] <= 0 or pts[-1] >= 1):
            raise DataError("bad-grid", "probability grid points must lie in (0, 1)")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", _frozen(_quadrature_weights(pts, self.kind)))

    def __len__(self):
        return self.points.size

    def same_as(self, other):
        return (
            self is other
            or (self.kind == other.kind and np.array_equal(self.points, other.points))
        )

    def extended(self):
        """Points with 0 and 1 appended (probability grids only)."""
        if self.kind != PROBABILITY:
            raise DataError("bad-grid", "only probability grids extend to [0, 1]")
        return np.concatenate(([0.0], self.points, [1.0]))


def _quadrature_weights(pts, kind):
    if kind == SUPPORT:
        d = np.diff(pts)
        w = np.zeros_like(pts)
        w[:-1] += d / 2
        w[1:] += d / 2
        return w
    ext = np.concatenate(([0.0], pts, [1.0]))
    d = np.diff(ext)
    W = np.zeros_like(ext)
    W[:-1] += d / 2
    W[1:] += d / 2
    w = W[1:-1].copy()
    a = pts[0] / (pts[1] - pts[0])
    b = (1.0 - pts[-1]) / (pts[-1] - pts[-2])
    w[0] += W[0] * (1 + a)
    w[1] -= W[0] * a
    w[-1] += W[-1] * (1 + b)
    w[-2] -= W[-1] * b
    if np.any(w < 0):
        # pathological spacing: fall back to flat tails, which keeps the
        # quadrature a positive functional
        w = W[1:-1].copy()
        w[0] += W[0]
        w[-1] += W[-1]
    return w


def support_grid(lo, hi, n=512):
    return Grid(np.linspace(lo, hi, n), SUPPORT)


def probability_grid(n_intervals=100):
    """Midpoint-clamped uniform grid on (0, 1).

    ``k / n`` for ``k = 1..n-1`` plus ``0.5 / n`` and ``1 - 0.5 / n``, i.e.
    ``n + 1`` points for ``n`` subintervals.  The default gives
    0.005, 0.01, ..., 0.99, 0.995.
    """
    n = int(n_intervals)
    if n < 2:
        raise DataError("bad-grid", "need at least two subintervals")
    inner = np.arange(1, n) / n
    return Grid(np.concatenate(([0.5 / n], inner, [1 - 0.5 / n])), PROBABILITY)


def integrate(values, grid):
    """Trapezoidal integral of grid values.

    On a probability grid the result is an integral over all of (0, 1);
    see the module docstring for the tail convention.
    """
    v = np.asarray(values, dtype=float)
    if v.shape[-1] != len(grid):
        raise DataError("length-mismatch", f"{v.shape[-1]} values on a {len(grid)}-point grid")
    return v @ grid.weights


@dataclass(frozen=True, eq=False)
class DensityFn:
    """A density on a support grid together with its cdf.

    Build instances with :meth:`from_values`, which clips round-off
    negatives, renormalizes to unit trapezoidal mass and records the factor
    that was divided out.
    """

    grid: Grid
    values: np.ndarray
    cdf_values: np.ndarray
    renorm_factor: float = 1.0

    @classmethod
    def from_values(cls, grid, values):
        if grid.kind != SUPPORT:
            raise DataError("bad-grid", "densities live on support grids")
        v = np.asarray(values, dtype=float)
        if v.shape != (len(grid),):
            raise DataError("length-mismatch", "density values do not match the grid")
        if not np.all(np.isfinite(v)):
            raise DataError("bad-density", "non-finite density values")
        scale = max(float(np.max(np.abs(v))), 1.0)
        if np.any(v < -1e-9 * scale):
            raise DataError("bad-density", "negative density values")
        v = np.clip(v, 0.0, None)
        mass = integrate(v, grid)
        if not mass > 0:
            raise DataError("bad-density", "density has zero mass")
        v = v / mass
        d = np.diff(grid.points)
        cdf = np.concatenate(([0.0], np.cumsum(d * (v[:-1] + v[1:]) / 2)))
        return cls(grid, _frozen(v), _frozen(cdf), float(mass))

    def mean(self):
        return integrate(self.values * self.grid.points, self.grid)


@dataclass(frozen=True, eq=False)
class QuantileFn:
    """A nondecreasing function on a probability grid."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        if self.grid.kind != PROBABILITY:
            raise DataError("bad-grid", "quantile functions live on probability grids")
        v = _frozen(self.values)
        if v.shape != (len(self.grid),):
            raise DataError("length-mismatch", "quantile values do not match the grid")
        if not np.all(np.isfinite(v)):
            raise DataError("bad-quantile", "non-finite quantile values")
        if not is_monotone(v):
            raise DataError("non-monotone", "quantile values must be nondecreasing")
        object.__setattr__(self, "values", v)

    def extended(self):
        """``(s, Q(s))`` on the grid plus the linear extension to 0 and 1."""
        return self.grid.extended(), extend_linear(self.values, self.grid)

    def support(self):
        _, y = self.extended()
        return float(y[0]), float(y[-1])


def is_monotone(values, tol=_MONO_TOL):
    v = np.asarray(values, dtype=float)
    scale = max(1.0, float(np.max(np.abs(v)))) if v.size else 1.0
    return bool(np.all(np.diff(v) >= -tol * scale))


@dataclass(frozen=True, eq=False)
class DensitySeries:
    """Time-ordered quantile functions on one shared probability grid.

    ``values`` has shape ``(n, len(grid))``; row ``t`` is ``Q_t``.
    """

    grid: Grid
    values: np.ndarray
    timestamps: Optional[tuple] = None

    def __post_init__(self):
        v = _frozen(self.values)
        if v.ndim != 2 or v.shape[0] < 1 or v.shape[1] != len(self.grid):
            raise DataError("length-mismatch", "series must be an (n, grid size) array with n >= 1")
        if self.timestamps is not None:
            ts = tuple(self.timestamps)
            if len(ts) != v.shape[0]:
                raise DataError("length-mismatch", "one timestamp per observation")
            object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_quantiles(cls, quantiles: Sequence[QuantileFn], timestamps=None):
        if not quantiles:
            raise DataError("empty-series", "a series needs at least one element")
        grid = quantiles[0].grid
        for q in quantiles[1:]:
            if not q.grid.same_as(grid):
                raise DataError("grid-mismatch", "series elements must share one grid")
        return cls(grid, np.stack([q.values for q in quantiles]), timestamps)

    def __len__(self):
        return self.values.shape[0]

    def __getitem__(self, t):
        return QuantileFn(self.grid, self.values[t])

    @property
    def quantiles(self):
        return [self[t] for t in range(len(self))]

    def window(self, start, stop):
        ts = self.timestamps[start:stop] if self.timestamps is not None else None
        return DensitySeries(self.grid, self.values[start:stop], ts)

    def append(self, q):
        if not q.grid.same_as(self.grid):
            raise DataError("grid-mismatch", "appended quantile uses a different grid")
        return DensitySeries(self.grid, np.vstack([self.values, q.values]))


def extend_linear(values, grid):
    """Values at ``grid.extended()``: linear extrapolation to s = 0 and 1."""
    s = grid.points
    v = np.asarray(values, dtype=float)
    lo = v[..., 0] - (v[..., 1] - v[..., 0]) * s[0] / (s[1] - s[0])
    hi = v[..., -1] + (v[..., -1] - v[..., -2]) * (1 - s[-1]) / (s[-1] - s[-2])
    return np.concatenate((lo[..., None], v, hi[..., None]), axis=-1)


def level_set_cdf(y, s, u, chunk=4096):
    """Lebesgue measure of ``{x in [s_0, s_-1]: y(x) <= u}``.

    ``y`` is treated as piecewise linear between the nodes ``s``; it does
    not need to be monotone.  Each segment contributes the exact length of
    its sub-level set.
    """
    y = np.asarray(y, dtype=float)
    L = np.diff(np.asarray(s, dtype=float))
    ya, yb = y[:-1], y[1:]
    dy = yb - ya
    rising, falling = dy > 0, dy < 0
    safe = np.where(dy == 0, 1.0, dy)
    u = np.atleast_1d(np.asarray(u, dtype=float))
    out = np.empty(u.shape)
    for i in range(0, u.size, chunk):
        uc = u[i:i + chunk, None]
        t = np.clip((uc - ya) / safe, 0.0, 1.0)
        frac = np.where(rising, t, np.where(falling, 1.0 - t, (ya <= uc).astype(float)))
        out[i:i + chunk] = frac @ L
    return out


def _strictly_increasing(y):
    return bool(np.all(np.diff(y) > 0))


def pushforward_cdf(y_ext, s_ext, u):
    """Cdf of the pushforward of Uniform(0, 1) through piecewise-linear ``y``."""
    if _strictly_increasing(y_ext):
        return np.interp(u, y_ext, s_ext)
    return level_set_cdf(y_ext, s_ext, u)


def _generalized_inverse(x, F, s):
    """Smallest ``x`` with ``F(x) >= s``, linear between bracketing nodes."""
    idx = np.searchsorted(F, s, side="left")
    idx = np.clip(idx, 1, F.size - 1)
    F0, F1 = F[idx - 1], F[idx]
    x0, x1 = x[idx - 1], x[idx]
    with np.errstate(divide="ignore", invalid="ignore"):
        frac = np.where(F1 > F0, (s - F0) / (F1 - F0), 0.0)
    q = x0 + np.clip(frac, 0.0, 1.0) * (x1 - x0)
    return np.where(s <= F[0], x[0], q)


def pushforward_quantile(y_ext, s_ext, s_grid):
    """Increasing rearrangement of piecewise-linear ``y`` evaluated at ``s_grid``.

    The sub-level-set cdf is piecewise linear with knots at the values of
    ``y``, so evaluating it at the sorted knots and inverting is exact.
    """
    y_ext = np.asarray(y_ext, dtype=float)
    if _strictly_increasing(y_ext):
        return np.interp(s_grid, s_ext, y_ext)
    knots = np.unique(y_ext)
    if knots.size == 1:
        return np.full(np.shape(s_grid), knots[0])
    F = level_set_cdf(y_ext, s_ext, knots)
    F = np.maximum.accumulate(F)
    return _generalized_inverse(knots, F, np.asarray(s_grid, dtype=float))


def density_to_quantile(f: DensityFn, s_grid: Grid) -> QuantileFn:
    """Generalized inverse of ``f``'s cdf on ``s_grid``.

    Flat stretches of the cdf invert to their left endpoint.
    """
    if s_grid.kind != PROBABILITY:
        raise DataError("bad-grid", "quantiles need a probability grid")
    if np.count_nonzero(f.values > 0) <= 1:
        raise DataError("degenerate-support", "all mass sits at a single grid point")
    F = np.maximum.accumulate(f.cdf_values)
    q = _generalized_inverse(f.grid.points, F, s_grid.points)
    return QuantileFn(s_grid, np.maximum.accumulate(q))


def _smooth3(v):
    k = np.ones(3)
    return np.convolve(v, k, mode="same") / np.convolve(np.ones_like(v), k, mode="same")


def cdf_to_density(cdf, u_grid, smooth=False):
    dens = np.gradient(np.asarray(cdf, dtype=float), u_grid.points)
    if smooth:
        dens = _smooth3(dens)
    return DensityFn.from_values(u_grid, np.clip(dens, 0.0, None))


def check_covers(u_grid, lo, hi):
    span = max(hi - lo, abs(hi), abs(lo), 1.0)
    tol = 1e-9 * span
    if u_grid.points[0] > lo + tol or u_grid.points[-1] < hi - tol:
        raise DataError(
            "support-mismatch",
            f"grid [{u_grid.points[0]:.6g}, {u_grid.points[-1]:.6g}] does not cover "
            f"[{lo:.6g}, {hi:.6g}]",
        )


def quantile_to_density(q: QuantileFn, u_grid: Grid, smooth=False) -> DensityFn:
    """Density of ``q`` on ``u_grid`` via its cdf and finite differences.

    Differences are centered in the interior and one-sided at the ends;
    ``smooth`` applies a width-3 moving average before clipping.
    """
    if u_grid.kind != SUPPORT:
        raise DataError("bad-grid", "densities need a support grid")
    check_covers(u_grid, q.values[0], q.values[-1])
    s_ext, y_ext = q.extended()
    return cdf_to_density(pushforward_cdf(y_ext, s_ext, u_grid.points), u_grid, smooth)


def silverman_bandwidth(samples):
    x = np.asarray(samples, dtype=float)
    return 1.06 * np.std(x, ddof=1) * x.size ** (-1 / 5)


def kde_estimate(samples, u_grid: Grid, bandwidth="silverman") -> DensityFn:
    """Gaussian kernel density estimate, renormalized over ``u_grid``."""
    x = np.asarray(samples, dtype=float).ravel()
    x = x[np.isfinite(x)]
    if np.unique(x).size < 2:
        raise DataError("degenerate-sample", "need at least two distinct samples")
    if isinstance(bandwidth, str):
        if bandwidth != "silverman":
            raise DataError("bad-bandwidth", f"unknown bandwidth rule {bandwidth!r}")
        h = silverman_bandwidth(x)
    else:
        h = float(bandwidth)
    if not h > 0:
        raise DataError("bad-bandwidth", "bandwidth must be positive")
    u = u_grid.points
    dens = np.zeros_like(u)
    for i in range(0, x.size, 2048):
        z = (u[:, None] - x[None, i:i + 2048]) / h
        dens += np.exp(-0.5 * z * z).sum(axis=1)
    dens /= x.size * h * np.sqrt(2 * np.pi)
    return DensityFn.from_values(u_grid, dens)
