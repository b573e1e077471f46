"""Fully functional WAR(p): operator-valued coefficients through FPCA.

The centred quantile functions are projected on the leading eigenfunctions
of their covariance operator (inner product L2(ds)), a VAR(p) without
intercept is fitted to the score vectors by least squares, and the
coefficient matrices define the kernels

    phi_j(s, s') = sum_{a,b} A_j[a, b] e_a(s) e_b(s').
"""

from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from .errors import DataError, NumericalError
from .forecast import forecast_from_tangent
from .grid import DensitySeries, Grid, QuantileFn
from .wasserstein import frechet_mean


@dataclass(frozen=True, eq=False)
class FpcaBasis:
    eigenfunctions: np.ndarray  # (m, grid size), orthonormal in L2(ds)
    eigenvalues: np.ndarray     # all of them, nonincreasing
    n_components: int
    fraction: float             # variance fraction of the retained components

    def scores(self, X, grid: Grid):
        return (X * grid.weights) @ self.eigenfunctions.T

    def reconstruct(self, scores):
        return scores @ self.eigenfunctions


def fpca(series: DensitySeries, mean: QuantileFn, R: float) -> FpcaBasis:
    """Smallest eigenbasis of the centred series explaining a fraction ``R`` of variance."""
    if not 0 < R <= 1:
        raise DataError("bad-fraction", "R must lie in (0, 1]")
    if len(series) < 2:
        raise DataError("too-short", "FPCA needs at least two observations")
    X = series.values - mean.values
    w = series.grid.weights
    sw = np.sqrt(w)
    Y = X * sw
    C = Y.T @ Y / X.shape[0]
    vals, vecs = np.linalg.eigh((C + C.T) / 2)
    order = np.argsort(vals)[::-1]
    vals, vecs = vals[order], vecs[:, order]
    vals = np.where(vals < 0, 0.0, vals)
    total = vals.sum()
    scale = 1.0 + float(w @ mean.values**2)
    if not total > 1e-24 * scale:
        raise NumericalError("zero-variance", "the series has no variance to decompose")
    frac = np.cumsum(vals) / total
    nonzero = int(np.count_nonzero(vals > 1e-12 * vals[0]))
    m = min(int(np.searchsorted(frac, R - 1e-12) + 1), nonzero)
    funcs = (vecs[:, :m] / sw[:, None]).T
    # fix signs so the largest-magnitude entry of each eigenfunction is positive
    idx = np.argmax(np.abs(funcs), axis=1)
    funcs *= np.sign(funcs[np.arange(m), idx])[:, None]
    return FpcaBasis(funcs, vals, m, float(frac[m - 1]))


@dataclass(frozen=True, eq=False)
class FfwarFit:
    order: int
    R: float
    basis: Optional[FpcaBasis]
    var_coefficients: np.ndarray  # (p, m, m); xi_t ~ sum_j A_j xi_{t-j}
    mean_quantile: QuantileFn
    n_obs: int

    @property
    def grid(self):
        return self.mean_quantile.grid

    def kernel(self, j):
        """``phi_j(s, s')`` on the grid for lag ``j`` (1-based)."""
        m = len(self.grid)
        if self.basis is None or self.basis.n_components == 0:
            return np.zeros((m, m))
        E = self.basis.eigenfunctions
        return E.T @ self.var_coefficients[j - 1] @ E

    def to_dict(self):
        b = self.basis
        return {
            "method": "ffwar",
            "order": self.order,
            "R": self.R,
            "grid": self.grid.points.tolist(),
            "mean_quantile": self.mean_quantile.values.tolist(),
            "eigenvalues": [] if b is None else b.eigenvalues.tolist(),
            "eigenfunctions": [] if b is None else b.eigenfunctions.tolist(),
            "var_coefficients": self.var_coefficients.tolist(),
            "n_obs": self.n_obs,
        }

    @classmethod
    def from_dict(cls, d):
        from .grid import PROBABILITY

        grid = Grid(d["grid"], PROBABILITY)
        funcs = np.asarray(d["eigenfunctions"], dtype=float).reshape(-1, len(grid))
        vals = np.asarray(d["eigenvalues"], dtype=float)
        m = funcs.shape[0]
        basis = None
        if m:
            frac = float(vals[:m].sum() / vals.sum()) if vals.sum() > 0 else 1.0
            basis = FpcaBasis(funcs, vals, m, frac)
        A = np.asarray(d["var_coefficients"], dtype=float).reshape(int(d["order"]), m, m)
        return cls(int(d["order"]), float(d["R"]), basis, A,
                   QuantileFn(grid, d["mean_quantile"]), int(d.get("n_obs", 0)))


def fit_score_var(scores, p):
    """Least-squares VAR(p) without intercept: returns ``(p, m, m)`` matrices."""
    n, m = scores.shape
    if n - p < p * m:
        raise DataError("too-short", f"{n} observations cannot fit a {m}-dim VAR({p})")
    Y = scores[p:]
    Z = np.hstack([scores[p - j : n - j] for j in range(1, p + 1)])
    if np.linalg.matrix_rank(Z) < Z.shape[1]:
        raise NumericalError("singular-design", "score design matrix is rank deficient")
    B, *_ = np.linalg.lstsq(Z, Y, rcond=None)
    # B stacks A_j^T blocks row-wise
    return np.stack([B[j * m : (j + 1) * m].T for j in range(p)])


def fit_ffwar(series: DensitySeries, p: int, R: float) -> FfwarFit:
    n = len(series)
    if p < 1:
        raise DataError("bad-order", "order must be at least 1")
    mean = frechet_mean(series)
    try:
        basis = fpca(series, mean, R)
    except NumericalError as exc:
        if exc.code != "zero-variance":
            raise
        return FfwarFit(p, R, None, np.zeros((p, 0, 0)), mean, n)
    xi = basis.scores(series.values - mean.values, series.grid)
    return FfwarFit(p, R, basis, fit_score_var(xi, p), mean, n)


def predicted_tangent_ffwar(fit: FfwarFit, values):
    p = fit.order
    if values.shape[0] < p:
        raise DataError("too-short", f"need {p} observations to forecast, got {values.shape[0]}")
    if fit.basis is None or fit.basis.n_components == 0:
        return np.zeros(len(fit.grid))
    X = values[-p:][::-1] - fit.mean_quantile.values
    xi = fit.basis.scores(X, fit.grid)
    xi_next = sum(fit.var_coefficients[j] @ xi[j] for j in range(p))
    return fit.basis.reconstruct(xi_next)


def forecast_ffwar(fit: FfwarFit, series: DensitySeries, u_grid: Optional[Grid] = None,
                   smooth=False):
    if not series.grid.same_as(fit.grid):
        raise DataError("grid-mismatch", "series and fit use different grids")
    v = predicted_tangent_ffwar(fit, series.values)
    return forecast_from_tangent(fit.mean_quantile, v, u_grid, 1, smooth)
