"""Rolling-origin backtests and data-driven choice of order, window and FPCA fraction.

For a window ``K`` the evaluation points are the last ``K`` observations;
the forecast for observation ``t`` is fitted on the ``K`` observations
immediately before it.  The score ``R_p(n, K)`` is the sum of the one-step
losses.
"""

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .errors import DataError, WassarError
from .ffwar import fit_ffwar, predicted_tangent_ffwar
from .forecast import forecast_from_tangent, predicted_tangent
from .grid import DensitySeries, quantile_to_density
from .metrics import METRICS, evaluate_metric
from .war import fit_war
from .wasserstein import auto_support_grid, pushforward

log = logging.getLogger(__name__)

DEFAULT_ORDERS = tuple(range(1, 11))
INTRADAY_WINDOWS = (20, 62)
MONTHLY_WINDOWS = (12, 24, 48)
DEFAULT_FRACTIONS = (0.4, 0.5, 0.6, 0.7, 0.8)


@dataclass(frozen=True)
class BacktestScore:
    method: str
    p: int
    K: int
    R: Optional[float]
    metric: str
    score: float
    losses: tuple
    diagnostics: tuple = ()


@dataclass(frozen=True)
class SelectionResult:
    p: int
    K: int
    R: Optional[float]
    table: List[BacktestScore] = field(default_factory=list)


def predict_tangent(window: DensitySeries, method: str, p: int, R: Optional[float] = None):
    """Fit on ``window`` and return ``(mean quantile, predicted tangent values)``.

    A window without Wasserstein variance predicts its own (constant) mean.
    """
    if method == "war":
        fit = fit_war(window, p, inference=False, allow_degenerate=True)
        return fit.mean_quantile, predicted_tangent(fit, window.values)
    if method == "ffwar":
        fit = fit_ffwar(window, p, R)
        return fit.mean_quantile, predicted_tangent_ffwar(fit, window.values)
    raise DataError("bad-method", f"unknown method {method!r}")


def _step_losses(series, t, method, p, K, R, metrics, u_points, smooth):
    window = series.window(t - K, t)
    mean, v = predict_tangent(window, method, p, R)
    _, y_fc = pushforward(mean, v)
    realized = series[t]
    _, y_obs = realized.extended()
    grid = auto_support_grid(min(y_fc.min(), y_obs.min()), max(y_fc.max(), y_obs.max()), u_points)
    fc = forecast_from_tangent(mean, v, grid, smooth=smooth)
    obs = quantile_to_density(realized, grid, smooth)
    return [evaluate_metric(m, fc.density, obs) for m in metrics]


def check_history(n, K, p, n_eval=None):
    n_eval = K if n_eval is None else n_eval
    if K < 1 or n_eval < 1 or n < K + n_eval + p:
        raise DataError("insufficient-history", f"n={n} < K+n_eval+p={K + n_eval + p}")


def backtest_losses(series: DensitySeries, method: str, metrics: Sequence[str], p: int, K: int,
                    R: Optional[float] = None, u_points=256, smooth=False, n_eval=None):
    """Per-step losses for several metrics at once.

    The last ``n_eval`` observations (default ``K``) are forecast, each
    from the ``K`` observations before it.  Returns ``(losses,
    diagnostics)`` where ``losses`` has shape ``(len(metrics), n_eval)``.
    A step whose fit or forecast fails scores ``inf`` and leaves a
    diagnostic string.
    """
    for m in metrics:
        if m not in METRICS:
            raise DataError("bad-metric", f"unknown metric {m!r}")
    n = len(series)
    n_eval = K if n_eval is None else int(n_eval)
    check_history(n, K, p, n_eval)
    losses = np.empty((len(metrics), n_eval))
    diags = []
    for i, t in enumerate(range(n - n_eval, n)):
        try:
            losses[:, i] = _step_losses(series, t, method, p, K, R, metrics, u_points, smooth)
        except (WassarError, np.linalg.LinAlgError) as exc:
            losses[:, i] = math.inf
            diags.append(f"t={t}: {exc}")
    return losses, diags


def rolling_backtest(series: DensitySeries, method: str, metric: str, p: int, K: int,
                     R: Optional[float] = None, u_points=256, smooth=False) -> BacktestScore:
    losses, diags = backtest_losses(series, method, [metric], p, K, R, u_points, smooth)
    row = tuple(float(x) for x in losses[0])
    return BacktestScore(method, p, K, R, metric, math.fsum(row), row, tuple(diags))


def _cell(args):
    series, method, metrics, p, K, R, u_points = args
    losses, diags = backtest_losses(series, method, metrics, p, K, R, u_points)
    out = []
    for m, row in zip(metrics, losses):
        row = tuple(float(x) for x in row)
        out.append(BacktestScore(method, p, K, R, m, math.fsum(row), row, tuple(diags)))
    return out


def score_cells(series, cells, metrics, u_points=256, jobs=1):
    """Backtest every ``(method, p, K, R)`` cell; returns ``{metric: [BacktestScore]}``.

    Cells with too little history are dropped.
    """
    n = len(series)
    todo = [(series, c[0], list(metrics), c[1], c[2], c[3], u_points)
            for c in cells if n >= 2 * c[2] + c[1]]
    if jobs > 1 and len(todo) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_cell, todo))
    else:
        results = [_cell(a) for a in todo]
    return {m: [r[i] for r in results] for i, m in enumerate(metrics)}


def _argmin(rows, key):
    return min(rows, key=lambda r: (r.score,) + key(r))


def choose_order_window(table: Sequence[BacktestScore], orders=None):
    """Two-stage argmin over a filled WAR score table: ``K`` at ``p = 1``, then ``p``.

    Ties go to the smaller window, then the smaller order.
    """
    stage1 = [r for r in table if r.p == 1]
    if not stage1:
        raise DataError("infeasible", "no feasible WAR(1) cell to choose the window")
    K_hat = _argmin(stage1, lambda r: (r.K,)).K
    stage2 = [r for r in table if r.K == K_hat and (orders is None or r.p in orders)]
    if not stage2:
        raise DataError("infeasible", f"no order is feasible at K={K_hat}")
    return _argmin(stage2, lambda r: (r.p,)).p, K_hat


def choose_ffwar(table: Sequence[BacktestScore]):
    """Joint argmin over ``(R, K)``; ties go to the smaller ``R``, then the smaller ``K``."""
    if not table:
        raise DataError("infeasible", "no window has enough history")
    best = _argmin(table, lambda r: (r.R, r.K))
    return best.R, best.K


def select_order_window(series: DensitySeries, orders: Sequence[int], windows: Sequence[int],
                        metric: str, full_grid=False, u_points=256, jobs=1) -> SelectionResult:
    """Two-stage choice: ``K`` with WAR(1), then ``p`` at that ``K``.

    With ``full_grid`` every ``(p, K)`` cell is scored (for the table) but
    the choice is still two-stage.
    """
    orders, windows = sorted(set(orders)), sorted(set(windows))
    if not orders or not windows:
        raise DataError("empty-candidates", "candidate sets must be nonempty")
    grid_orders = sorted(set(orders) | {1})
    if full_grid:
        cells = [("war", p, K, None) for K in windows for p in grid_orders]
        table = score_cells(series, cells, [metric], u_points, jobs)[metric]
    else:
        table = score_cells(series, [("war", 1, K, None) for K in windows], [metric], u_points, jobs)[metric]
        if not table:
            raise DataError("infeasible", "no window has enough history")
        _, K_hat = choose_order_window(table)
        cells = [("war", p, K_hat, None) for p in orders if p != 1]
        table += score_cells(series, cells, [metric], u_points, jobs)[metric]
    if not table:
        raise DataError("infeasible", "no window has enough history")
    p_hat, K_hat = choose_order_window(table, set(orders))
    return SelectionResult(p_hat, K_hat, None, table)


def select_ffwar(series: DensitySeries, fractions: Sequence[float], windows: Sequence[int],
                 metric: str, u_points=256, jobs=1) -> SelectionResult:
    """Joint choice of ``R`` and ``K`` for the fully functional model with ``p = 1``.

    Ties go to the smaller ``R``, then the smaller ``K``.
    """
    fractions, windows = sorted(set(fractions)), sorted(set(windows))
    if not fractions or not windows:
        raise DataError("empty-candidates", "candidate sets must be nonempty")
    cells = [("ffwar", 1, K, R) for R in fractions for K in windows]
    table = score_cells(series, cells, [metric], u_points, jobs)[metric]
    R_hat, K_hat = choose_ffwar(table)
    return SelectionResult(1, K_hat, R_hat, table)
