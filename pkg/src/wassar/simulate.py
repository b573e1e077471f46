"""Simulation of stationary WAR(p) density time series.

Innovations are random tangent vectors ``eps_t(u)`` of three families::

    constant     eps_t(u) = eta_t
    linear       eps_t(u) = eta_t + delta_t * u
    sinusoidal   eps_t(u) = eta_t + sin(delta_t * u)

with ``delta_t ~ Uniform(-b, b)``.  ``sup |eps_t'| <= b`` is the number that
has to stay below ``1 / sum |psi_i|`` for every simulated transport map to be
increasing.
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import signal

from .errors import DataError, NumericalError
from .grid import DensitySeries, Grid, QuantileFn, probability_grid
from .war import fit_war, psi_truncated

VARIANTS = ("constant", "linear", "sinusoidal")
ETA_DISTS = ("normal", "uniform")

_ALIASES = {"const": "constant", "lin": "linear", "sin": "sinusoidal"}


@dataclass(frozen=True)
class InnovationModel:
    variant: str = "constant"
    eta_sd: float = 1.0
    delta_bound: float = 0.0
    eta_dist: str = "normal"

    def __post_init__(self):
        variant = _ALIASES.get(self.variant, self.variant)
        if variant not in VARIANTS:
            raise DataError("bad-innovation", f"unknown innovation family {self.variant!r}")
        if self.eta_dist not in ETA_DISTS:
            raise DataError("bad-innovation", f"unknown eta distribution {self.eta_dist!r}")
        if self.eta_sd < 0 or self.delta_bound < 0:
            raise DataError("bad-innovation", "scales must be nonnegative")
        object.__setattr__(self, "variant", variant)

    @property
    def bound(self):
        """Almost-sure bound on ``sup_u |eps_t'(u)|``."""
        return 0.0 if self.variant == "constant" else float(self.delta_bound)

    def _eta(self, rng, size):
        if self.eta_dist == "normal":
            return self.eta_sd * rng.standard_normal(size)
        half = self.eta_sd * np.sqrt(3.0)
        return rng.uniform(-half, half, size)

    def field(self, eta, delta, u):
        eta = np.asarray(eta, dtype=float)[..., None]
        delta = np.asarray(delta, dtype=float)[..., None]
        if self.variant == "constant":
            return eta + 0.0 * u
        if self.variant == "linear":
            return eta + delta * u
        return eta + np.sin(delta * u)

    def draw(self, rng, u, size):
        """``size`` independent innovation fields evaluated at ``u``."""
        eta = self._eta(rng, size)
        delta = rng.uniform(-self.delta_bound, self.delta_bound, size)
        return self.field(eta, delta, np.asarray(u, dtype=float))

    def _nodes(self):
        if self.eta_dist == "normal":
            x, w = np.polynomial.hermite_e.hermegauss(10)
            eta, weta = self.eta_sd * x, w / w.sum()
        else:
            x, w = np.polynomial.legendre.leggauss(10)
            eta, weta = self.eta_sd * np.sqrt(3.0) * x, w / 2
        if self.variant == "constant" or self.delta_bound == 0:
            delta, wdelta = np.zeros(1), np.ones(1)
        else:
            x, w = np.polynomial.legendre.leggauss(40)
            delta, wdelta = self.delta_bound * x, w / 2
        E, D = np.meshgrid(eta, delta, indexing="ij")
        W = np.outer(weta, wdelta)
        return E.ravel(), D.ravel(), W.ravel()

    def population_moments(self, u):
        """Covariance kernel ``C(u, v)`` and ``E eps^2(u) eps^2(v)`` by quadrature."""
        eta, delta, w = self._nodes()
        eps = self.field(eta, delta, np.asarray(u, dtype=float))
        C = eps.T @ (w[:, None] * eps)
        sq = eps * eps
        M4 = sq.T @ (w[:, None] * sq)
        return C, M4

    def population_stats(self, mean_quantile: QuantileFn):
        """Exact ``(sigma2_eps, K1, K2, int C(u,u) f_mean(u) du)`` at a mean density."""
        C, M4 = self.population_moments(mean_quantile.values)
        w = mean_quantile.grid.weights
        d = np.diag(C)
        trace = float(w @ d)
        k1 = float(w @ (C * C) @ w)
        k2 = float(w @ (M4 - 2 * C * C - np.outer(d, d)) @ w)
        return k1 / trace**2, k1, k2, trace


def draw_innovation(model: InnovationModel, rng, mean_quantile: QuantileFn) -> np.ndarray:
    """One innovation field on the probability grid, ``eps_t(Q_mean(s))``."""
    return model.draw(rng, mean_quantile.values, 1)[0]


@dataclass(frozen=True)
class SimConfig:
    beta: tuple
    innovation: InnovationModel
    n: int
    burn_in: int = 1000
    s_grid: Grid = field(default_factory=probability_grid)
    mean_quantile: Optional[QuantileFn] = None
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "beta", tuple(float(b) for b in np.atleast_1d(self.beta)))
        if self.mean_quantile is None:
            object.__setattr__(self, "mean_quantile", QuantileFn(self.s_grid, self.s_grid.points))
        elif not self.mean_quantile.grid.same_as(self.s_grid):
            raise DataError("grid-mismatch", "mean quantile must live on s_grid")
        if self.n < 1 or self.burn_in < 0:
            raise DataError("bad-config", "n must be positive and burn_in nonnegative")


def validate_compatibility(config: SimConfig):
    """Check ``bound <= 1 / sum |psi_i|``.

    Returns
    -------
    ok : bool
    margin : float
        ``1 / sum |psi_i| - bound``; negative when incompatible.
    """
    psi = psi_truncated(config.beta)
    limit = 1.0 / np.abs(psi).sum()
    margin = limit - config.innovation.bound
    return bool(margin >= 1e-12), float(margin)


def rng_for(seed, replicate=0):
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(replicate)]))


def simulate_war(config: SimConfig, replicate: int = 0) -> DensitySeries:
    """Stationary WAR(p) quantile series; replicate ``r`` uses stream ``(seed, r)``."""
    ok, margin = validate_compatibility(config)
    if not ok:
        raise NumericalError(
            "incompatible-innovations",
            f"innovation derivative bound exceeds 1/sum|psi| by {-margin:.3g}",
        )
    rng = rng_for(config.seed, replicate)
    base = config.mean_quantile.values
    total = config.burn_in + config.n
    eps = config.innovation.draw(rng, base, total)
    a = np.concatenate(([1.0], -np.asarray(config.beta)))
    X = signal.lfilter([1.0], a, eps, axis=0)[config.burn_in:]
    Q = X + base
    if np.any(np.diff(Q, axis=1) < -1e-12 * max(1.0, float(np.abs(Q).max()))):
        raise NumericalError("non-monotone", "simulated transport map is not increasing")
    return DensitySeries(config.s_grid, Q)


def _estimates_chunk(args):
    config, order, reps = args
    return np.array([fit_war(simulate_war(config, r), order, inference=False).beta for r in reps])


def replicate_estimates(config: SimConfig, order: int, n_reps: int, jobs: int = 1) -> np.ndarray:
    """``beta_hat`` for replicates ``0..n_reps-1``; shape ``(n_reps, order)``."""
    reps = np.arange(n_reps)
    if jobs <= 1:
        return _estimates_chunk((config, order, reps))
    chunks = [(config, order, c) for c in np.array_split(reps, jobs * 4) if c.size]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return np.vstack(list(pool.map(_estimates_chunk, chunks)))
