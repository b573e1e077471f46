"""Wasserstein autoregression of order p.

The model lives in the tangent space at the Wasserstein mean.  In quantile
coordinates the centred observations are ``X_t(s) = Q_t(s) - Q_mean(s)``
and every weighted integral over ``u`` becomes a plain integral over ``s``,
so estimation is Yule-Walker on integrated autocovariance traces.
"""

from dataclasses import dataclass, field, replace
from typing import List, Optional

import numpy as np
from scipy import linalg, signal

from .errors import DataError, NumericalError, WassarError
from .grid import DensitySeries, Grid, QuantileFn, PROBABILITY, integrate
from .wasserstein import frechet_mean

PSI_TOL = 1e-10
PSI_CAP = 100_000
_CAUSAL_MARGIN = 1e-9


@dataclass(frozen=True, eq=False)
class AutocovTrace:
    lag: int
    values: np.ndarray


@dataclass(frozen=True, eq=False)
class InnovationStats:
    """Plug-in innovation constants from the fitted residuals.

    ``sigma2_eps`` is the ratio ``K1 / (int C(s,s) ds)^2``; ``k2`` collects the
    fourth-order cumulant part and is zero for Gaussian innovations.
    """

    sigma2_eps: float
    k1: float
    k2: float
    trace: float
    c_diag: np.ndarray
    c_kernel: np.ndarray = field(repr=False)
    n_residuals: int = 0


@dataclass(frozen=True, eq=False)
class WarFit:
    order: int
    beta: np.ndarray
    mean_quantile: QuantileFn
    traces: List[AutocovTrace]
    gamma_matrix: np.ndarray
    n_obs: int
    causal: bool
    root_moduli: np.ndarray
    psi: Optional[np.ndarray] = None
    innovation_stats: Optional[InnovationStats] = None
    asym_cov: Optional[np.ndarray] = None

    @property
    def grid(self):
        return self.mean_quantile.grid

    def to_dict(self):
        st = self.innovation_stats
        return {
            "order": self.order,
            "beta": self.beta.tolist(),
            "grid": self.grid.points.tolist(),
            "mean_quantile": self.mean_quantile.values.tolist(),
            "lambda_traces": [tr.values.tolist() for tr in self.traces],
            "sigma2_eps": None if st is None else st.sigma2_eps,
            "k1": None if st is None else st.k1,
            "k2": None if st is None else st.k2,
            "c_trace": None if st is None else st.trace,
            "psi": None if self.psi is None else self.psi.tolist(),
            "asym_cov": None if self.asym_cov is None else self.asym_cov.tolist(),
            "causal": self.causal,
            "n_obs": self.n_obs,
        }

    @classmethod
    def from_dict(cls, d):
        grid = Grid(d["grid"], PROBABILITY)
        mean = QuantileFn(grid, d["mean_quantile"])
        traces = [AutocovTrace(h, np.asarray(v, dtype=float)) for h, v in enumerate(d["lambda_traces"])]
        r = np.array([integrate(t.values, grid) for t in traces])
        p = int(d["order"])
        beta = np.asarray(d["beta"], dtype=float)
        causal, moduli = check_causality(beta)
        st = None
        if d.get("sigma2_eps") is not None:
            st = InnovationStats(
                d["sigma2_eps"], d["k1"], d["k2"], d.get("c_trace") or float("nan"),
                np.array([]), np.empty((0, 0)),
            )
        return cls(
            order=p,
            beta=beta,
            mean_quantile=mean,
            traces=traces,
            gamma_matrix=linalg.toeplitz(r[:p]),
            n_obs=int(d.get("n_obs", 0)),
            causal=bool(d.get("causal", causal)),
            root_moduli=moduli,
            psi=None if d.get("psi") is None else np.asarray(d["psi"], dtype=float),
            innovation_stats=st,
            asym_cov=None if d.get("asym_cov") is None else np.asarray(d["asym_cov"], dtype=float),
        )


def autocov_traces(series: DensitySeries, mean: QuantileFn, max_lag: int) -> List[AutocovTrace]:
    """Diagonal sample autocovariances ``lambda_h(s)``, divisor ``n``."""
    n = len(series)
    if not 0 <= max_lag < n:
        raise DataError("bad-lag", f"max_lag must be in [0, {n - 1}]")
    if not mean.grid.same_as(series.grid):
        raise DataError("grid-mismatch", "mean and series use different grids")
    X = series.values - mean.values
    return [
        AutocovTrace(h, (X[: n - h] * X[h:]).sum(axis=0) / n) for h in range(max_lag + 1)
    ]


def _trace_integrals(traces, grid, mean):
    r = np.array([integrate(t.values, grid) for t in traces])
    scale = 1.0 + float(integrate(mean.values**2, grid))
    if not r[0] > 1e-24 * scale:
        raise NumericalError("zero-variance", "the series has no Wasserstein variance")
    return r


def wasserstein_acf(series: DensitySeries, max_lag: int, include_zero=False) -> np.ndarray:
    """Wasserstein autocorrelations ``rho_1..rho_H`` (``rho_0..rho_H`` with ``include_zero``)."""
    mean = frechet_mean(series)
    r = _trace_integrals(autocov_traces(series, mean, max_lag), series.grid, mean)
    rho = r / r[0]
    return rho if include_zero else rho[1:]


def psi_weights(beta, k_max: int) -> np.ndarray:
    """Coefficients ``psi_0..psi_kmax`` of ``1 / phi(z)``."""
    beta = np.atleast_1d(np.asarray(beta, dtype=float))
    impulse = np.zeros(int(k_max) + 1)
    impulse[0] = 1.0
    return signal.lfilter([1.0], np.concatenate(([1.0], -beta)), impulse)


def check_causality(beta):
    """Whether ``phi(z) = 1 - sum beta_j z^j`` has all roots outside the unit disk.

    Returns
    -------
    causal : bool
    moduli : ndarray
        Moduli of the roots of ``phi``, sorted ascending (empty when
        ``phi`` is constant).
    """
    beta = np.atleast_1d(np.asarray(beta, dtype=float))
    coeffs = np.concatenate((-beta[::-1], [1.0]))
    nz = np.flatnonzero(coeffs)
    coeffs = coeffs[nz[0]:]
    moduli = np.sort(np.abs(np.roots(coeffs))) if coeffs.size > 1 else np.array([])
    return bool(np.all(moduli > 1 + _CAUSAL_MARGIN)), moduli


def psi_truncated(beta, tol=PSI_TOL, cap=PSI_CAP) -> np.ndarray:
    """psi-weights cut where the absolute tail sum drops below ``tol``."""
    beta = np.atleast_1d(np.asarray(beta, dtype=float))
    causal, moduli = check_causality(beta)
    if not causal:
        raise NumericalError("non-causal", "psi-weights do not decay for a non-causal beta")
    if moduli.size == 0:
        return np.array([1.0])
    rate = 1.0 / moduli[0]
    p = beta.size
    k = 64
    while True:
        k = min(k, cap)
        psi = psi_weights(beta, k)
        # geometric extrapolation of the last p terms, with a safety factor for
        # repeated roots and transient growth
        tail = 10.0 * np.abs(psi[-p:]).sum() * rate / (1.0 - rate)
        if tail <= tol:
            nz = np.flatnonzero(np.abs(psi) > 0)
            return psi[: nz[-1] + 1] if nz.size else psi[:1]
        if k >= cap:
            raise NumericalError(
                "psi-truncation", f"psi tail still {tail:.3g} after {cap} terms (near unit root)"
            )
        k *= 2


def _psi_autocov(psi, max_lag=None):
    """``a(h) = sum_k psi_k psi_{k+h}`` for h = 0..max_lag."""
    full = signal.fftconvolve(psi, psi[::-1]) if psi.size > 256 else np.correlate(psi, psi, "full")
    a = full[psi.size - 1:]
    if max_lag is None:
        return a
    out = np.zeros(max_lag + 1)
    m = min(max_lag + 1, a.size)
    out[:m] = a[:m]
    return out


def beta_covariance(beta, sigma2_eps, psi=None) -> np.ndarray:
    """Asymptotic covariance of ``sqrt(n) (beta_hat - beta)``.

    ``sigma2_eps`` times the inverse of the Toeplitz matrix with entries
    ``sum_k psi_k psi_{k+|i-j|}``.
    """
    beta = np.atleast_1d(np.asarray(beta, dtype=float))
    if psi is None:
        psi = psi_truncated(beta)
    a = _psi_autocov(psi, beta.size - 1)
    cov = sigma2_eps * np.linalg.inv(linalg.toeplitz(a))
    return (cov + cov.T) / 2


def estimate_innovation_stats(series: DensitySeries, fit: WarFit) -> InnovationStats:
    """Residual-based estimates of ``sigma2_eps``, ``K1`` and ``K2``."""
    n, p = len(series), fit.order
    if n - p < 3:
        raise NumericalError("insufficient-residuals", f"{n - p} residuals; need at least 3")
    if not fit.grid.same_as(series.grid):
        raise DataError("grid-mismatch", "fit and series use different grids")
    X = series.values - fit.mean_quantile.values
    E = X[p:].copy()
    for j, b in enumerate(fit.beta, start=1):
        E -= b * X[p - j : n - j]
    E -= E.mean(axis=0)
    N = E.shape[0]
    C = E.T @ E / N
    w = series.grid.weights
    diag = np.diag(C).copy()
    trace = float(w @ diag)
    scale = 1.0 + float(integrate(fit.mean_quantile.values**2, series.grid))
    if not trace > 1e-24 * scale:
        raise NumericalError("zero-variance", "residuals vanish; innovation constants undefined")
    C2 = C * C
    k1 = float(w @ C2 @ w)
    E2 = E * E
    M4 = E2.T @ E2 / N
    k2 = float(w @ (M4 - 2 * C2 - np.outer(diag, diag)) @ w)
    return InnovationStats(k1 / trace**2, k1, k2, trace, diag, C, N)


def asymptotic_covariance(fit: WarFit) -> np.ndarray:
    """Asymptotic covariance of ``sqrt(n) (beta_hat - beta)`` for a fitted model."""
    if not fit.causal:
        raise NumericalError("non-causal", "asymptotics need a causal fit")
    if fit.innovation_stats is None:
        raise NumericalError("no-innovation-stats", "fit carries no innovation estimates")
    psi = fit.psi if fit.psi is not None else psi_truncated(fit.beta)
    return beta_covariance(fit.beta, fit.innovation_stats.sigma2_eps, psi)


def acf_covariance(psi, h, k1, k2, c_trace) -> np.ndarray:
    """``D V D^T`` for ``sqrt(n) (rho_hat_1..h - rho_1..h)``.

    ``V`` indexes lags 0..h.  Summing the lemma's S-terms over ``r`` collapses
    them to products of ``a(h) = sum_k psi_k psi_{k+h}``::

        v_ij = K2 a(i) a(j) + K1 (c(j - i) + c(i + j)),  c(d) = sum_r a(r) a(r + d)

    ``D`` uses the model-implied ``rho_i = a(i)/a(0)`` and
    ``int lambda_0 = a(0) * c_trace``.
    """
    psi = np.asarray(psi, dtype=float)
    a_pos = _psi_autocov(psi)
    a_full = np.concatenate((a_pos[:0:-1], a_pos))
    c_full = (
        signal.fftconvolve(a_full, a_full[::-1])
        if a_full.size > 256
        else np.correlate(a_full, a_full, "full")
    )
    centre = a_full.size - 1

    def a(k):
        return a_pos[k] if k < a_pos.size else 0.0

    def c(d):
        d = abs(d)
        return c_full[centre + d] if d < a_full.size else 0.0

    V = np.empty((h + 1, h + 1))
    for i in range(h + 1):
        for j in range(h + 1):
            V[i, j] = k2 * a(i) * a(j) + k1 * (c(j - i) + c(i + j))
    lam0 = a(0) * c_trace
    D = np.zeros((h, h + 1))
    for i in range(1, h + 1):
        D[i - 1, 0] = -a(i) / a(0)
        D[i - 1, i] = 1.0
    D /= lam0
    out = D @ V @ D.T
    return (out + out.T) / 2


def acf_asymptotic_covariance(fit: WarFit, h: int) -> np.ndarray:
    """Asymptotic covariance of the first ``h`` Wasserstein autocorrelations."""
    if not fit.causal:
        raise NumericalError("non-causal", "asymptotics need a causal fit")
    st = fit.innovation_stats
    if st is None:
        raise NumericalError("no-innovation-stats", "fit carries no innovation estimates")
    psi = fit.psi if fit.psi is not None else psi_truncated(fit.beta)
    return acf_covariance(psi, int(h), st.k1, st.k2, st.trace)


def fit_war(series: DensitySeries, p: int, inference=True, allow_degenerate=False) -> WarFit:
    """Yule-Walker fit of a WAR(p) model in quantile coordinates.

    With ``inference=False`` only the point estimates are computed; psi,
    innovation statistics and the asymptotic covariance are left ``None``.
    With ``allow_degenerate=True`` a series without Wasserstein variance
    yields ``beta = 0`` (forecasts equal the mean) instead of an error.
    """
    n = len(series)
    p = int(p)
    if p < 1:
        raise DataError("bad-order", "order must be at least 1")
    if n <= p + 1:
        raise DataError("too-short", f"{n} observations cannot fit order {p}")
    mean = frechet_mean(series)
    traces = autocov_traces(series, mean, p)
    try:
        r = _trace_integrals(traces, series.grid, mean)
    except NumericalError as exc:
        if not (allow_degenerate and exc.code == "zero-variance"):
            raise
        return WarFit(p, np.zeros(p), mean, traces, np.zeros((p, p)), n, True,
                      np.full(p, np.inf), psi=np.ones(1) if inference else None)
    gamma = linalg.toeplitz(r[:p])
    if p == 1:
        beta = np.array([r[1] / r[0]])
    else:
        if np.linalg.cond(gamma) > 1e12:
            raise NumericalError("singular-autocovariance", "integrated autocovariance matrix is singular")
        beta = np.linalg.solve(gamma, r[1:])
    causal, moduli = check_causality(beta)
    fit = WarFit(p, beta, mean, traces, gamma, n, causal, moduli)
    if not inference:
        return fit
    try:
        psi = psi_truncated(beta) if causal else psi_weights(beta, 50)
    except NumericalError:
        psi = psi_weights(beta, 50)
        causal = False
    fit = replace(fit, psi=psi, causal=causal)
    try:
        stats = estimate_innovation_stats(series, fit)
    except WassarError:
        return fit
    fit = replace(fit, innovation_stats=stats)
    if causal:
        fit = replace(fit, asym_cov=beta_covariance(beta, stats.sigma2_eps, psi))
    return fit
