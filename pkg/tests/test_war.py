import dataclasses

import numpy as np
import pytest
from hypothesis import given, strategies as st

from wassar import (
    DataError,
    DensitySeries,
    NumericalError,
    QuantileFn,
    acf_asymptotic_covariance,
    asymptotic_covariance,
    check_causality,
    fit_war,
    frechet_mean,
    probability_grid,
    psi_truncated,
    psi_weights,
    replicate_estimates,
    simulate_war,
    wasserstein_acf,
)
from wassar.war import (
    WarFit,
    acf_covariance,
    autocov_traces,
    beta_covariance,
    estimate_innovation_stats,
)

from conftest import SEC4_BETA, ar1_config, sec4_config, uniform_q

G = probability_grid(100)


# --- autocovariance traces and ACF

def test_traces_of_constant_series_vanish():
    s = DensitySeries(G, np.tile(G.points, (6, 1)))
    for tr in autocov_traces(s, frechet_mean(s), 3):
        assert np.max(np.abs(tr.values)) <= 1e-30


def test_traces_by_hand():
    s = DensitySeries.from_quantiles([uniform_q(G), uniform_q(G, 0, 3)])
    mean = frechet_mean(s)
    np.testing.assert_allclose(mean.values, 2 * G.points, atol=1e-15)
    l0, l1 = autocov_traces(s, mean, 1)
    np.testing.assert_allclose(l0.values, G.points**2, atol=1e-15)
    np.testing.assert_allclose(l1.values, -G.points**2 / 2, atol=1e-15)


def test_traces_of_long_ar1():
    s = simulate_war(ar1_config(5000, seed=11))
    traces = autocov_traces(s, frechet_mean(s), 3)
    for h, tr in enumerate(traces):
        if h <= 1:
            np.testing.assert_allclose(tr.values, 0.5**h * 4 / 3, rtol=0.10)
        else:
            # small targets: about three Monte Carlo standard errors
            np.testing.assert_allclose(tr.values, 0.5**h * 4 / 3, atol=0.1)


def test_acf_white_noise():
    s = simulate_war(ar1_config(2000, beta=0.0, seed=12))
    assert abs(wasserstein_acf(s, 1)[0]) <= 0.05


def test_acf_ar1(ar1_series):
    rho = wasserstein_acf(ar1_series, 4)
    assert abs(rho[0] - 0.5) <= 0.05
    np.testing.assert_allclose(rho, 0.5 ** np.arange(1, 5), atol=0.06)


def test_acf_lag_zero(sec4_series):
    rho = wasserstein_acf(sec4_series, 2, include_zero=True)
    assert rho[0] == 1.0 and rho.size == 3


def test_zero_variance_errors():
    s = DensitySeries(G, np.tile(G.points, (10, 1)))
    with pytest.raises(NumericalError, match="zero-variance"):
        wasserstein_acf(s, 1)
    with pytest.raises(NumericalError, match="zero-variance"):
        fit_war(s, 1)


def test_degenerate_fit_allowed():
    s = DensitySeries(G, np.tile(G.points, (10, 1)))
    fit = fit_war(s, 2, allow_degenerate=True)
    assert np.all(fit.beta == 0) and fit.innovation_stats is None


# --- fitting

def test_p1_fit_is_lag1_acf_exactly(sec4_series, ar1_series):
    for s in (sec4_series, ar1_series):
        assert fit_war(s, 1).beta[0] == wasserstein_acf(s, 1)[0]


def test_ar1_estimate(ar1_series):
    assert abs(fit_war(ar1_series, 1).beta[0] - 0.5) <= 0.05


def test_fit_errors():
    s = simulate_war(ar1_config(5, seed=0))
    with pytest.raises(DataError, match="bad-order"):
        fit_war(s, 0)
    with pytest.raises(DataError, match="too-short"):
        fit_war(s, 4)


def test_gamma_psd(sec4_series):
    fit = fit_war(sec4_series, 6)
    assert np.allclose(fit.gamma_matrix, fit.gamma_matrix.T)
    assert np.linalg.eigvalsh(fit.gamma_matrix).min() >= -1e-9


def test_scale_equivariance(sec4_series):
    other = DensitySeries(G, 2.5 * sec4_series.values - 4.0)
    np.testing.assert_allclose(fit_war(other, 3).beta, fit_war(sec4_series, 3).beta, rtol=1e-10)
    np.testing.assert_allclose(wasserstein_acf(other, 5), wasserstein_acf(sec4_series, 5), rtol=1e-10)


def test_fit_json_round_trip(sec4_series):
    fit = fit_war(sec4_series, 3)
    back = WarFit.from_dict(fit.to_dict())
    np.testing.assert_array_equal(back.beta, fit.beta)
    np.testing.assert_array_equal(back.mean_quantile.values, fit.mean_quantile.values)
    np.testing.assert_array_equal(back.asym_cov, fit.asym_cov)
    np.testing.assert_array_equal(back.gamma_matrix, fit.gamma_matrix)
    assert back.innovation_stats.sigma2_eps == fit.innovation_stats.sigma2_eps


def test_table1_short_run():
    est = replicate_estimates(sec4_config(1000, seed=21), 3, 100)
    bias = est.mean(axis=0) - np.array(SEC4_BETA)
    sd = est.std(axis=0, ddof=1)
    assert np.all(np.abs(bias) <= 0.02)
    np.testing.assert_allclose(sd, [0.0317, 0.0406, 0.0319], rtol=0.35)


# --- psi weights and causality

def test_psi_examples():
    np.testing.assert_array_equal(psi_weights([0.0], 4), [1, 0, 0, 0, 0])
    np.testing.assert_allclose(psi_weights([0.5], 10), 0.5 ** np.arange(11), rtol=1e-15)
    np.testing.assert_allclose(psi_weights([0.5, 0.25], 3), [1, 0.5, 0.5, 0.375], rtol=1e-15)


def test_causality_examples():
    ok, mod = check_causality([0.5])
    assert ok and mod[0] == pytest.approx(2.0)
    assert not check_causality([1.1])[0]
    ok, mod = check_causality(SEC4_BETA)
    assert ok
    np.testing.assert_allclose(mod, [2, 5, 8], rtol=1e-9)


def test_psi_truncation_limits():
    psi = psi_truncated([0.5])
    assert 0.5 ** (psi.size) / 0.5 <= 1e-9
    with pytest.raises(NumericalError, match="non-causal"):
        psi_truncated([1.1])
    with pytest.raises(NumericalError, match="psi-truncation"):
        psi_truncated([1 - 1e-7])


@st.composite
def causal_betas(draw):
    p = draw(st.integers(1, 4))
    roots = [draw(st.floats(1.05, 5.0)) * draw(st.sampled_from([-1, 1])) for _ in range(p)]
    poly = np.poly1d([1.0])
    for r in roots:
        poly *= np.poly1d([-1 / r, 1.0])
    c = poly.coeffs[::-1]  # ascending: 1 - beta_1 z - ...
    return -c[1:] / c[0]


@given(causal_betas())
def test_psi_convolution_identity(beta):
    psi = psi_truncated(beta)
    conv = np.convolve(psi, np.concatenate(([1.0], -beta)))[: psi.size]
    expect = np.zeros(psi.size)
    expect[0] = 1
    assert np.max(np.abs(conv - expect)) <= 1e-12


# --- innovation constants and asymptotics

def test_constant_innovation_stats(ar1_series):
    st_ = fit_war(ar1_series, 1).innovation_stats
    assert st_.sigma2_eps == pytest.approx(1.0, rel=0.15)
    assert st_.k1 == pytest.approx(1.0, rel=0.15)
    # K2 is zero in population; "15%" is read on the scale of E eps^4 = 3
    assert abs(st_.k2) <= 0.15 * 3


def test_zero_residuals_error():
    X = 0.5 ** np.arange(30)[:, None] * G.points
    s = DensitySeries(G, X + G.points)
    fit = fit_war(s, 1)
    exact = dataclasses.replace(fit, beta=np.array([0.5]), mean_quantile=uniform_q(G))
    with pytest.raises(NumericalError, match="zero-variance"):
        estimate_innovation_stats(s, exact)


def test_sigma2_stable_across_reps():
    vals = [fit_war(simulate_war(sec4_config(2000, seed=31), r), 3).innovation_stats.sigma2_eps
            for r in range(20)]
    assert np.std(vals, ddof=1) / np.mean(vals) <= 0.10


def test_sigma_examples():
    assert beta_covariance([0.6], 2.0)[0, 0] == pytest.approx(2.0 * (1 - 0.36), rel=1e-12)
    assert beta_covariance([0.0], 1.0)[0, 0] == 1.0


def test_sigma_truncation_matches_long_sum():
    beta = [0.5, 0.25]
    psi = psi_weights(beta, 1_000_000)
    a = np.array([psi @ psi, psi[:-1] @ psi[1:]])
    direct = np.linalg.inv(np.array([[a[0], a[1]], [a[1], a[0]]]))
    np.testing.assert_allclose(beta_covariance(beta, 1.0), direct, atol=1e-8)


def test_p1_asymptotic_identity(ar1_series):
    fit = fit_war(ar1_series, 1)
    b, s2 = fit.beta[0], fit.innovation_stats.sigma2_eps
    assert asymptotic_covariance(fit)[0, 0] == pytest.approx(s2 * (1 - b * b), abs=1e-9)
    assert fit.asym_cov[0, 0] == pytest.approx(s2 * (1 - b * b), abs=1e-9)


def test_asymptotics_refuse_non_causal():
    fit = fit_war(simulate_war(ar1_config(50, seed=0)), 1)
    bad = dataclasses.replace(fit, beta=np.array([1.2]), causal=False)
    with pytest.raises(NumericalError, match="non-causal"):
        asymptotic_covariance(bad)
    with pytest.raises(NumericalError, match="non-causal"):
        acf_asymptotic_covariance(bad, 2)


def test_acf_covariance_white_noise():
    assert acf_covariance([1.0], 1, 1.0, 0.0, 1.0)[0, 0] == pytest.approx(1.0, abs=1e-15)
    # band variance is sigma2 = K1 / trace^2 whatever the scale
    V = acf_covariance([1.0], 3, 2.0, 0.7, 1.3)
    np.testing.assert_allclose(V, np.eye(3) * 2.0 / 1.3**2, atol=1e-15)


def test_acf_covariance_ar1_bartlett():
    # Gaussian constant innovations: Bartlett's formula for AR(1) lag 1 is 1 - beta^2
    psi = psi_truncated([0.5])
    assert acf_covariance(psi, 1, 1.0, 0.0, 1.0)[0, 0] == pytest.approx(0.75, rel=1e-9)


@pytest.mark.slow
def test_acf_variance_monte_carlo():
    n = 2000
    cfg = ar1_config(n, seed=41)
    rho = np.array([wasserstein_acf(simulate_war(cfg, r), 1)[0] for r in range(500)])
    theory = acf_covariance(psi_truncated([0.5]), 1, 1.0, 0.0, 1.0)[0, 0]
    assert np.var(np.sqrt(n) * (rho - 0.5), ddof=1) == pytest.approx(theory, rel=0.25)
