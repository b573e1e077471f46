import dataclasses

import numpy as np
import pytest
from hypothesis import given, strategies as st

from wassar import (
    DataError,
    DensitySeries,
    QuantileFn,
    WassarError,
    fit_war,
    forecast_multi,
    forecast_one,
    frechet_mean,
    integrate,
    probability_grid,
    quantile_to_density,
    simulate_war,
    support_grid,
    wasserstein_distance,
)
from wassar.forecast import forecast_from_tangent
from wassar.grid import level_set_cdf, pushforward_cdf

from conftest import ar1_config, sec4_config, uniform_q

G = probability_grid(100)


def with_beta(fit, *beta):
    return dataclasses.replace(fit, beta=np.array(beta, dtype=float), order=len(beta))


@pytest.fixture(scope="module")
def ar1_fit(ar1_series):
    return fit_war(ar1_series, 1)


def check_density(fc):
    f = fc.density
    assert f.values.min() >= 0
    assert abs(integrate(f.values, f.grid) - 1) <= 1e-3
    assert np.all(np.diff(fc.cdf) >= 0)


def test_zero_beta_gives_mean(sec4_series):
    fit = with_beta(fit_war(sec4_series, 3), 0, 0, 0)
    fc = forecast_one(fit, sec4_series)
    np.testing.assert_allclose(fc.quantile.values, fit.mean_quantile.values, atol=1e-14)
    mean_density = quantile_to_density(fit.mean_quantile, fc.u_grid)
    np.testing.assert_allclose(fc.density.values, mean_density.values, atol=1e-12)


def test_last_equals_mean_gives_mean(ar1_series, ar1_fit):
    s = DensitySeries(G, np.vstack([ar1_series.values, ar1_fit.mean_quantile.values]))
    fc = forecast_one(ar1_fit, s)
    np.testing.assert_allclose(fc.quantile.values, ar1_fit.mean_quantile.values, atol=1e-14)


def test_plug_in_example(ar1_fit):
    fit = dataclasses.replace(with_beta(ar1_fit, 0.5), mean_quantile=uniform_q(G))
    s = DensitySeries(G, (G.points + 1)[None, :])
    fc = forecast_one(fit, s)
    np.testing.assert_allclose(fc.quantile.values, G.points + 0.5, atol=1e-14)
    inside = (fc.u_grid.points > 0.52) & (fc.u_grid.points < 1.48)
    np.testing.assert_allclose(fc.density.values[inside], 1.0, atol=1e-9)


def test_p1_quantile_formula(ar1_series, ar1_fit):
    b = ar1_fit.beta[0]
    fc = forecast_one(ar1_fit, ar1_series)
    expect = b * ar1_series.values[-1] + (1 - b) * ar1_fit.mean_quantile.values
    np.testing.assert_allclose(fc.quantile.values, expect, atol=1e-12)


def test_too_short(sec4_series):
    fit = fit_war(sec4_series, 3)
    with pytest.raises(DataError, match="too-short"):
        forecast_one(fit, sec4_series.window(0, 2))


def test_multi_first_step_matches_one(sec4_series):
    fit = fit_war(sec4_series, 3)
    one = forecast_one(fit, sec4_series)
    multi = forecast_multi(fit, sec4_series, 1)[0]
    np.testing.assert_array_equal(one.quantile.values, multi.quantile.values)
    np.testing.assert_array_equal(one.density.values, multi.density.values)
    np.testing.assert_array_equal(one.u_grid.points, multi.u_grid.points)


def test_multi_shift_decay(ar1_fit):
    fit = dataclasses.replace(with_beta(ar1_fit, 0.5), mean_quantile=uniform_q(G))
    shift = 0.8
    s = DensitySeries(G, (G.points + shift)[None, :])
    for l, fc in enumerate(forecast_multi(fit, s, 6), start=1):
        got = np.mean(fc.quantile.values - G.points)
        assert got == pytest.approx(0.5**l * shift, abs=1e-3)
        check_density(fc)


def test_multi_converges_to_mean(sec4_series):
    fit = fit_war(sec4_series, 3)
    fcs = forecast_multi(fit, sec4_series, 50)
    assert wasserstein_distance(fcs[-1].quantile, fit.mean_quantile) <= 1e-3
    assert len({id(f.u_grid) for f in fcs}) == 1


def test_forecast_degenerate(ar1_fit):
    fit = dataclasses.replace(with_beta(ar1_fit, 2.0), mean_quantile=uniform_q(G))
    s = DensitySeries(G, (G.points / 2)[None, :])
    with pytest.raises(WassarError, match="step 1"):
        forecast_multi(fit, s, 3)


def test_u_grid_extended_when_too_small(ar1_series, ar1_fit):
    fc = forecast_one(ar1_fit, ar1_series, support_grid(0.4, 0.6, 64))
    assert len(fc.u_grid) == 64
    lo, hi = fc.quantile.support()
    assert fc.u_grid.points[0] <= lo and fc.u_grid.points[-1] >= hi


def test_fast_path_matches_level_set():
    rng = np.random.default_rng(0)
    for _ in range(20):
        y = np.sort(rng.normal(size=len(G) + 2)) + np.linspace(0, 1e-3, len(G) + 2)
        s = G.extended()
        u = np.linspace(y[0] - 0.5, y[-1] + 0.5, 700)
        assert np.max(np.abs(pushforward_cdf(y, s, u) - level_set_cdf(y, s, u))) <= 1e-6


@given(st.integers(0, 2**32 - 1))
def test_random_fits_give_valid_densities(seed):
    rng = np.random.default_rng(seed)
    p = int(rng.integers(1, 4))
    s = simulate_war(sec4_config(60, seed=seed % 1000), int(rng.integers(0, 5)))
    fit = fit_war(s, p, inference=False)
    for fc in forecast_multi(fit, s, 3):
        check_density(fc)


@given(st.integers(0, 2**32 - 1))
def test_distance_bound_nonnegative_beta(seed):
    rng = np.random.default_rng(seed)
    s = simulate_war(sec4_config(40, seed=seed % 997))
    fit = fit_war(s, 2, inference=False)
    beta = rng.uniform(0, 0.5, 2)
    fit = with_beta(fit, *beta)
    fc = forecast_one(fit, s)
    m = fit.mean_quantile
    bound = beta.sum() * max(wasserstein_distance(s[-1], m), wasserstein_distance(s[-2], m))
    assert wasserstein_distance(fc.quantile, m) <= bound + 1e-12


def test_non_monotone_transport_flagged():
    mean = uniform_q(G)
    fc = forecast_from_tangent(mean, -2 * G.points)
    assert not fc.monotone_transport
    np.testing.assert_allclose(fc.quantile.values, G.points - 1, atol=1e-12)
    check_density(fc)
