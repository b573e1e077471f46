import sys

import numpy as np
import pytest
from hypothesis import settings

from wassar import (
    DensitySeries,
    InnovationModel,
    QuantileFn,
    SimConfig,
    probability_grid,
    simulate_war,
)

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")

SEC4_BETA = (0.825, -0.1875, 0.0125)


@pytest.fixture(scope="session")
def s_grid():
    return probability_grid(100)


def uniform_q(grid, a=0.0, b=1.0):
    """Quantile function of U[a, b]."""
    return QuantileFn(grid, a + (b - a) * grid.points)


def normal_q(grid, mu=0.0, sd=1.0):
    from scipy.stats import norm

    return QuantileFn(grid, mu + sd * norm.ppf(grid.points))


def sec4_config(n, seed=0):
    return SimConfig(SEC4_BETA, InnovationModel("sinusoidal", 1.0, 0.2), n, seed=seed)


def ar1_config(n, beta=0.5, seed=0):
    return SimConfig((beta,), InnovationModel("constant", 1.0), n, seed=seed)


@pytest.fixture(scope="session")
def ar1_series():
    return simulate_war(ar1_config(2000, seed=1))


@pytest.fixture(scope="session")
def sec4_series():
    return simulate_war(sec4_config(1000, seed=2))


def rank1_series(n, beta=0.5, seed=0, grid=None):
    """``Q_t(s) = (1 + a_t) s`` with a scalar AR(1) ``a_t`` of standard deviation about 0.1."""
    grid = grid or probability_grid(100)
    rng = np.random.default_rng(seed)
    a = np.zeros(n + 200)
    e = rng.standard_normal(n + 200) * 0.1 * np.sqrt(1 - beta**2)
    for t in range(1, a.size):
        a[t] = beta * a[t - 1] + e[t]
    a = a[200:]
    return DensitySeries(grid, (1 + a)[:, None] * grid.points)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.RESULTS:
        terminalreporter.write_line(line)
