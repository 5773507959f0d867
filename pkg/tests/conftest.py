import numpy as np
import pytest

from src.cfrac import boundary_from_drift_balance
from src.model import ModelParams, is_stable
from src.spectral_oracle import boundary_vector, solve_truncated


def make_params(c, lam, mu, r) -> ModelParams:
    return ModelParams(c=c, lam=lam, mu=mu, r=r)


# Pole below the branch point: alpha* = 0.5 < alpha1 = 4 - 2*sqrt(3)
POLE = (1, 1.0, 3.0, 1.0)
# Pole exactly at the branch point: alpha* = alpha1 = 1
POLE_AT_BRANCH = (1, 1.0, 4.0, 1.0)
# No zero below the branch point
BRANCH = (3, 20.0, 30.0, 10.0)
# Two servers with a zero inside (0, alpha1)
TWO_SERVER_POLE = (2, 1.0, 1.0, 2.0)


@pytest.fixture
def pole_params():
    return make_params(*POLE)


@pytest.fixture
def branch_tie_params():
    return make_params(*POLE_AT_BRANCH)


@pytest.fixture
def branch_params():
    return make_params(*BRANCH)


@pytest.fixture
def two_server_params():
    return make_params(*TWO_SERVER_POLE)


@pytest.fixture
def pole_boundary(pole_params):
    return boundary_from_drift_balance(pole_params)


@pytest.fixture
def branch_tie_boundary(branch_tie_params):
    return boundary_from_drift_balance(branch_tie_params)


@pytest.fixture(scope="session")
def branch_solution():
    return solve_truncated(make_params(*BRANCH), 400)


@pytest.fixture(scope="session")
def pole_solution():
    return solve_truncated(make_params(*POLE), 400)


@pytest.fixture(scope="session")
def two_server_solution():
    return solve_truncated(make_params(*TWO_SERVER_POLE), 400)


@pytest.fixture
def branch_boundary(branch_solution):
    return boundary_vector(branch_solution)


@pytest.fixture
def two_server_boundary(two_server_solution):
    return boundary_vector(two_server_solution)


def random_stable_params(rng: np.random.Generator, c: int) -> ModelParams:
    """c*mu above (r+1)*lambda, which is sufficient for stability."""
    while True:
        lam = rng.uniform(0.2, 3.0)
        r = rng.uniform(0.2, 5.0)
        mu = lam * rng.uniform(1.05, 4.0) * (r + 1.0) / c
        params = ModelParams(c=c, lam=lam, mu=mu, r=r)
        if is_stable(params).stable:
            return params


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_stable_set_params(rng: np.random.Generator, max_servers: int = 6) -> ModelParams:
    """Any stable tuple: lambda < c*mu and r below its critical value, a third of them near it."""
    c = int(rng.integers(1, max_servers + 1))
    mu = rng.uniform(0.2, 3.0)
    lam = c * mu * rng.uniform(0.05, 0.98)
    # the right-hand side of the stability inequality does not involve r
    r_critical = is_stable(ModelParams(c=c, lam=lam, mu=mu, r=1.0)).rhs / lam - 1.0
    share = rng.uniform(0.95, 0.999) if rng.uniform() < 1.0 / 3.0 else rng.uniform(0.02, 0.95)
    return ModelParams(c=c, lam=lam, mu=mu, r=share * r_critical)
