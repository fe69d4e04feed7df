import numpy as np
import pytest

from shrinkreg import DesignMatrix, HeteroData


def make_instance(rng, p, k=3, het="uniform"):
    """Random heteroscedastic instance with a linear signal plus noise."""
    x = DesignMatrix(rng.uniform(-10.0, 10.0, size=(k, p)))
    if het == "uniform":
        a = rng.uniform(0.1, 1.0, size=p)
    else:
        a = rng.choice([0.1, 0.5], size=p)
    beta = rng.normal(0.0, 1.0, size=k)
    theta = x.entries.T @ beta + rng.normal(0.0, 0.5, size=p)
    y = rng.normal(theta, np.sqrt(a))
    return HeteroData(y=y, a=a, x=x), theta


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
