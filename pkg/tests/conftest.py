import numpy as np
import pytest

from kalmanar import LdsParams, steady_state
from kalmanar.lds import is_observable


def example1_params(v: float = 0.5, w: float = 0.5) -> LdsParams:
    """The diagonal 2-d benchmark system with isotropic process noise."""
    return LdsParams(
        G=np.diag([0.999, 0.5]),
        F=np.array([1.0, 1.0]),
        v=v,
        W=w * np.eye(2),
        m0=np.zeros(2),
        C0=np.eye(2),
    )


def golden_params() -> LdsParams:
    """Scalar system G=F=W=v=1 whose Riccati root is the golden ratio."""
    return LdsParams(G=1.0, F=1.0, v=1.0, W=1.0, m0=0.0, C0=1.0)


def random_observable_system(rng: np.random.Generator, n: int | None = None) -> LdsParams:
    """Random observable system with strictly positive process noise."""
    if n is None:
        n = int(rng.integers(1, 4))
    while True:
        G = rng.standard_normal((n, n))
        radius = np.max(np.abs(np.linalg.eigvals(G)))
        if radius > 0:
            G *= rng.uniform(0.3, 1.05) / radius
        F = rng.standard_normal(n)
        if is_observable(G, F)[0]:
            break
    B = rng.standard_normal((n, n))
    W = B @ B.T + 0.1 * np.eye(n)
    v = float(rng.uniform(0.2, 2.0))
    return LdsParams(G=G, F=F, v=v, W=W, m0=np.zeros(n), C0=np.eye(n))


@pytest.fixture(scope="session")
def ex1():
    return example1_params()


@pytest.fixture(scope="session")
def ex1_ss(ex1):
    return steady_state(ex1)


@pytest.fixture(scope="session")
def golden():
    return golden_params()


@pytest.fixture(scope="session")
def golden_ss(golden):
    return steady_state(golden)
