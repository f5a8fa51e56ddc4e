import numpy as np
import pytest

from srsfa import gridworld as gw
from srsfa import markov

CYCLE3 = np.roll(np.eye(3), 1, axis=1)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def field_world():
    return gw.Gridworld(15, 10)


@pytest.fixture(scope="session")
def field_chain(field_world):
    P = gw.build_transition(field_world)
    return P, markov.stationary_distribution(P)


@pytest.fixture(scope="session")
def field_run(field_chain):
    """The 15x10 open field walked for 10^6 steps with seed 7."""
    P, pi = field_chain
    return gw.rollout(P, 10**6, seed=7, pi=pi)


def power_iteration(P, tol=1e-13, max_iter=10**6):
    """Independent stationary distribution oracle."""
    pi = np.full(P.shape[0], 1.0 / P.shape[0])
    for _ in range(max_iter):
        nxt = pi @ P
        if np.max(np.abs(nxt - pi)) < tol:
            return nxt / nxt.sum()
        pi = nxt
    raise AssertionError("power iteration did not converge")
