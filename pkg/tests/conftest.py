import numpy as np
import pytest

from flexmpc.gdclf import LinearMode
from flexmpc.scenario import load_scenario

PROBLEM1_WEIGHTS = (0.0055, 0.0524, 0.0660, 0.0655, 0.0762, 0.0952, 0.1201, 0.1479, 0.1745, 0.1967)
SWITCHED_WEIGHTS = (0.0644, 0.0570, 0.0589, 0.0655, 0.0775, 0.0959, 0.1227, 0.1646, 0.2488, 0.5447)


def switched_family(h=0.1):
    A1 = np.array([[1.0, h], [-1.5 * h, 1.0]])
    Am = np.array([[1.0, -h], [1.5 * h, 1.0]])
    B = np.array([[0.0], [h]])
    return (
        LinearMode(A1, B, [[-5.4017, -7.0985]], 1),
        LinearMode(Am, B, [[5.4017, -7.0985]], -1),
    )


def problem1_mode():
    A = np.array([[2.13, 1.0, 1.0], [0.0, 1.0, 0.3], [0.0, 0.0, 0.5]])
    B = np.array([[0.0], [0.0], [1.0]])
    return LinearMode(A, B, [[-3.5507, -2.6749, -2.4633]], 1)


@pytest.fixture
def p1_mode():
    return problem1_mode()


@pytest.fixture
def sw_family():
    return switched_family()


@pytest.fixture
def problem1_file():
    return load_scenario("problem1.json")


@pytest.fixture
def problem2_file():
    return load_scenario("problem2.json")


def random_stable_mode(rng, n, p, rho_max=0.9, label=0):
    """Random (A, B, K) with rho(A + BK) <= rho_max, K = 0 and A rescaled."""
    A = rng.standard_normal((n, n))
    A *= rng.uniform(0.1, rho_max) / max(abs(np.linalg.eigvals(A)))
    B = rng.standard_normal((n, p))
    return LinearMode(A, B, np.zeros((p, n)), label)
