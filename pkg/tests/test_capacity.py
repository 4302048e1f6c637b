"""cap₀ and Wiener capacity."""
import math

import numpy as np
import pytest
from scipy.optimize import linprog

from quasipot.capacity import capacity0, wiener_capacity
from quasipot.errors import InputError, NotSymmetric, SubsetLimitExceeded

from tests.conftest import random_symmetric


def test_one_point_capacity():
    assert math.isclose(capacity0([[2.0]]).value, 0.5)
    result = wiener_capacity([[2.0]])
    assert math.isclose(result.cap, 0.5)


def test_two_point_capacity(two_point):
    base = capacity0(two_point)
    assert math.isclose(base.value, 2.0 / 3.0)
    assert np.allclose(base.equilibrium, [1.0 / 3.0, 1.0 / 3.0])
    result = wiener_capacity(two_point)
    assert math.isclose(result.cap, 2.0 / 3.0)
    assert result.subsets == 3
    assert result.sandwich_ok


def test_capacity_of_subset(two_point):
    result = wiener_capacity(two_point, [1])
    assert math.isclose(result.cap0, 0.5)
    assert result.equilibrium.tolist() == [0.0, 0.5]


def test_bracket_mode(two_point):
    result = wiener_capacity(two_point, mode="bracket")
    assert result.cap is None
    assert np.allclose(result.bracket, [2.0 / 3.0, 8.0 / 9.0])


def test_bracket_needs_symmetry():
    with pytest.raises(NotSymmetric):
        wiener_capacity([[1.0, 4.0], [2.0, 1.0]], mode="bracket")


def test_subset_limit():
    with pytest.raises(SubsetLimitExceeded):
        wiener_capacity(random_symmetric(0, 4), subset_limit=3)


def test_bad_inputs(two_point):
    with pytest.raises(InputError):
        wiener_capacity(two_point, [])
    with pytest.raises(InputError):
        wiener_capacity(two_point, mode="guess")


@pytest.mark.parametrize("seed", range(4))
def test_capacity0_matches_linprog(seed):
    k = random_symmetric(seed, 5)
    K = [0, 2, 3]
    ours = capacity0(k, K)
    ref = linprog(-np.ones(3), A_ub=k.matrix[K, :].T, b_ub=np.ones(5), bounds=[(0, None)] * 3, method="highs")
    assert math.isclose(ours.value, -ref.fun, rel_tol=1e-9)
    assert np.all(k.matrix @ ours.equilibrium <= 1.0 + 1e-9)


@pytest.mark.parametrize("seed", range(4))
def test_sandwich_and_workers(seed):
    k = random_symmetric(seed, 5)
    serial = wiener_capacity(k, workers=1)
    parallel = wiener_capacity(k, workers=3)
    assert serial.sandwich_ok
    assert math.isclose(serial.cap, parallel.cap, rel_tol=1e-12)
    assert serial.cap0 <= serial.cap * (1 + 1e-9)
    assert serial.cap <= 2.0 * k.kappa_eff * serial.cap0 * (1 + 1e-9)
