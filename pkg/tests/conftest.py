"""Shared small kernels with hand-computed values."""
import numpy as np
import pytest

from quasipot.kernels import kernel_from_matrix, riesz_kernel
from quasipot.solver import Problem

# G = [[2, 1], [1, 2]], σ = (1, 1), q = 1/2:
#   κ({0}) = 2, κ(Ω) = 6, 𝐊σ = 2 + 6 = 8, 𝐆σ = 3, u = 9 (μ = 0), kernel κ = 2/3
TWO_POINT = [[2.0, 1.0], [1.0, 2.0]]


@pytest.fixture
def two_point():
    return kernel_from_matrix(TWO_POINT)


@pytest.fixture
def two_point_problem(two_point):
    return Problem(kernel=two_point, sigma=[1.0, 1.0], q=0.5)


@pytest.fixture
def one_point_problem():
    # u = 2 u^{1/2} · 1/2  =>  u = 1
    return Problem(kernel=kernel_from_matrix([[2.0]]), sigma=[0.5], q=0.5)


def random_symmetric(seed, n, low=0.5, high=3.0):
    rng = np.random.default_rng(seed)
    a = rng.uniform(low, high, size=(n, n))
    g = (a + a.T) / 2.0
    g[np.diag_indices(n)] += high
    return kernel_from_matrix(g)


def power_distance_kernel(seed, n, p):
    """G = 1/|x − y|^p on a random planar chain of n points, p in (0, 3).

    Consecutive gaps lie in [0.2, 2], so entries span several orders of
    magnitude; the diagonal follows the half-nearest rule.
    """
    rng = np.random.default_rng(seed)
    coords = np.column_stack([np.cumsum(rng.uniform(0.2, 2.0, size=n)), rng.uniform(0.0, 1.0, size=n)])
    if n == 1:
        return riesz_kernel(coords, alpha=3.0 - p, n=3, diagonal_rule="explicit", diagonal=[2.0])
    return riesz_kernel(coords, alpha=3.0 - p, n=3)
