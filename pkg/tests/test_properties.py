"""Property-based checks of the estimates on random small kernels.

Kernels are drawn from a seeded numpy generator so every failing example
is reproducible from the seed hypothesis reports.
"""
import math

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from quasipot.capacity import wiener_capacity
from quasipot.kernels import green_modifier, modifiability_certificate, wmp_constant
from quasipot.potentials import embedding_constant, potential, potential_radial
from quasipot.solver import (
    Problem, Status, h_superinvariance, solve, solve_modified, subsolution_upper_check,
    supersolution_lower_check, uniqueness_probe, verify_bilateral,
)

from tests.conftest import power_distance_kernel, random_symmetric

seeds = st.integers(min_value=0, max_value=2**32 - 1)
sizes = st.integers(min_value=1, max_value=5)
exponents = st.sampled_from([0.2, 0.35, 0.5, 0.65, 0.8])
distance_powers = st.sampled_from([0.5, 1.0, 2.0, 2.5])

FAST = settings(max_examples=25, deadline=None)


def _weights(seed, n, low=0.0, high=2.0):
    rng = np.random.default_rng(seed + 1)
    w = rng.uniform(low, high, size=n)
    w[int(rng.integers(0, n))] += 0.5
    return w


@given(seed=seeds, n=sizes)
@FAST
def test_kappa_at_least_half(seed, n):
    k = random_symmetric(seed, n)
    kappa, (x, y, z) = k.kappa_witness
    assert kappa >= 0.5
    d = k.distance
    assert math.isclose(d[x, y] / (d[x, z] + d[z, y]), kappa, rel_tol=1e-12)


@given(seed=seeds, n=sizes)
@FAST
def test_radial_potential_equals_row_sum(seed, n):
    k = random_symmetric(seed, n)
    w = _weights(seed, n)
    direct = potential(k, w)
    for x in range(n):
        assert math.isclose(potential_radial(k, w, x), direct[x], rel_tol=1e-12)


@given(seed=seeds, n=sizes, q=exponents)
@FAST
def test_embedding_constant_scales(seed, n, q):
    # κ(E) scales like t^{1/q} in σ and linearly in G
    k = random_symmetric(seed, n)
    w = _weights(seed, n)
    base = embedding_constant(k, w, q).value
    assert math.isclose(embedding_constant(k, 2.0 * w, q).value, 2.0 ** (1.0 / q) * base, rel_tol=1e-6)
    assert math.isclose(embedding_constant(k.scaled(3.0), w, q).value, 3.0 * base, rel_tol=1e-6)


@given(seed=seeds, n=sizes, q=exponents, with_mu=st.booleans())
@FAST
def test_solution_within_bilateral_estimates(seed, n, q, with_mu):
    k = random_symmetric(seed, n)
    sigma = _weights(seed, n)
    mu = _weights(seed + 7, n) if with_mu else None
    result = solve(Problem(kernel=k, sigma=sigma, q=q, mu=mu))
    assert result.status == Status.CONVERGED
    assert result.bilateral.passed, result.bilateral.to_dict()


@given(seed=seeds, n=sizes, q=exponents)
@FAST
def test_f_mode_within_bilateral_estimates(seed, n, q):
    k = random_symmetric(seed, n)
    sigma = _weights(seed, n)
    problem = Problem(kernel=k, sigma=sigma, q=q, f=_weights(seed + 3, n))
    result = solve(problem)
    assert verify_bilateral(problem, result.u).passed


@given(seed=seeds, n=st.integers(min_value=1, max_value=4), q=exponents)
@settings(max_examples=15, deadline=None)
def test_uniqueness_probe_agrees(seed, n, q):
    k = random_symmetric(seed, n)
    report = uniqueness_probe(Problem(kernel=k, sigma=_weights(seed, n), q=q))
    assert report.passed, report.to_dict()


@given(seed=seeds, n=st.integers(min_value=1, max_value=4))
@settings(max_examples=15, deadline=None)
def test_wmp_and_capacity_sandwich(seed, n):
    k = random_symmetric(seed, n)
    wmp = wmp_constant(k, mode="exact")
    assert wmp.passed
    cap = wiener_capacity(k)
    assert cap.sandwich_ok
    # cap <= 𝔟 cap₀ with the empirical WMP constant
    assert cap.cap <= wmp.b_empirical * cap.cap0 * (1 + 1e-9)


@given(seed=seeds, n=sizes)
@FAST
def test_green_modification_stays_quasi_metric(seed, n):
    k = random_symmetric(seed, n)
    x0 = seed % n
    assert modifiability_certificate(k, x0).passed


# ── Wide-range kernels: G = 1/|x − y|^p ─────────────────────────

def _simplex_grid(n, m=60):
    if n == 1:
        return np.ones((1, 1))
    if n == 2:
        i = np.arange(m + 1)
        return np.column_stack([i, m - i]) / m
    i, j = np.meshgrid(np.arange(m + 1), np.arange(m + 1), indexing="ij")
    keep = i + j <= m
    i, j = i[keep], j[keep]
    return np.column_stack([i, j, m - i - j]) / m


def _phi_and_gap(g, w, q, nu):
    """Φ(ν) = Σ w (Gν)^q and the linear-optimality gap max_z ∇Φ·(e_z − ν), row-wise."""
    t = nu @ g.T
    phi = (t ** q) @ w
    grad = q * ((t ** (q - 1.0)) * w) @ g
    return phi, grad.max(axis=1) - np.sum(grad * nu, axis=1)


@given(seed=seeds, n=st.integers(min_value=1, max_value=3), q=exponents, p=distance_powers)
@FAST
def test_embedding_constant_inside_grid_bracket(seed, n, q, p):
    # on the grid, max Φ(g) <= Φ* <= min [Φ(g) + gap(g)] by concavity
    k = power_distance_kernel(seed, n, p)
    w = _weights(seed, n, low=0.1)
    cert = embedding_constant(k, w, q)
    phi, gap = _phi_and_gap(k.matrix, w, q, _simplex_grid(n))
    assert np.max(phi) <= (cert.phi + cert.gap) * (1 + 1e-12)
    assert cert.phi <= np.min(phi + gap) * (1 + 1e-12)


@given(seed=seeds, n=sizes, q=exponents, p=distance_powers)
@FAST
def test_certificate_gap_is_linear_optimality_gap(seed, n, q, p):
    k = power_distance_kernel(seed, n, p)
    w = _weights(seed, n, low=0.1)
    cert = embedding_constant(k, w, q)
    phi, gap = _phi_and_gap(k.matrix, w, q, cert.maximizer[None, :])
    assert math.isclose(phi[0], cert.phi, rel_tol=1e-12)
    assert math.isclose(gap[0], cert.gap, rel_tol=1e-9, abs_tol=1e-12 * cert.phi)
    assert cert.gap <= max(1e-9, 1e-8 * cert.phi)


@given(seed=seeds, n=sizes, q=exponents, p=distance_powers)
@FAST
def test_embedding_constant_monotone_in_sigma(seed, n, q, p):
    k = power_distance_kernel(seed, n, p)
    w = _weights(seed, n)
    heavier = w + _weights(seed + 5, n)
    assert embedding_constant(k, heavier, q).value >= embedding_constant(k, w, q).value * (1 - 1e-6)


@given(seed=seeds, n=sizes, q=exponents, p=distance_powers, with_mu=st.booleans())
@FAST
def test_bilateral_estimates_on_power_distances(seed, n, q, p, with_mu):
    k = power_distance_kernel(seed, n, p)
    mu = _weights(seed + 7, n) if with_mu else None
    result = solve(Problem(kernel=k, sigma=_weights(seed, n), q=q, mu=mu))
    assert result.status == Status.CONVERGED
    assert result.bilateral.passed, result.bilateral.to_dict()


@given(seed=seeds, n=sizes, q=exponents, p=distance_powers)
@FAST
def test_modified_solution_matches_direct(seed, n, q, p):
    k = power_distance_kernel(seed, n, p)
    sigma, mu = _weights(seed, n), _weights(seed + 7, n)
    modifier = green_modifier(k, seed % n)
    direct = solve(Problem(kernel=k, sigma=sigma, q=q, mu=mu), verify=False)
    modified = solve_modified(Problem(kernel=k, sigma=sigma, q=q, mu=mu, modifier=modifier), verify=False)
    assert direct.converged and modified.converged
    assert np.allclose(modified.u, direct.u, rtol=1e-8)


@given(seed=seeds, n=sizes, q=exponents, p=distance_powers, with_mu=st.booleans())
@FAST
def test_one_sided_estimates(seed, n, q, p, with_mu):
    k = power_distance_kernel(seed, n, p)
    mu = _weights(seed + 7, n) if with_mu else None
    problem = Problem(kernel=k, sigma=_weights(seed, n), q=q, mu=mu)
    # C′h is a supersolution and t·u (t <= 1) a subsolution
    inv = h_superinvariance(problem)
    sup = supersolution_lower_check(problem, inv.c_prime(q) * inv.h)
    assert sup.points.size == n
    assert sup.passed, sup.to_dict()
    u = solve(problem, verify=False).u
    for t in (0.1, 0.5, 1.0):
        sub = subsolution_upper_check(problem, t * u)
        assert sub.points.size == n
        assert sub.passed, sub.to_dict()
