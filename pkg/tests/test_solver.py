"""Monotone iteration, bilateral estimates, uniqueness and existence."""
import dataclasses
import math

import numpy as np
import pytest

from quasipot.errors import (
    InputError, MaxIterExceeded, NotQuasiMetricModified, NotSymmetric, SeedNotSubsolution, SolutionUnderflow,
)
from quasipot.kernels import Modifier, kernel_from_matrix
from quasipot.solver import (
    Problem, Status, apply_operator, bilateral_constants, existence_check, h_superinvariance,
    kappa_lower_check, solve, solve_modified, subsolution_seed, subsolution_upper_check,
    supersolution_lower_check, uniform_floor, uniqueness_probe, verify_bilateral,
)

PHI = (1.0 + math.sqrt(5.0)) / 2.0


# ── Constants ────────────────────────────────────────────────────

def test_two_point_constants():
    c = bilateral_constants(2.0 / 3.0, 0.5)
    assert math.isclose(c.b, 4.0 / 3.0)
    assert math.isclose(c.c, 3.0 / 16.0)
    assert math.isclose(c.c * 17.0, 3.1875)
    assert math.isclose(c.c_sum, c.c / 2.0)
    assert math.isclose(c.c_f, c.c / 4.0)
    assert math.isclose(c.C, 16.0 / 3.0)


def test_constants_floor_kappa():
    c = bilateral_constants(0.1, 0.5)
    assert c.kappa_eff == 0.5
    assert math.isclose(c.c, 0.25)
    assert math.isclose(c.C, 4.0)


def test_seed_scale():
    assert math.isclose(bilateral_constants(1.0, 0.5).c0, 1.0 / 16.0)


# ── Problem ──────────────────────────────────────────────────────

def test_problem_rejects_mu_and_f(two_point):
    with pytest.raises(InputError):
        Problem(kernel=two_point, sigma=[1.0, 1.0], q=0.5, mu=[1.0, 0.0], f=[1.0, 1.0])


def test_problem_modes(two_point):
    assert Problem(kernel=two_point, sigma=[1.0, 1.0], q=0.5).mode == "mu"
    assert Problem(kernel=two_point, sigma=[1.0, 1.0], q=0.5, f=[0.0, 1.0]).mode == "f"


def test_transformed_problem():
    p = Problem(kernel=[[2.0]], sigma=[1.0], q=0.5, mu=[2.0], modifier=Modifier([0.5]))
    inner = p.transformed()
    assert inner.kernel.matrix[0, 0] == 8.0
    assert math.isclose(inner.sigma[0], 0.5 ** 1.5)
    assert inner.mu[0] == 1.0


# ── Monotone iteration ───────────────────────────────────────────

def test_two_point_solution(two_point_problem):
    result = solve(two_point_problem)
    assert result.status == Status.CONVERGED
    assert np.allclose(result.u, [9.0, 9.0], rtol=1e-10)
    assert result.residual <= 1e-9
    assert result.bilateral.passed
    lower, upper = result.bilateral.lower_bound, result.bilateral.upper_bound
    assert np.allclose(lower, [3.1875 / 2.0] * 2, rtol=1e-9)
    assert np.allclose(upper, [16.0 / 3.0 * 17.0] * 2, rtol=1e-9)


def test_trace_records_every_step(two_point_problem):
    result = solve(two_point_problem, verify=False)
    assert result.bilateral is None
    assert len(result.trace) == result.iterations
    assert result.trace[-1] <= 1e-12 * 9.0 * (1 + 1e-9)


def test_iterates_increase_from_seed(two_point_problem):
    u = subsolution_seed(two_point_problem)
    for _ in range(5):
        nxt = apply_operator(two_point_problem, u)
        assert np.all(nxt >= u)
        u = nxt


def test_one_point_solutions(one_point_problem):
    assert math.isclose(solve(one_point_problem).u[0], 1.0, rel_tol=1e-10)
    with_mu = Problem(kernel=[[2.0]], sigma=[0.5], q=0.5, mu=[0.5])
    assert math.isclose(solve(with_mu).u[0], PHI ** 2, rel_tol=1e-10)


def test_f_mode_solution():
    p = Problem(kernel=[[2.0]], sigma=[0.5], q=0.5, f=[1.0])
    result = solve(p)
    assert math.isclose(result.u[0], PHI ** 2, rel_tol=1e-10)
    assert result.bilateral.passed
    assert result.mode == "f"


def test_nonexistence_when_inputs_too_big(two_point_problem):
    result = solve(two_point_problem, threshold=2.0)
    assert result.status == Status.NONEXISTENCE_DETECTED
    assert result.iterations == 0


def test_divergence_above_threshold(two_point_problem):
    # 𝐆σ = 3 and the seed are below 5, the solution 9 is not
    result = solve(two_point_problem, threshold=5.0)
    assert result.status == Status.DIVERGED
    assert not result.converged


def test_max_iter_carries_result(two_point_problem):
    with pytest.raises(MaxIterExceeded) as exc:
        solve(two_point_problem, max_iter=2)
    assert exc.value.result.status == Status.MAX_ITER
    assert exc.value.result.iterations == 2


def test_seed_must_be_subsolution(two_point_problem):
    bad = dataclasses.replace(bilateral_constants(2.0 / 3.0, 0.5), c0=100.0)
    with pytest.raises(SeedNotSubsolution) as exc:
        subsolution_seed(two_point_problem, bad)
    assert exc.value.excess > 0


def test_seed_is_subsolution(two_point_problem):
    u0 = subsolution_seed(two_point_problem)
    assert np.all(u0 <= apply_operator(two_point_problem, u0))


def test_solve_rejects_nonpositive_tol(two_point_problem):
    with pytest.raises(InputError):
        solve(two_point_problem, tol=0.0)


# ── Bilateral verification ───────────────────────────────────────

def test_scaled_solution_fails_upper(two_point_problem):
    report = verify_bilateral(two_point_problem, np.array([900.0, 900.0]))
    assert not report.upper_ok
    assert report.lower_ok
    assert report.worst_upper[1] > 1.0


def test_bilateral_ignores_points_without_sigma(two_point):
    p = Problem(kernel=two_point, sigma=[1.0, 0.0], q=0.5, mu=[0.0, 1.0])
    result = solve(p)
    assert result.bilateral.passed
    assert result.bilateral.points.tolist() == [0]


# ── Modified kernels ─────────────────────────────────────────────

def test_modified_one_point():
    p = Problem(kernel=[[2.0]], sigma=[1.0], q=0.5, modifier=Modifier([0.5]))
    result = solve_modified(p)
    assert math.isclose(result.v[0], 8.0, rel_tol=1e-10)
    assert math.isclose(result.u[0], 4.0, rel_tol=1e-10)
    assert result.bilateral.modified
    assert result.bilateral.passed
    # u also solves the original equation
    assert math.isclose(solve(Problem(kernel=[[2.0]], sigma=[1.0], q=0.5)).u[0], 4.0, rel_tol=1e-10)


def test_modified_with_pole(two_point):
    from quasipot.kernels import green_modifier
    k = kernel_from_matrix([[0.5, 0.25], [0.25, 0.5]])
    p = Problem(kernel=k, sigma=[1.0, 1.0], q=0.5, mu=[1.0, 0.0], modifier=green_modifier(k, 0))
    direct = solve(Problem(kernel=k, sigma=[1.0, 1.0], q=0.5, mu=[1.0, 0.0]))
    modified = solve_modified(p)
    assert np.allclose(modified.u, direct.u, rtol=1e-9)
    assert modified.bilateral.passed


def test_modified_rejects_bad_certificate(monkeypatch, two_point):
    from quasipot import solver
    from quasipot.kernels import ModifiabilityCertificate, green_modifier

    def failing(kernel, x0):
        return ModifiabilityCertificate(pole=x0, kappa=0.5, kappa_modified=10.0, modifier=green_modifier(kernel, x0))

    monkeypatch.setattr(solver, "modifiability_certificate", failing)
    p = Problem(kernel=two_point, sigma=[1.0, 1.0], q=0.5, modifier=green_modifier(two_point, 0))
    with pytest.raises(NotQuasiMetricModified):
        solve_modified(p)


def test_solve_modified_needs_modifier(two_point_problem):
    with pytest.raises(InputError):
        solve_modified(two_point_problem)


# ── Uniqueness ───────────────────────────────────────────────────

def test_h_superinvariance_two_point(two_point_problem):
    inv = h_superinvariance(two_point_problem)
    assert np.allclose(inv.h, [17.0, 17.0], rtol=1e-9)
    assert math.isclose(inv.c_h, 3.0 * math.sqrt(17.0) / 17.0, rel_tol=1e-9)
    assert math.isclose(inv.c_prime(0.5), (2.0 * inv.c_h) ** 2)


def test_uniqueness_probe_two_point(two_point_problem):
    report = uniqueness_probe(two_point_problem)
    assert report.status == Status.CONVERGED
    assert report.supersolution_start
    assert report.envelope_ok
    assert report.passed
    assert np.allclose(report.u_up, [9.0, 9.0], rtol=1e-10)
    assert np.allclose(report.w_down, [9.0, 9.0], rtol=1e-10)


def test_uniqueness_probe_with_mu(two_point):
    p = Problem(kernel=two_point, sigma=[1.0, 1.0], q=0.5, mu=[1.0, 0.0])
    report = uniqueness_probe(p)
    assert report.passed
    assert report.gaps[-1] <= 1e-12


# ── Existence ────────────────────────────────────────────────────

def test_existence_two_point(two_point):
    p = Problem(kernel=two_point, sigma=[1.0, 1.0], q=0.5, mu=[1.0, 0.0])
    report = existence_check(p, x0=0, a=1.0)
    assert report.exists
    assert report.tail_sigma == 2.0
    assert math.isclose(report.tail_kappa, 6.0, rel_tol=1e-9)
    assert report.modifier_integral == 1.0
    assert not report.modified


def test_existence_fails_beyond_threshold():
    k = kernel_from_matrix([[200.0, 100.0], [100.0, 200.0]])
    p = Problem(kernel=k, sigma=[1.0, 1.0], q=0.5)
    report = existence_check(p, threshold=10.0)
    assert not report.finite_g_sigma
    assert not report.exists


def test_existence_f_mode_has_no_integral():
    p = Problem(kernel=[[2.0]], sigma=[0.5], q=0.5, f=[1.0])
    report = existence_check(p)
    assert report.modifier_integral is None
    assert report.exists


# ── One-sided checks ─────────────────────────────────────────────

def test_kappa_lower_check(two_point_problem, one_point_problem):
    u = solve(one_point_problem).u
    check = kappa_lower_check(one_point_problem, u)
    assert check.passed
    assert math.isclose(check.worst[1], 0.25, rel_tol=1e-9)
    assert kappa_lower_check(two_point_problem, solve(two_point_problem).u).passed


def test_supersolution_and_subsolution_checks(two_point_problem):
    w = np.array([900.0, 900.0])
    sup = supersolution_lower_check(two_point_problem, w)
    assert sup.points.tolist() == [0, 1]
    assert sup.passed
    seed = subsolution_seed(two_point_problem)
    sub = subsolution_upper_check(two_point_problem, seed)
    assert sub.points.tolist() == [0, 1]
    assert sub.passed


# ── Exponents close to 1 ─────────────────────────────────────────

@pytest.mark.parametrize("q", [0.95, 0.98, 0.99])
def test_two_point_solution_near_one(two_point, q):
    # u = 3 u^q on both points  =>  u = 3^{1/(1−q)}
    result = solve(Problem(kernel=two_point, sigma=[1.0, 1.0], q=q))
    assert result.status == Status.CONVERGED
    assert np.allclose(result.u, 3.0 ** (1.0 / (1.0 - q)), rtol=1e-9)
    assert result.bilateral.passed, result.bilateral.to_dict()


@pytest.mark.parametrize("q", [0.95, 0.98])
def test_uniqueness_probe_near_one(two_point, q):
    report = uniqueness_probe(Problem(kernel=two_point, sigma=[1.0, 1.0], q=q, mu=[1.0, 0.0]))
    assert report.passed, report.to_dict()


def test_seed_uses_log_scale_when_c0_underflows(two_point):
    p = Problem(kernel=two_point, sigma=[1.0, 1.0], q=0.98)
    constants = bilateral_constants(2.0 / 3.0, 0.98)
    assert constants.c0 == 0.0
    assert constants.log_c0 < -700.0
    u0 = subsolution_seed(p, constants)
    assert np.all(u0 > 0)
    assert np.all(u0 <= apply_operator(p, u0) * (1 + 1e-12))
    assert math.isclose(uniform_floor(p), 3.0 ** 50, rel_tol=1e-12)


def test_constants_saturate_at_largest_exponent():
    c = bilateral_constants(1.0, 0.999)
    assert c.C == math.inf
    assert c.c == 0.0 and c.c0 == 0.0
    assert math.isfinite(c.log_c0)


def test_largest_exponent_reports_nonexistence(two_point):
    # 3^{1000} is beyond float range
    result = solve(Problem(kernel=two_point, sigma=[1.0, 1.0], q=0.999))
    assert result.status == Status.NONEXISTENCE_DETECTED


def test_vanishing_solution_raises():
    # (min 𝐆σ)^{1/(1−q)} = 0.3^{1000} underflows, so the iteration would stop at 0
    p = Problem(kernel=[[0.2, 0.1], [0.1, 0.2]], sigma=[1.0, 1.0], q=0.999)
    with pytest.raises(SolutionUnderflow) as exc:
        solve(p)
    assert exc.value.result.status == Status.CONVERGED


# ── Non-symmetric kernels ────────────────────────────────────────

NON_SYMMETRIC = [[2.0, 1.0], [3.0, 2.0]]


def test_non_symmetric_solve_skips_verification():
    p = Problem(kernel=NON_SYMMETRIC, sigma=[1.0, 1.0], q=0.5)
    result = solve(p)
    assert result.status == Status.CONVERGED
    assert result.bilateral is None
    assert result.constants is None
    assert "not symmetric" in result.skipped
    assert result.summary()["verification_skipped"] == result.skipped
    assert np.all(result.u > 0)
    assert np.allclose(apply_operator(p, result.u), result.u, rtol=1e-10)
    with pytest.raises(NotSymmetric):
        verify_bilateral(p, result.u)


def test_non_symmetric_uniqueness_probe():
    report = uniqueness_probe(Problem(kernel=NON_SYMMETRIC, sigma=[1.0, 1.0], q=0.5, mu=[0.5, 0.0]))
    assert report.supersolution_start
    assert report.passed, report.to_dict()
    assert math.isnan(report.a)
