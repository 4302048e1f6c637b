"""
Quasipot — Sublinear equation solver.

    u = 𝐆(u^q σ) + 𝐆μ      (μ-mode)
    u = 𝐆(u^q σ) + f       (f-mode)

Monotone iteration from an explicit subsolution, bilateral estimates with
explicit constants (b = 2κ, κ floored at 1/2):

    c  = (1−q)^{1/(1−q)} b^{−q/(1−q)}      one summand at a time
    C  = (8κ)^{q/(1−q)}
    c0 = [(1−q) b^{−q/(1−q)}]^{1/(1−q)}     subsolution seed scale

μ-mode:  (c/2)[(𝐆σ)^{1/(1−q)} + 𝐊σ] + 𝐆μ <= u <= C[(𝐆σ)^{1/(1−q)} + 𝐊σ + 𝐆μ]
f-mode:  (c/4)[… + 𝐆(f^q σ)] + f <= u <= C[… + 𝐆(f^q σ)] + f

Modified mode solves for v = u/m with G̃ = G/(m⊗m), σ̃ = m^{1+q}σ,
μ̃ = mμ (or f̃ = f/m) and maps back.
"""

from __future__ import annotations

import enum
import logging
import math
import sys
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from quasipot.config import DEFAULTS
from quasipot.errors import (
    GapStagnation, InputError, LengthMismatch, MaxIterExceeded, NonFiniteEntry,
    NotQuasiMetricModified, SeedNotSubsolution, SolutionUnderflow, ZeroSigma,
)
from quasipot.kernels import Kernel, Modifier, as_kernel, green_modifier, modifiability_certificate, modify
from quasipot.potentials import (
    KappaCache, PotentialProfile, check_exponent, embedding_constant, kappa_tail_integral,
    modified_sigma, potential, potential_profile, power, scalar_power, tail_integral,
)
from quasipot.space import Measure, as_weights

log = logging.getLogger(__name__)

REL_SLACK = 1e-9
LOG_FLOAT_MAX = math.log(sys.float_info.max)
SKIPPED_NOT_SYMMETRIC = "kernel is not symmetric; the bilateral constants need a quasi-metric kernel"


class Status(str, enum.Enum):
    CONVERGED = "converged"
    DIVERGED = "diverged"
    NONEXISTENCE_DETECTED = "nonexistence_detected"
    MAX_ITER = "max_iter_exceeded"


# ---------------------------------------------------------------------------
# Problem
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Problem:
    kernel: Kernel
    sigma: np.ndarray
    q: float
    mu: Optional[np.ndarray] = None
    f: Optional[np.ndarray] = None
    modifier: Optional[Modifier] = None

    def __post_init__(self) -> None:
        k = as_kernel(self.kernel)
        object.__setattr__(self, "kernel", k)
        object.__setattr__(self, "q", check_exponent(self.q))
        sigma = Measure(as_weights(self.sigma, k.n))
        if sigma.total <= 0:
            raise ZeroSigma("sigma must have positive total mass")
        object.__setattr__(self, "sigma", sigma.weights)
        if self.mu is not None and self.f is not None:
            raise InputError("a problem takes either mu or f, not both")
        if self.mu is not None:
            object.__setattr__(self, "mu", as_weights(self.mu, k.n))
        if self.f is not None:
            f = np.array(self.f, dtype=float).ravel()
            if f.shape[0] != k.n:
                raise LengthMismatch(f"f has {f.shape[0]} values, kernel has {k.n} points")
            if not np.all(np.isfinite(f)):
                raise NonFiniteEntry("f must be finite")
            if np.any(f < 0):
                raise InputError("f must be nonnegative")
            f.setflags(write=False)
            object.__setattr__(self, "f", f)
        if self.modifier is not None and self.modifier.values.shape[0] != k.n:
            raise LengthMismatch("modifier length does not match the kernel")

    @property
    def n(self) -> int:
        return self.kernel.n

    @property
    def mode(self) -> str:
        return "f" if self.f is not None else "mu"

    @property
    def mu_weights(self) -> np.ndarray:
        return np.zeros(self.n) if self.mu is None else self.mu

    @property
    def forcing(self) -> np.ndarray:
        """f in f-mode, 𝐆μ in μ-mode."""
        if self.f is not None:
            return np.array(self.f)
        return potential(self.kernel, self.mu_weights)

    @property
    def sigma_points(self) -> np.ndarray:
        return np.flatnonzero(self.sigma > 0)

    def transformed(self) -> "Problem":
        """The equation for v = u/m on the modified kernel."""
        if self.modifier is None:
            raise InputError("problem has no modifier")
        m = self.modifier.values
        return Problem(
            kernel=modify(self.kernel, self.modifier),
            sigma=modified_sigma(self.sigma, self.modifier, self.q),
            q=self.q,
            mu=None if self.mu is None else m * self.mu,
            f=None if self.f is None else self.f / m,
        )


def apply_operator(problem: Problem, u: np.ndarray, forcing: Optional[np.ndarray] = None) -> np.ndarray:
    """T(u) = 𝐆(u^q σ) + forcing."""
    if forcing is None:
        forcing = problem.forcing
    with np.errstate(over="ignore", invalid="ignore"):
        return problem.kernel.matrix @ (power(np.clip(u, 0.0, None), problem.q, problem.q) * problem.sigma) + forcing


def profile_for(problem: Problem, cache: Optional[KappaCache] = None, workers: Optional[int] = None) -> PotentialProfile:
    return potential_profile(
        problem.kernel, problem.sigma, problem.q,
        mu=None if problem.f is not None else problem.mu,
        f=problem.f, cache=cache, workers=workers,
    )


# ---------------------------------------------------------------------------
# Constants
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BilateralConstants:
    q: float
    kappa: float
    kappa_eff: float
    b: float
    c: float
    c_sum: float
    c_f: float
    C: float
    c0: float
    log_c0: float = float("nan")

    @property
    def seed_log_scale(self) -> float:
        """log c0, taken from log_c0 once c0 has underflowed."""
        return math.log(self.c0) if self.c0 > 0 else self.log_c0

    def to_dict(self) -> Dict[str, float]:
        return {
            "q": self.q, "kappa": self.kappa, "kappa_eff": self.kappa_eff, "b": self.b,
            "c": self.c, "c_sum": self.c_sum, "c_f": self.c_f, "C": self.C, "c0": self.c0,
            "log_c0": self.log_c0,
        }


def _exp(x: float) -> float:
    """math.exp saturating to inf."""
    return math.exp(x) if x < LOG_FLOAT_MAX else math.inf


def bilateral_constants(kappa: float, q: float) -> BilateralConstants:
    """c, C and c0 evaluated in log space; C saturates to inf and c, c0 to 0 as q -> 1."""
    q = check_exponent(q)
    kappa_eff = max(float(kappa), 0.5)
    b = 2.0 * kappa_eff
    s = q / (1.0 - q)
    log_1q = math.log1p(-q)
    log_c = log_1q / (1.0 - q) - s * math.log(b)
    log_c0 = (log_1q - s * math.log(b)) / (1.0 - q)
    c = _exp(log_c)
    big_c = _exp(s * math.log(8.0 * kappa_eff))
    return BilateralConstants(q, float(kappa), kappa_eff, b, c, c / 2.0, c / 4.0, big_c, _exp(log_c0), log_c0)


def _constants_for(problem: Problem) -> BilateralConstants:
    return bilateral_constants(problem.kernel.kappa, problem.q)


def _optional_constants(problem: Problem) -> Optional[BilateralConstants]:
    """None on non-symmetric kernels, where κ is undefined."""
    return _constants_for(problem) if problem.kernel.symmetric else None


# ---------------------------------------------------------------------------
# Monotone iteration
# ---------------------------------------------------------------------------

@dataclass
class SolveResult:
    u: np.ndarray
    status: Status
    iterations: int
    residual: float
    mode: str
    trace: List[float] = field(default_factory=list, repr=False)
    constants: Optional[BilateralConstants] = None
    bilateral: Optional["BilateralReport"] = None
    v: Optional[np.ndarray] = None
    skipped: Optional[str] = None

    @property
    def converged(self) -> bool:
        return self.status == Status.CONVERGED

    @property
    def lower_ratio(self) -> Optional[np.ndarray]:
        return None if self.bilateral is None else self.bilateral.lower_ratio

    @property
    def upper_ratio(self) -> Optional[np.ndarray]:
        return None if self.bilateral is None else self.bilateral.upper_ratio

    def summary(self) -> Dict[str, Any]:
        out: Dict[str, Any] = {
            "status": self.status.value,
            "iterations": self.iterations,
            "residual": self.residual,
            "mode": self.mode,
            "u": self.u,
        }
        if self.constants is not None:
            out["constants"] = self.constants.to_dict()
        if self.bilateral is not None:
            out["bilateral"] = self.bilateral.to_dict()
        if self.skipped is not None:
            out["verification_skipped"] = self.skipped
        return out


def _too_big(values: np.ndarray, threshold: float) -> bool:
    return bool(not np.all(np.isfinite(values)) or np.any(values > threshold))


def uniform_floor(problem: Problem, g_sigma: Optional[np.ndarray] = None) -> float:
    """ε = (min 𝐆σ)^{1/(1−q)}; ε·1 is a subsolution on any positive kernel
    because T(ε·1) >= ε^q min 𝐆σ = ε."""
    if g_sigma is None:
        g_sigma = potential(problem.kernel, problem.sigma)
    return scalar_power(float(np.min(g_sigma)), 1.0 / (1.0 - problem.q), problem.q)


def subsolution_seed(problem: Problem, constants: Optional[BilateralConstants] = None) -> np.ndarray:
    """u0 = c0[(𝐆σ)^{1/(1−q)} + 𝐆μ] (μ-mode) or c0(𝐆σ)^{1/(1−q)} + f (f-mode), checked u0 <= T(u0).

    The scaled term is built as exp(log c0 + log(𝐆σ)/(1−q)). Where it still
    vanishes at a σ-mass point, and on non-symmetric kernels, the seed is
    raised to ε·1 (see uniform_floor); the max of two subsolutions is one.
    """
    if constants is None:
        constants = _optional_constants(problem)
    q = problem.q
    g_sigma = potential(problem.kernel, problem.sigma)
    forcing = problem.forcing
    if constants is None:
        u0 = np.array(forcing, dtype=float)
    else:
        with np.errstate(over="ignore"):
            scaled = np.exp(constants.seed_log_scale + np.log(g_sigma) / (1.0 - q))
        u0 = scaled + (forcing if problem.f is not None else constants.c0 * forcing)
    if constants is None or np.any(u0[problem.sigma_points] <= 0):
        eps = uniform_floor(problem, g_sigma)
        log.debug("subsolution seed raised to the uniform floor %.6g", eps)
        u0 = np.maximum(u0, eps)
    if _too_big(u0, DEFAULTS["divergence_threshold"]):
        return u0
    t_u0 = apply_operator(problem, u0, forcing)
    excess = u0 - t_u0
    slack = 1e-12 * np.maximum(1.0, np.abs(t_u0))
    if np.any(excess > slack):
        worst = int(np.argmax(excess - slack))
        raise SeedNotSubsolution(
            f"seed exceeds T(seed) at point {worst} by {excess[worst]:.3g}",
            worst_point=worst, excess=float(excess[worst]),
        )
    return u0


def solve(
    problem: Problem,
    tol: Optional[float] = None,
    max_iter: Optional[int] = None,
    start: Optional[np.ndarray] = None,
    threshold: Optional[float] = None,
    verify: bool = True,
    cache: Optional[KappaCache] = None,
) -> SolveResult:
    """Monotone iteration u_{j+1} = 𝐆(u_j^q σ) + forcing.

    On a non-symmetric kernel the iteration starts from ε·1 and the bilateral
    verification is skipped with the reason in `SolveResult.skipped`.
    """
    tol = DEFAULTS["tol"] if tol is None else float(tol)
    max_iter = DEFAULTS["max_iter"] if max_iter is None else int(max_iter)
    threshold = DEFAULTS["divergence_threshold"] if threshold is None else float(threshold)
    if not tol > 0:
        raise InputError(f"tol must be positive, got {tol}")

    forcing = problem.forcing
    g_sigma = potential(problem.kernel, problem.sigma)
    if _too_big(g_sigma, threshold) or _too_big(forcing, threshold):
        log.info("solve: inputs beyond divergence threshold %.3g", threshold)
        return SolveResult(np.full(problem.n, np.nan), Status.NONEXISTENCE_DETECTED, 0, float("nan"), problem.mode)

    constants = _optional_constants(problem) if start is None or verify else None
    u = subsolution_seed(problem, constants) if start is None else np.array(start, dtype=float)
    if _too_big(u, threshold):
        return SolveResult(u, Status.NONEXISTENCE_DETECTED, 0, float("nan"), problem.mode, constants=constants)

    trace: List[float] = []
    status = Status.MAX_ITER
    it = 0
    while it < max_iter:
        nxt = apply_operator(problem, u, forcing)
        it += 1
        if _too_big(nxt, threshold):
            status = Status.DIVERGED
            log.info("solve: iterate %d beyond divergence threshold", it)
            break
        change = float(np.max(np.abs(nxt - u)))
        trace.append(change)
        u = nxt
        norm = float(np.max(np.abs(u)))
        if change <= tol * norm and change <= tol * (1.0 + norm):
            status = Status.CONVERGED
            break
        if it % 1000 == 0:
            log.debug("solve: iter=%d change=%.3g norm=%.6g", it, change, norm)

    residual = float(np.max(np.abs(apply_operator(problem, u, forcing) - u)))
    result = SolveResult(u, status, it, residual, problem.mode, trace, constants)
    if status == Status.MAX_ITER:
        last = trace[-1] if trace else float("nan")
        raise MaxIterExceeded(f"no convergence after {it} iterations (last change {last:.3g})", result=result)
    if status == Status.CONVERGED:
        vanished = problem.sigma_points[u[problem.sigma_points] <= 0]
        if vanished.size:
            raise SolutionUnderflow(
                f"converged iterate is {u[vanished[0]]:.3g} at sigma-mass point {int(vanished[0])}",
                result=result,
            )
        if verify and problem.kernel.symmetric:
            result.bilateral = verify_bilateral(problem, u, constants=constants, cache=cache)
        elif verify:
            result.skipped = SKIPPED_NOT_SYMMETRIC
            log.info("solve: bilateral verification skipped (%s)", result.skipped)
    log.info("solve: status=%s iterations=%d residual=%.3g", status.value, it, residual)
    return result


# ---------------------------------------------------------------------------
# Bilateral estimates
# ---------------------------------------------------------------------------

@dataclass
class BilateralReport:
    mode: str
    lower_bound: np.ndarray
    upper_bound: np.ndarray
    lower_ratio: np.ndarray
    upper_ratio: np.ndarray
    points: np.ndarray
    constants: BilateralConstants
    modified: bool = False

    @property
    def worst_lower(self) -> Tuple[int, float]:
        i = int(self.points[np.argmax(self.lower_ratio[self.points])])
        return i, float(self.lower_ratio[i])

    @property
    def worst_upper(self) -> Tuple[int, float]:
        i = int(self.points[np.argmax(self.upper_ratio[self.points])])
        return i, float(self.upper_ratio[i])

    @property
    def lower_ok(self) -> bool:
        return self.worst_lower[1] <= 1.0 + REL_SLACK

    @property
    def upper_ok(self) -> bool:
        return self.worst_upper[1] <= 1.0 + REL_SLACK

    @property
    def passed(self) -> bool:
        return self.lower_ok and self.upper_ok

    def to_dict(self) -> Dict[str, Any]:
        return {
            "mode": self.mode,
            "modified": self.modified,
            "worst_lower": list(self.worst_lower),
            "worst_upper": list(self.worst_upper),
            "lower_ok": self.lower_ok,
            "upper_ok": self.upper_ok,
            "passed": self.passed,
            "constants": self.constants.to_dict(),
        }


def _bounds(profile: PotentialProfile, constants: BilateralConstants, f_mode: bool) -> Tuple[np.ndarray, np.ndarray]:
    # C may be inf close to q = 1; 0·inf at σ-free points is irrelevant
    with np.errstate(over="ignore", invalid="ignore"):
        if f_mode:
            core = profile.bracket
            return constants.c_f * core + profile.f, constants.C * core + profile.f
        core = profile.a_term + profile.k_sigma
        return constants.c_sum * core + profile.g_mu, constants.C * (core + profile.g_mu)


def _ratios(lower: np.ndarray, upper: np.ndarray, u: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    with np.errstate(divide="ignore", invalid="ignore"):
        lower_ratio = np.where(u > 0, lower / u, np.where(lower > 0, np.inf, 0.0))
        upper_ratio = np.where(upper > 0, u / upper, np.where(u > 0, np.inf, 0.0))
    return lower_ratio, upper_ratio


def verify_bilateral(
    problem: Problem,
    u: Any,
    profile: Optional[PotentialProfile] = None,
    constants: Optional[BilateralConstants] = None,
    cache: Optional[KappaCache] = None,
    workers: Optional[int] = None,
) -> BilateralReport:
    """Check the two-sided estimates at every σ-mass point.

    lower_ratio = lower/u and upper_ratio = u/upper; PASS when both are <= 1.
    With a modifier the bounds of the transformed problem are mapped back by m.
    """
    u = np.asarray(u, dtype=float)
    if problem.modifier is not None:
        inner = problem.transformed()
        m = problem.modifier.values
        constants = constants or _constants_for(inner)
        profile = profile or profile_for(inner, cache, workers)
        lower_v, upper_v = _bounds(profile, constants, inner.f is not None)
        lower, upper = m * lower_v, m * upper_v
        modified = True
    else:
        constants = constants or _constants_for(problem)
        profile = profile or profile_for(problem, cache, workers)
        lower, upper = _bounds(profile, constants, problem.f is not None)
        modified = False
    lower_ratio, upper_ratio = _ratios(lower, upper, u)
    report = BilateralReport(
        problem.mode, lower, upper, lower_ratio, upper_ratio, problem.sigma_points, constants, modified,
    )
    if not report.passed:
        log.info("bilateral check failed: lower=%s upper=%s", report.worst_lower, report.worst_upper)
    return report


# ---------------------------------------------------------------------------
# Modified kernels
# ---------------------------------------------------------------------------

def solve_modified(
    problem: Problem,
    tol: Optional[float] = None,
    max_iter: Optional[int] = None,
    threshold: Optional[float] = None,
    verify: bool = True,
) -> SolveResult:
    """Solve the transformed problem for v and return u = m·v."""
    if problem.modifier is None:
        raise InputError("solve_modified needs a modifier")
    m = problem.modifier.values
    if problem.modifier.pole is not None and problem.kernel.symmetric:
        cert = modifiability_certificate(problem.kernel, problem.modifier.pole)
        if not cert.passed:
            raise NotQuasiMetricModified(
                f"modified kernel has kappa {cert.kappa_modified:.6g} > 4 kappa^2 = {cert.bound:.6g}",
                certificate=cert,
            )
    inner = problem.transformed()
    res = solve(inner, tol=tol, max_iter=max_iter, threshold=threshold, verify=False)
    u = m * res.u
    residual = float(np.max(np.abs(apply_operator(problem, u) - u))) if res.converged else float("nan")
    out = SolveResult(u, res.status, res.iterations, residual, problem.mode, res.trace, res.constants, v=res.u)
    if out.converged and verify and inner.kernel.symmetric:
        out.bilateral = verify_bilateral(problem, u, constants=res.constants)
    elif out.converged and verify:
        out.skipped = SKIPPED_NOT_SYMMETRIC
    return out


# ---------------------------------------------------------------------------
# Supersolutions and uniqueness
# ---------------------------------------------------------------------------

@dataclass
class HInvariance:
    c_h: float
    ratios: np.ndarray
    h: np.ndarray

    def c_prime(self, q: float) -> float:
        """Least simple C′ with C′·h a supersolution: max(2, (2 C_h)^{1/(1−q)})."""
        return max(2.0, _exp(math.log(2.0 * self.c_h) / (1.0 - q)))


def h_superinvariance(problem: Problem, profile: Optional[PotentialProfile] = None) -> HInvariance:
    """C_h = max 𝐆(h^q σ)/h."""
    profile = profile or profile_for(problem)
    h = profile.h
    gh = potential(problem.kernel, power(h, problem.q, problem.q) * problem.sigma)
    ratios = gh / h
    return HInvariance(float(np.max(ratios)), ratios, h)


@dataclass
class UniquenessReport:
    status: Status
    u_up: np.ndarray
    w_down: np.ndarray
    gaps: List[float]
    iterations: int
    c_h: float = float("nan")
    c_prime: float = float("nan")
    a: float = float("nan")
    envelope_violations: List[int] = field(default_factory=list)
    supersolution_start: bool = True
    tol: float = 0.0

    @property
    def agree(self) -> bool:
        if self.status != Status.CONVERGED:
            return False
        scale = 1.0 + float(np.max(np.abs(self.u_up)))
        return float(np.max(np.abs(self.w_down - self.u_up))) <= 10.0 * self.tol * scale

    @property
    def envelope_ok(self) -> bool:
        return not self.envelope_violations

    @property
    def passed(self) -> bool:
        return self.agree and self.envelope_ok

    def to_dict(self) -> Dict[str, Any]:
        return {
            "status": self.status.value,
            "iterations": self.iterations,
            "gaps": self.gaps,
            "c_h": self.c_h,
            "c_prime": self.c_prime,
            "a": self.a,
            "agree": self.agree,
            "envelope_ok": self.envelope_ok,
            "envelope_violations": self.envelope_violations,
            "supersolution_start": self.supersolution_start,
            "passed": self.passed,
        }


def _log_gap(w: np.ndarray, u: np.ndarray, points: np.ndarray) -> float:
    with np.errstate(divide="ignore", invalid="ignore"):
        return float(np.max(np.abs(np.log(w[points] / u[points]))))


def uniqueness_probe(
    problem: Problem,
    tol: Optional[float] = None,
    max_iter: Optional[int] = None,
    threshold: Optional[float] = None,
    profile: Optional[PotentialProfile] = None,
) -> UniquenessReport:
    """Iterate upward from the seed and downward from C′h in lockstep.

    r_j = max over σ-mass points of |log(w_j/u_j)| contracts at least by q
    per step; it must stay below q^j r_0 from j = 3 on.
    """
    tol = DEFAULTS["tol"] if tol is None else float(tol)
    max_iter = DEFAULTS["max_iter"] if max_iter is None else int(max_iter)
    threshold = DEFAULTS["divergence_threshold"] if threshold is None else float(threshold)
    q = problem.q
    empty = np.full(problem.n, np.nan)

    forcing = problem.forcing
    if _too_big(potential(problem.kernel, problem.sigma), threshold) or _too_big(forcing, threshold):
        return UniquenessReport(Status.NONEXISTENCE_DETECTED, empty, empty, [], 0, tol=tol)

    constants = _optional_constants(problem)
    profile = profile or profile_for(problem)
    inv = h_superinvariance(problem, profile)
    c_prime = inv.c_prime(q)
    u = subsolution_seed(problem, constants)
    w = c_prime * inv.h
    report = UniquenessReport(
        Status.MAX_ITER, u, w, [], 0, c_h=inv.c_h, c_prime=c_prime,
        a=float("nan") if constants is None else constants.c / constants.C, tol=tol,
    )
    if _too_big(u, threshold) or _too_big(w, threshold):
        report.status = Status.NONEXISTENCE_DETECTED
        return report
    t_w = apply_operator(problem, w, forcing)
    report.supersolution_start = bool(np.all(t_w <= w * (1.0 + 1e-12)))
    if not report.supersolution_start:
        log.warning("uniqueness probe: C'h is not a supersolution (C'=%.6g)", c_prime)

    points = problem.sigma_points
    r0 = _log_gap(w, u, points)
    report.gaps.append(r0)
    for j in range(1, max_iter + 1):
        u = apply_operator(problem, u, forcing)
        w = apply_operator(problem, w, forcing)
        report.u_up, report.w_down, report.iterations = u, w, j
        if _too_big(u, threshold) or _too_big(w, threshold):
            report.status = Status.NONEXISTENCE_DETECTED
            return report
        r = _log_gap(w, u, points)
        report.gaps.append(r)
        if j >= 3 and r > q ** j * r0 * (1.0 + REL_SLACK) + 1e-14:
            report.envelope_violations.append(j)
        if r <= tol:
            report.status = Status.CONVERGED
            return report
        if r >= report.gaps[-2]:
            log.warning("uniqueness probe stalled at gap %.3g (iteration %d)", r, j)
            raise GapStagnation(f"log-gap stalled at {r:.3g} above tol {tol:.3g}", report=report)
    raise GapStagnation(f"log-gap {report.gaps[-1]:.3g} above tol after {max_iter} iterations", report=report)


# ---------------------------------------------------------------------------
# Existence
# ---------------------------------------------------------------------------

@dataclass
class ExistenceReport:
    finite_g_sigma: bool
    finite_k_sigma: bool
    finite_forcing: bool
    x0: int
    a: float
    tail_sigma: float
    tail_kappa: float
    tail_forcing: float
    kappa_modified: float
    modifier_integral: Optional[float]
    mode: str
    modified: bool = False

    @property
    def exists(self) -> bool:
        ok = self.finite_g_sigma and self.finite_k_sigma and self.finite_forcing
        ok = ok and math.isfinite(self.kappa_modified)
        if self.modifier_integral is not None:
            ok = ok and math.isfinite(self.modifier_integral)
        return ok

    def to_dict(self) -> Dict[str, Any]:
        return {
            "mode": self.mode,
            "modified": self.modified,
            "finite_g_sigma": self.finite_g_sigma,
            "finite_k_sigma": self.finite_k_sigma,
            "finite_forcing": self.finite_forcing,
            "x0": self.x0,
            "a": self.a,
            "tail_sigma": self.tail_sigma,
            "tail_kappa": self.tail_kappa,
            "tail_forcing": self.tail_forcing,
            "kappa_modified": self.kappa_modified,
            "modifier_integral": self.modifier_integral,
            "exists": self.exists,
        }


def existence_check(
    problem: Problem,
    x0: int = 0,
    a: Optional[float] = None,
    threshold: Optional[float] = None,
    cache: Optional[KappaCache] = None,
) -> ExistenceReport:
    """Finiteness of 𝐆σ, 𝐊σ and the forcing, tail integrals at (x0, a),
    and the modified criterion κ̃(Ω) < ∞ with ∫ m dμ < ∞.

    Without an explicit modifier the Green modifier min{1, G(·, x0)} is used.
    """
    a = DEFAULTS["tail_radius"] if a is None else float(a)
    threshold = DEFAULTS["divergence_threshold"] if threshold is None else float(threshold)
    k, q, sigma = problem.kernel, problem.q, problem.sigma

    def finite(v: np.ndarray) -> bool:
        return not _too_big(v, threshold)

    g_sigma = potential(k, sigma)
    if problem.f is not None:
        forcing_measure = power(problem.f, q, q) * sigma
    else:
        forcing_measure = problem.mu_weights
    g_forcing = potential(k, forcing_measure)
    ok_sigma, ok_forcing = finite(g_sigma), finite(g_forcing)
    if problem.f is not None:
        ok_forcing = ok_forcing and finite(problem.f)

    if ok_sigma:
        profile = profile_for(problem, cache)
        ok_kappa = finite(profile.k_sigma)
        tail_kappa = kappa_tail_integral(k, sigma, q, x0, a, cache)
    else:
        ok_kappa, tail_kappa = False, float("inf")

    modifier = problem.modifier or green_modifier(k, x0)
    kappa_tilde = embedding_constant(modify(k, modifier), modified_sigma(sigma, modifier, q), q).value
    integral = None if problem.f is not None else math.fsum((modifier.values * problem.mu_weights).tolist())
    report = ExistenceReport(
        finite_g_sigma=ok_sigma,
        finite_k_sigma=ok_kappa,
        finite_forcing=ok_forcing,
        x0=int(x0),
        a=a,
        tail_sigma=tail_integral(k, sigma, x0, a),
        tail_kappa=tail_kappa,
        tail_forcing=tail_integral(k, forcing_measure, x0, a),
        kappa_modified=kappa_tilde,
        modifier_integral=integral,
        mode=problem.mode,
        modified=problem.modifier is not None,
    )
    log.info("existence: exists=%s kappa~=%.6g", report.exists, kappa_tilde)
    return report


# ---------------------------------------------------------------------------
# One-sided checks
# ---------------------------------------------------------------------------

@dataclass
class PointwiseCheck:
    name: str
    ratios: np.ndarray
    points: np.ndarray

    @property
    def worst(self) -> Tuple[int, float]:
        if self.points.size == 0:
            return -1, 0.0
        i = int(self.points[np.argmax(self.ratios[self.points])])
        return i, float(self.ratios[i])

    @property
    def passed(self) -> bool:
        return self.worst[1] <= 1.0 + REL_SLACK

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "worst": list(self.worst),
            "points_checked": int(self.points.size),
            "passed": self.passed,
        }


def kappa_lower_check(problem: Problem, u: Any, cache: Optional[KappaCache] = None) -> PointwiseCheck:
    """κ(B) <= (b/(1−q)^{1/q}) ‖u‖_{L^q(σ_B)}^{1−q} over every ball of every center.

    Ratios are indexed by center (worst over that center's balls).
    """
    u = np.asarray(u, dtype=float)
    q, k, sigma = problem.q, problem.kernel, problem.sigma
    constants = _constants_for(problem)
    factor = constants.b / (1.0 - q) ** (1.0 / q)
    cache = cache if cache is not None and cache.matches(k, sigma, q) else KappaCache(k, sigma, q)
    weighted = sigma * power(u, q, q)
    ratios = np.zeros(k.n)
    for x in range(k.n):
        for ball in k.decomposition(x).ball_sets:
            mass = math.fsum(weighted[list(ball)].tolist())
            if mass <= 0:
                continue
            rhs = factor * mass ** ((1.0 - q) / q)
            ratios[x] = max(ratios[x], cache.value(ball) / rhs)
    return PointwiseCheck("kappa_lower", ratios, np.arange(k.n))


def supersolution_lower_check(
    problem: Problem, w: Any, profile: Optional[PotentialProfile] = None,
) -> PointwiseCheck:
    """lower/w at the points where w >= 𝐆(w^q σ) + forcing."""
    w = np.asarray(w, dtype=float)
    profile = profile or profile_for(problem)
    lower, upper = _bounds(profile, _constants_for(problem), problem.f is not None)
    t_w = apply_operator(problem, w)
    holds = np.flatnonzero(w >= t_w * (1.0 - 1e-12))
    ratios, _ = _ratios(lower, upper, w)
    return PointwiseCheck("supersolution_lower", ratios, holds)


def subsolution_upper_check(
    problem: Problem, w: Any, profile: Optional[PotentialProfile] = None,
) -> PointwiseCheck:
    """w/upper at the points where w <= 𝐆(w^q σ) + forcing."""
    w = np.asarray(w, dtype=float)
    profile = profile or profile_for(problem)
    lower, upper = _bounds(profile, _constants_for(problem), problem.f is not None)
    t_w = apply_operator(problem, w)
    holds = np.flatnonzero(w <= t_w * (1.0 + 1e-12))
    _, ratios = _ratios(lower, upper, w)
    return PointwiseCheck("subsolution_upper", ratios, holds)
