"""
Quasipot — Potentials and embedding constants.

    𝐆ν(x)  = Σ_y G(x, y) ν_y
    κ(E)   = sup_ν ‖𝐆ν‖_{L^q(σ_E)} / ‖ν‖  =  (max over the simplex of Φ)^{1/q},
             Φ(ν) = Σ_{y∈E} σ_y (𝐆ν(y))^q
    𝐊σ(x)  = ∫_0^∞ κ(B(x, r))^{q/(1−q)} dr / r²

Radial integrals are exact step sums over the ball decomposition of
each row. κ(E) is found by away-step conditional gradient on the
concave Φ; the linear-optimality gap certifies Φ* − Φ(ν).

Lorentz quasi-norm on a finite measure space (F* the decreasing
rearrangement, M_k the mass of the k largest values):

    ‖F‖_{p,s}^s = Σ_k F_(k)^s (M_k^{s/p} − M_{k−1}^{s/p})

normalized so that ‖F‖_{p,p} = ‖F‖_p.
"""

from __future__ import annotations

import concurrent.futures
import itertools
import logging
import math
import threading
from dataclasses import dataclass
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from quasipot.config import DEFAULTS
from quasipot.errors import BadExponent, InputError, LengthMismatch, NoConvergence
from quasipot.kernels import Kernel, Modifier, as_kernel, modify
from quasipot.space import IndexSet, as_weights, canonical_set
from quasipot.utils import sha256_arrays

log = logging.getLogger(__name__)

Q_MIN = 1e-3
Q_MAX = 1.0 - 1e-3
LOG_DOMAIN_Q = 0.9


# ---------------------------------------------------------------------------
# Exponents
# ---------------------------------------------------------------------------

def check_exponent(q: float) -> float:
    try:
        q = float(q)
    except (TypeError, ValueError) as e:
        raise BadExponent(f"q is not a number: {q!r}") from e
    if not Q_MIN <= q <= Q_MAX:
        raise BadExponent(f"q must lie in [{Q_MIN}, {Q_MAX}], got {q}")
    return q


def power(t: Any, e: float, q: Optional[float] = None) -> np.ndarray:
    """t**e for t >= 0; evaluated as exp(e·log t) when q is close to 1."""
    t = np.asarray(t, dtype=float)
    if q is not None and q > LOG_DOMAIN_Q:
        with np.errstate(divide="ignore", over="ignore"):
            out = np.exp(e * np.log(t))
        return np.where(t > 0, out, 0.0 if e > 0 else np.inf)
    with np.errstate(divide="ignore", over="ignore"):
        return np.power(t, e)


def scalar_power(t: float, e: float, q: Optional[float] = None) -> float:
    return float(power(np.float64(t), e, q))


# ---------------------------------------------------------------------------
# Linear potentials
# ---------------------------------------------------------------------------

def potential(kernel: Any, measure: Any) -> np.ndarray:
    """(𝐆ν)(x) = Σ_y G(x, y) ν_y with compensated row sums."""
    g = as_kernel(kernel).matrix
    w = as_weights(measure, g.shape[0])
    return np.array([math.fsum((row * w).tolist()) for row in g])


def potential_radial(kernel: Any, measure: Any, x: int) -> float:
    """Σ_j ν(B_j)(g_j − g_{j+1}) over the ball decomposition at x."""
    k = as_kernel(kernel)
    dec = k.decomposition(x)
    return dec.step_sum(dec.masses(as_weights(measure, k.n)))


def tail_integral(kernel: Any, measure: Any, x0: int, a: float) -> float:
    """∫_a^∞ ν(B(x0, r)) dr / r²."""
    k = as_kernel(kernel)
    dec = k.decomposition(x0)
    return dec.tail_sum(dec.masses(as_weights(measure, k.n)), a)


# ---------------------------------------------------------------------------
# Embedding constants
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class EmbeddingCertificate:
    set_E: IndexSet
    value: float
    maximizer: np.ndarray
    gap: float
    iterations: int
    phi: float
    q: float

    def to_dict(self) -> Dict[str, Any]:
        return {
            "set": list(self.set_E),
            "value": self.value,
            "gap": self.gap,
            "phi": self.phi,
            "iterations": self.iterations,
            "maximizer": self.maximizer,
        }


def _line_search(w: np.ndarray, t: np.ndarray, dt: np.ndarray, q: float, gamma_max: float, steps: int) -> float:
    """Maximizer of γ -> Σ w (t + γ dt)^q on [0, gamma_max] (concave)."""

    def slope(gamma: float) -> float:
        return float(np.dot(w * q * power(t + gamma * dt, q - 1.0, q), dt))

    if slope(gamma_max) >= 0:
        return gamma_max
    lo, hi = 0.0, gamma_max
    for _ in range(steps):
        mid = 0.5 * (lo + hi)
        if slope(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def embedding_constant(
    kernel: Any,
    sigma: Any,
    q: float,
    set_E: Optional[Iterable[int]] = None,
    gap_tol: Optional[float] = None,
    gap_rel_tol: Optional[float] = None,
    max_iter: Optional[int] = None,
    warm_start: Optional[np.ndarray] = None,
    line_search_steps: Optional[int] = None,
) -> EmbeddingCertificate:
    """κ(E) with an optimality certificate; E defaults to every point."""
    k = as_kernel(kernel)
    q = check_exponent(q)
    w_all = as_weights(sigma, k.n)
    E = canonical_set(range(k.n) if set_E is None else set_E, k.n)
    gap_tol = DEFAULTS["gap_tol"] if gap_tol is None else float(gap_tol)
    gap_rel_tol = DEFAULTS["gap_rel_tol"] if gap_rel_tol is None else float(gap_rel_tol)
    max_iter = DEFAULTS["fw_max_iter"] if max_iter is None else int(max_iter)
    steps = DEFAULTS["line_search_steps"] if line_search_steps is None else int(line_search_steps)

    active = [y for y in E if w_all[y] > 0]
    if not active:
        return EmbeddingCertificate(E, 0.0, np.full(k.n, 1.0 / k.n), 0.0, 0, 0.0, q)

    w = w_all[active]
    g_e = k.matrix[active, :]
    if warm_start is not None and np.sum(warm_start) > 0:
        nu = np.clip(np.asarray(warm_start, dtype=float), 0.0, None)
        nu = nu / nu.sum()
    else:
        nu = np.full(k.n, 1.0 / k.n)

    it = 0
    while True:
        t = g_e @ nu
        phi = math.fsum((w * power(t, q, q)).tolist())
        grad = q * ((w * power(t, q - 1.0, q)) @ g_e)
        s = int(np.argmax(grad))
        lin = float(grad @ nu)
        gap = float(grad[s]) - lin
        if gap <= max(gap_tol, gap_rel_tol * phi):
            break
        if it >= max_iter:
            cert = EmbeddingCertificate(E, scalar_power(phi, 1.0 / q, q), nu.copy(), gap, it, phi, q)
            raise NoConvergence(
                f"conditional gradient for |E|={len(E)} stopped at gap {gap:.3g} after {it} iterations",
                certificate=cert,
            )
        support = np.flatnonzero(nu > 0)
        a = int(support[np.argmin(grad[support])])
        away_gap = lin - float(grad[a])
        if gap >= away_gap or nu[a] >= 1.0:
            d = -nu.copy()
            d[s] += 1.0
            gamma_max = 1.0
            drop = None
        else:
            d = nu.copy()
            d[a] -= 1.0
            gamma_max = nu[a] / (1.0 - nu[a])
            drop = a
        gamma = _line_search(w, t, g_e @ d, q, gamma_max, steps)
        nu = nu + gamma * d
        if drop is not None and gamma >= gamma_max:
            nu[drop] = 0.0
        nu = np.clip(nu, 0.0, None)
        nu /= nu.sum()
        it += 1
        if it % 1000 == 0:
            log.debug("kappa |E|=%d iter=%d phi=%.15g gap=%.3g", len(E), it, phi, gap)

    value = scalar_power(phi, 1.0 / q, q)
    return EmbeddingCertificate(E, value, nu, gap, it, phi, q)


class KappaCache:
    """κ certificates keyed by canonical index set, shared across centers.

    Insertions are first-writer-wins; warm starts come from the largest
    cached strict subset.
    """

    def __init__(self, kernel: Any, sigma: Any, q: float, **solver_opts: Any):
        self.kernel = as_kernel(kernel)
        self.sigma = np.array(as_weights(sigma, self.kernel.n))
        self.q = check_exponent(q)
        self.fingerprint = sha256_arrays(self.kernel.matrix, self.sigma, [self.q])
        self._opts = solver_opts
        self._store: Dict[IndexSet, EmbeddingCertificate] = {}
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0

    def __len__(self) -> int:
        return len(self._store)

    def matches(self, kernel: Any, sigma: Any, q: float) -> bool:
        k = as_kernel(kernel)
        return self.fingerprint == sha256_arrays(k.matrix, as_weights(sigma, k.n), [float(q)])

    def get(self, set_E: Iterable[int]) -> Optional[EmbeddingCertificate]:
        with self._lock:
            return self._store.get(canonical_set(set_E))

    def put(self, cert: EmbeddingCertificate) -> EmbeddingCertificate:
        with self._lock:
            return self._store.setdefault(cert.set_E, cert)

    def warm_start(self, set_E: IndexSet) -> Optional[np.ndarray]:
        target = frozenset(set_E)
        with self._lock:
            best: Optional[Tuple[int, IndexSet]] = None
            for key in self._store:
                if len(key) < len(target) and target.issuperset(key):
                    rank = (-len(key), key)
                    if best is None or rank < best:
                        best = rank
            return None if best is None else self._store[best[1]].maximizer

    def certificate(self, set_E: Iterable[int]) -> EmbeddingCertificate:
        key = canonical_set(set_E, self.kernel.n)
        hit = self.get(key)
        if hit is not None:
            self.hits += 1
            return hit
        self.misses += 1
        cert = embedding_constant(
            self.kernel, self.sigma, self.q, key, warm_start=self.warm_start(key), **self._opts,
        )
        return self.put(cert)

    def value(self, set_E: Iterable[int]) -> float:
        return self.certificate(set_E).value

    def certificates(self) -> List[EmbeddingCertificate]:
        with self._lock:
            return [self._store[k] for k in sorted(self._store, key=lambda s: (len(s), s))]

    def solve_all(self, sets: Iterable[Iterable[int]], workers: Optional[int] = None) -> None:
        """Fill the cache for all sets in waves of equal size, smallest first."""
        workers = DEFAULTS["workers"] if workers is None else max(1, int(workers))
        pending = sorted({canonical_set(s, self.kernel.n) for s in sets}, key=lambda s: (len(s), s))
        pending = [s for s in pending if self.get(s) is None]
        for _size, wave in itertools.groupby(pending, key=len):
            batch = list(wave)
            if workers > 1 and len(batch) > 1:
                with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
                    list(pool.map(self.certificate, batch))
            else:
                for s in batch:
                    self.certificate(s)
        log.debug("kappa cache: %d sets, hits=%d misses=%d", len(self), self.hits, self.misses)


def _cache_for(kernel: Kernel, sigma: np.ndarray, q: float, cache: Optional[KappaCache]) -> KappaCache:
    if cache is not None and cache.matches(kernel, sigma, q):
        return cache
    if cache is not None:
        log.debug("kappa cache fingerprint mismatch; using a fresh cache")
    return KappaCache(kernel, sigma, q)


# ---------------------------------------------------------------------------
# Intrinsic potentials
# ---------------------------------------------------------------------------

def intrinsic_potential(
    kernel: Any,
    sigma: Any,
    q: float,
    cache: Optional[KappaCache] = None,
    workers: Optional[int] = None,
    centers: Optional[Sequence[int]] = None,
) -> np.ndarray:
    """𝐊σ(x) = Σ_j κ(B_j)^{q/(1−q)} (g_j − g_{j+1}); NaN at centers not requested."""
    k = as_kernel(kernel)
    q = check_exponent(q)
    w = as_weights(sigma, k.n)
    cache = _cache_for(k, w, q, cache)
    xs = range(k.n) if centers is None else [int(x) for x in centers]
    decs = {x: k.decomposition(x) for x in xs}
    cache.solve_all((s for dec in decs.values() for s in dec.ball_sets), workers)

    p = q / (1.0 - q)
    out = np.full(k.n, np.nan)
    for x, dec in decs.items():
        kappas = np.array([cache.value(s) for s in dec.ball_sets])
        out[x] = dec.step_sum(power(kappas, p, q))
    return out


def kappa_tail_integral(
    kernel: Any, sigma: Any, q: float, x0: int, a: float, cache: Optional[KappaCache] = None,
) -> float:
    """∫_a^∞ κ(B(x0, r))^{q/(1−q)} dr / r²."""
    k = as_kernel(kernel)
    q = check_exponent(q)
    cache = _cache_for(k, as_weights(sigma, k.n), q, cache)
    dec = k.decomposition(x0)
    kappas = np.array([cache.value(s) for s in dec.ball_sets])
    return dec.tail_sum(power(kappas, q / (1.0 - q), q), a)


def modified_sigma(sigma: Any, modifier: Modifier, q: float) -> np.ndarray:
    """dσ̃ = m^{1+q} dσ."""
    w = as_weights(sigma)
    m = modifier.values
    if m.shape[0] != w.shape[0]:
        raise LengthMismatch(f"modifier has {m.shape[0]} values, sigma has {w.shape[0]}")
    return power(m, 1.0 + q) * w


def modified_intrinsic_potential(
    kernel: Any,
    modifier: Modifier,
    sigma: Any,
    q: float,
    cache: Optional[KappaCache] = None,
    workers: Optional[int] = None,
) -> np.ndarray:
    q = check_exponent(q)
    return intrinsic_potential(modify(kernel, modifier), modified_sigma(sigma, modifier, q), q, cache, workers)


# ---------------------------------------------------------------------------
# Lorentz diagnostic
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LorentzDiagnostic:
    set_B: IndexSet
    kappa: float
    strong_norm: float
    lorentz_norm: float
    empty: bool

    @property
    def ratio_strong(self) -> float:
        return self.kappa / self.strong_norm if not self.empty else float("nan")

    @property
    def ratio_lorentz(self) -> float:
        return self.kappa / self.lorentz_norm if not self.empty else float("nan")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "set": list(self.set_B),
            "kappa": self.kappa,
            "strong_norm": self.strong_norm,
            "lorentz_norm": self.lorentz_norm,
            "ratio_strong": self.ratio_strong,
            "ratio_lorentz": self.ratio_lorentz,
            "empty": self.empty,
        }


def lorentz_diagnostic(
    kernel: Any, sigma: Any, q: float, set_B: Iterable[int], cache: Optional[KappaCache] = None,
) -> LorentzDiagnostic:
    """κ(B) against ‖𝐆σ_B‖ in L^{p}(σ_B) and L^{p,q}(σ_B), p = q/(1−q)."""
    k = as_kernel(kernel)
    q = check_exponent(q)
    w = as_weights(sigma, k.n)
    B = canonical_set(set_B, k.n)
    w_b = np.zeros(k.n)
    w_b[list(B)] = w[list(B)]
    if not np.any(w_b > 0):
        return LorentzDiagnostic(B, 0.0, 0.0, 0.0, empty=True)

    kappa = _cache_for(k, w, q, cache).value(B)
    p = q / (1.0 - q)
    f = potential(k, w_b)
    pts = np.flatnonzero(w_b > 0)
    vals, mass = f[pts], w_b[pts]
    strong = scalar_power(math.fsum((mass * power(vals, p, q)).tolist()), 1.0 / p, q)

    order = np.argsort(-vals, kind="stable")
    cum = np.cumsum(mass[order])
    prev = np.append(0.0, cum[:-1])
    steps = power(cum, q / p, q) - power(prev, q / p, q)
    lorentz = scalar_power(math.fsum((power(vals[order], q, q) * steps).tolist()), 1.0 / q, q)
    return LorentzDiagnostic(B, kappa, strong, lorentz, empty=False)


# ---------------------------------------------------------------------------
# Profiles
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class PotentialProfile:
    """𝐆σ, 𝐊σ and the forcing potentials for one (kernel, σ, q).

    μ-mode: h = (𝐆σ)^{1/(1−q)} + 𝐊σ + 𝐆μ.
    f-mode: h = (𝐆σ)^{1/(1−q)} + 𝐊σ + 𝐆(f^q σ) + f.
    """

    q: float
    g_sigma: np.ndarray
    k_sigma: np.ndarray
    g_mu: np.ndarray
    f: Optional[np.ndarray] = None
    g_f: Optional[np.ndarray] = None

    @property
    def a_term(self) -> np.ndarray:
        return power(self.g_sigma, 1.0 / (1.0 - self.q), self.q)

    @property
    def bracket(self) -> np.ndarray:
        """The sum multiplied by the bilateral constants."""
        if self.f is not None:
            return self.a_term + self.k_sigma + self.g_f
        return self.a_term + self.k_sigma + self.g_mu

    @property
    def h(self) -> np.ndarray:
        if self.f is not None:
            return self.bracket + self.f
        return self.bracket


def potential_profile(
    kernel: Any,
    sigma: Any,
    q: float,
    mu: Any = None,
    f: Any = None,
    cache: Optional[KappaCache] = None,
    workers: Optional[int] = None,
) -> PotentialProfile:
    k = as_kernel(kernel)
    q = check_exponent(q)
    w = as_weights(sigma, k.n)
    if mu is not None and f is not None:
        raise InputError("give either mu or f, not both")
    g_sigma = potential(k, w)
    k_sigma = intrinsic_potential(k, w, q, cache=cache, workers=workers)
    g_mu = np.zeros(k.n) if mu is None else potential(k, mu)
    if f is None:
        return PotentialProfile(q, g_sigma, k_sigma, g_mu)
    f = np.asarray(f, dtype=float)
    g_f = potential(k, power(f, q, q) * w)
    return PotentialProfile(q, g_sigma, k_sigma, g_mu, f=f, g_f=g_f)


def power_potential_ratio(
    kernel: Any, sigma: Any, q: float, nu: Any, cache: Optional[KappaCache] = None,
) -> np.ndarray:
    """Pointwise 𝐆[(𝐆ν)^q σ] / ((2κ)^q (𝐆ν)^q [𝐆σ + (𝐊σ)^{1−q}]); at most 1 on quasi-metric kernels."""
    k = as_kernel(kernel)
    q = check_exponent(q)
    w = as_weights(sigma, k.n)
    g_nu = potential(k, nu)
    lhs = potential(k, power(g_nu, q, q) * w)
    k_sigma = intrinsic_potential(k, w, q, cache=cache)
    rhs = power(2.0 * k.kappa_eff, q) * power(g_nu, q, q) * (potential(k, w) + power(k_sigma, 1.0 - q, q))
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(rhs > 0, lhs / rhs, 0.0)
