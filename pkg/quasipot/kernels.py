"""
Quasipot — Kernels.

A kernel is a strictly positive, finite N x N matrix G(x, y) with
d = 1/G. Structural constants are computed exactly and cached on the
instance:

    κ  = max over triples d(x,y) / (d(x,z) + d(z,y))   (symmetric kernels)
    𝔞  = max over pairs G(x,y) / G(y,x)

Constructors: kernel_from_matrix(), riesz_kernel(), green_ball_kernel(),
symmetrize(), modify(). Probes: wmp_constant(), ptolemy_check(),
modifiability_certificate().
"""

from __future__ import annotations

import enum
import functools
import itertools
import logging
import math
import threading
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, Iterator, Mapping, Optional, Tuple

import numpy as np
from scipy import special

from quasipot.config import DEFAULTS
from quasipot.errors import (
    BadAlpha, BudgetExhausted, DuplicatePoints, InputError, LengthMismatch,
    NonFiniteEntry, NonPositiveEntry, NotSymmetric,
)
from quasipot.lp import maximize
from quasipot.space import BallDecomposition, ball_decomposition
from quasipot.utils import sha256_arrays

log = logging.getLogger(__name__)

KAPPA_FLOOR = 0.5


class Provenance(str, enum.Enum):
    EXPLICIT = "explicit"
    RIESZ = "riesz"
    GREEN_BALL = "green_ball"
    MODIFIED = "modified"
    SYMMETRIZED = "symmetrized"


# ---------------------------------------------------------------------------
# Kernel
# ---------------------------------------------------------------------------

class Kernel:
    """Immutable positive kernel matrix with lazily cached constants."""

    def __init__(
        self,
        matrix: Any,
        provenance: Provenance = Provenance.EXPLICIT,
        meta: Optional[Mapping[str, Any]] = None,
    ):
        try:
            m = np.array(matrix, dtype=float)
        except (TypeError, ValueError) as e:
            raise InputError(f"kernel matrix is not numeric ({e})") from e
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] == 0:
            raise LengthMismatch(f"kernel matrix must be square and nonempty, got shape {m.shape}")
        if not np.all(np.isfinite(m)):
            raise NonFiniteEntry("kernel entries must be finite")
        if np.any(m <= 0):
            bad = tuple(int(i) for i in np.argwhere(m <= 0)[0])
            raise NonPositiveEntry(f"kernel entries must be > 0 (first offender at {bad})")
        m.setflags(write=False)
        self.matrix = m
        self.provenance = Provenance(provenance)
        self.meta: Dict[str, Any] = dict(meta or {})
        self._decomp: Dict[int, BallDecomposition] = {}
        self._lock = threading.Lock()

    def __repr__(self) -> str:
        return f"Kernel(n={self.n}, provenance={self.provenance.value}, symmetric={self.symmetric})"

    @property
    def n(self) -> int:
        return int(self.matrix.shape[0])

    @functools.cached_property
    def symmetric(self) -> bool:
        return bool(np.array_equal(self.matrix, self.matrix.T))

    @functools.cached_property
    def distance(self) -> np.ndarray:
        d = 1.0 / self.matrix
        d.setflags(write=False)
        return d

    @functools.cached_property
    def kappa_witness(self) -> Tuple[float, Tuple[int, int, int]]:
        return quasi_metric_witness(self)

    @property
    def kappa(self) -> float:
        return self.kappa_witness[0]

    @property
    def kappa_eff(self) -> float:
        return max(self.kappa, KAPPA_FLOOR)

    @functools.cached_property
    def qs_constant(self) -> float:
        return quasi_symmetry_constant(self)

    @property
    def fingerprint(self) -> str:
        return sha256_arrays(self.matrix)

    def decomposition(self, x: int) -> BallDecomposition:
        x = int(x)
        with self._lock:
            hit = self._decomp.get(x)
        if hit is not None:
            return hit
        dec = ball_decomposition(self.matrix, x)
        with self._lock:
            return self._decomp.setdefault(x, dec)

    def scaled(self, c: float) -> "Kernel":
        if not c > 0:
            raise InputError(f"kernel scale must be positive, got {c}")
        return Kernel(self.matrix * float(c), self.provenance, self.meta)


def kernel_from_matrix(matrix: Any) -> Kernel:
    return Kernel(matrix, Provenance.EXPLICIT)


def as_kernel(obj: Any) -> Kernel:
    return obj if isinstance(obj, Kernel) else Kernel(obj)


# ---------------------------------------------------------------------------
# Structural constants
# ---------------------------------------------------------------------------

def quasi_metric_witness(kernel: Any) -> Tuple[float, Tuple[int, int, int]]:
    """Exact κ and the first triple (x, y, z) attaining it."""
    k = as_kernel(kernel)
    if not k.symmetric:
        raise NotSymmetric("quasi-metric constant requires a symmetric kernel")
    d = k.distance
    best, witness = -math.inf, (0, 0, 0)
    for z in range(k.n):
        denom = d[:, z][:, None] + d[z, :][None, :]
        ratio = d / denom
        idx = int(np.argmax(ratio))
        if ratio.flat[idx] > best:
            best = float(ratio.flat[idx])
            x, y = divmod(idx, k.n)
            witness = (x, y, z)
    log.debug("kappa=%.12g witness=%s n=%d", best, witness, k.n)
    return best, witness


def quasi_metric_constant(kernel: Any) -> float:
    k = as_kernel(kernel)
    return k.kappa


def quasi_symmetry_constant(kernel: Any) -> float:
    m = as_kernel(kernel).matrix
    return float(np.max(m / m.T))


def symmetrize(kernel: Any) -> Kernel:
    """G^s(x, y) = G(x, y) + G(y, x)."""
    k = as_kernel(kernel)
    return Kernel(k.matrix + k.matrix.T, Provenance.SYMMETRIZED, {"source": k.provenance.value})


# ---------------------------------------------------------------------------
# Constructors from point clouds
# ---------------------------------------------------------------------------

DIAGONAL_RULES = ("half_nearest", "explicit")


def _pairwise_distances(coords: Any) -> np.ndarray:
    pts = np.asarray(coords, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.ndim != 2 or pts.shape[0] == 0:
        raise LengthMismatch(f"coords must be N x d, got shape {pts.shape}")
    if not np.all(np.isfinite(pts)):
        raise NonFiniteEntry("coords must be finite")
    diff = pts[:, None, :] - pts[None, :, :]
    dist = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    off = ~np.eye(pts.shape[0], dtype=bool)
    if np.any(dist[off] == 0):
        i, j = np.argwhere((dist == 0) & off)[0]
        raise DuplicatePoints(f"points {int(i)} and {int(j)} coincide")
    return dist


def _check_alpha(alpha: float, n: int) -> None:
    if int(n) < 1:
        raise BadAlpha(f"dimension n must be >= 1, got {n}")
    if not 0 < alpha < n:
        raise BadAlpha(f"need 0 < alpha < n, got alpha={alpha}, n={n}")


def _half_nearest(dist: np.ndarray) -> np.ndarray:
    if dist.shape[0] < 2:
        raise InputError("diagonal_rule 'half_nearest' needs at least two points")
    masked = dist + np.diag(np.full(dist.shape[0], np.inf))
    return masked.min(axis=1) / 2.0


def _explicit_diagonal(diagonal: Any, n_points: int) -> np.ndarray:
    if diagonal is None:
        raise InputError("diagonal_rule 'explicit' needs diagonal values")
    diag = np.asarray(diagonal, dtype=float).ravel()
    if diag.shape[0] != n_points:
        raise LengthMismatch(f"{diag.shape[0]} diagonal values for {n_points} points")
    if not np.all(np.isfinite(diag)) or np.any(diag <= 0):
        raise NonPositiveEntry("explicit diagonal values must be finite and > 0")
    return diag


def riesz_kernel(
    coords: Any,
    alpha: float,
    n: int,
    diagonal_rule: str = "half_nearest",
    diagonal: Any = None,
) -> Kernel:
    """G(x, y) = |x − y|^{α−n} off the diagonal.

    half_nearest: G(x, x) = (h_x/2)^{α−n}, h_x the distance to the nearest other point.
    explicit: G(x, x) taken from `diagonal`.
    """
    alpha, n = float(alpha), int(n)
    _check_alpha(alpha, n)
    if diagonal_rule not in DIAGONAL_RULES:
        raise InputError(f"unknown diagonal_rule {diagonal_rule!r}; expected one of {DIAGONAL_RULES}")
    dist = _pairwise_distances(coords)
    size = dist.shape[0]
    with np.errstate(divide="ignore"):
        g = np.power(dist, alpha - n)
    if diagonal_rule == "half_nearest":
        np.fill_diagonal(g, np.power(_half_nearest(dist), alpha - n))
    else:
        np.fill_diagonal(g, _explicit_diagonal(diagonal, size))
    meta = {"alpha": alpha, "n": n, "diagonal_rule": diagonal_rule}
    return Kernel(g, Provenance.RIESZ, meta)


def riesz_kappa_bound(alpha: float, n: int) -> float:
    """Quasi-metric constant of |x−y|^{n−α}: at most max(1, 2^{n−α−1})."""
    return max(1.0, 2.0 ** (float(n) - float(alpha) - 1.0))


def _green_ball_constant(alpha: float, n: int) -> float:
    # Γ(n/2) / (2^α π^{n/2} Γ(α/2)²)
    log_k = (
        special.gammaln(n / 2.0)
        - alpha * math.log(2.0)
        - (n / 2.0) * math.log(math.pi)
        - 2.0 * special.gammaln(alpha / 2.0)
    )
    return math.exp(log_k)


def _green_ball_values(dist: np.ndarray, w_x: np.ndarray, w_y: np.ndarray, alpha: float, n: int) -> np.ndarray:
    # G = k |x−y|^{α−n} ∫_0^{r0} t^{α/2−1} (t+1)^{−n/2} dt; with s = t/(1+t) the
    # integral is the incomplete beta B(s0; α/2, (n−α)/2), s0 = r0/(1+r0).
    a, b = alpha / 2.0, (n - alpha) / 2.0
    r0 = (w_x * w_y) / dist ** 2
    s0 = r0 / (1.0 + r0)
    inc = special.betainc(a, b, s0) * special.beta(a, b)
    return _green_ball_constant(alpha, n) * dist ** (alpha - n) * inc


def green_ball_kernel(coords: Any, alpha: float, n: int) -> Kernel:
    """Green function of (−Δ)^{α/2} on the unit ball of R^n, 0 < α <= 2, α < n.

    Points must lie strictly inside the unit ball; the diagonal is the
    same formula evaluated at distance h_x/2.
    """
    alpha, n = float(alpha), int(n)
    _check_alpha(alpha, n)
    if alpha > 2:
        raise BadAlpha(f"green_ball kernel needs alpha <= 2, got {alpha}")
    pts = np.asarray(coords, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.ndim != 2 or pts.shape[1] != n:
        raise LengthMismatch(f"green_ball coords must have dimension n={n}, got shape {pts.shape}")
    norms2 = np.einsum("ij,ij->i", pts, pts)
    if np.any(norms2 >= 1.0):
        raise InputError("green_ball points must lie strictly inside the unit ball")
    dist = _pairwise_distances(pts)
    w = 1.0 - norms2
    size = dist.shape[0]

    g = np.empty((size, size))
    iu = np.triu_indices(size, k=1)
    upper = _green_ball_values(dist[iu], w[iu[0]], w[iu[1]], alpha, n)
    g[iu] = upper
    g[(iu[1], iu[0])] = upper
    h = _half_nearest(dist)
    np.fill_diagonal(g, _green_ball_values(h, w, w, alpha, n))
    meta = {"alpha": alpha, "n": n, "diagonal_rule": "half_nearest"}
    return Kernel(g, Provenance.GREEN_BALL, meta)


# ---------------------------------------------------------------------------
# Modifiers
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Modifier:
    values: np.ndarray
    pole: Optional[int] = None

    def __post_init__(self) -> None:
        v = np.array(self.values, dtype=float).ravel()
        if not np.all(np.isfinite(v)) or np.any(v <= 0):
            raise NonPositiveEntry("modifier values must be finite and > 0")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def is_identity(self) -> bool:
        return bool(np.all(self.values == 1.0))


def green_modifier(kernel: Any, x0: int) -> Modifier:
    """m(x) = min{1, G(x, x0)}."""
    k = as_kernel(kernel)
    if not 0 <= int(x0) < k.n:
        raise InputError(f"pole {x0} out of range 0..{k.n - 1}")
    return Modifier(np.minimum(1.0, k.matrix[:, int(x0)]), pole=int(x0))


def modify(kernel: Any, modifier: Modifier) -> Kernel:
    """G̃(x, y) = G(x, y) / (m(x) m(y))."""
    k = as_kernel(kernel)
    m = modifier.values
    if m.shape[0] != k.n:
        raise LengthMismatch(f"modifier has {m.shape[0]} values, kernel has {k.n} points")
    meta = {"base": k.provenance.value, "pole": modifier.pole}
    return Kernel(k.matrix / np.outer(m, m), Provenance.MODIFIED, meta)


# ---------------------------------------------------------------------------
# Weak maximum principle
# ---------------------------------------------------------------------------

@dataclass
class WmpReport:
    b_empirical: float
    b_theoretical: Optional[float]
    witness_support: Tuple[int, ...]
    witness_point: int
    witness_measure: np.ndarray
    exact: bool
    lp_count: int = 0
    supports_examined: int = 0
    budget: Optional[int] = None
    seed: Optional[int] = None

    @property
    def passed(self) -> bool:
        if self.b_theoretical is None:
            return True
        return self.b_empirical <= self.b_theoretical * (1.0 + 1e-9)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "b_empirical": self.b_empirical,
            "b_theoretical": self.b_theoretical,
            "witness_support": list(self.witness_support),
            "witness_point": self.witness_point,
            "witness_measure": self.witness_measure,
            "exact": self.exact,
            "lp_count": self.lp_count,
            "supports_examined": self.supports_examined,
            "budget": self.budget,
            "seed": self.seed,
            "passed": self.passed,
        }


def _all_supports(n: int) -> Iterator[Tuple[int, ...]]:
    for size in range(1, n + 1):
        yield from itertools.combinations(range(n), size)


def _sampled_supports(n: int, count: int, seed: int) -> Iterator[Tuple[Tuple[int, ...], int]]:
    rng = np.random.default_rng(seed)
    for _ in range(count):
        size = int(rng.integers(1, n)) if n > 1 else 1
        support = tuple(sorted(int(i) for i in rng.choice(n, size=size, replace=False)))
        rest = [i for i in range(n) if i not in support]
        if rest:
            yield support, int(rng.choice(rest))


def wmp_constant(
    kernel: Any,
    mode: str = "auto",
    budget: Optional[int] = None,
    exact_limit: Optional[int] = None,
    seed: int = 0,
) -> WmpReport:
    """Least 𝔟 with 𝐆μ <= 1 on S ⊇ supp μ  =>  𝐆μ <= 𝔟 everywhere.

    For every support S and point x outside S solve
        max 𝐆μ(x)  s.t.  G[S, S] μ <= 1,  μ >= 0.
    Exact mode enumerates all S (budget, if given, caps the LP count);
    sampled mode draws `budget` random (S, x) pairs.
    """
    k = as_kernel(kernel)
    n = k.n
    if exact_limit is None:
        exact_limit = int(DEFAULTS["exact_limit"])
    if mode == "auto":
        mode = "exact" if n <= exact_limit else "sampled"
    if mode not in ("exact", "sampled"):
        raise InputError(f"unknown WMP mode {mode!r}")
    if mode == "exact" and n > exact_limit and budget is None:
        raise InputError(
            f"exact WMP search over {n} points exceeds exact_limit={exact_limit}; give a budget or use sampled mode"
        )
    g = k.matrix
    theoretical = 2.0 * k.kappa_eff if k.symmetric else None

    # δ_0 / G(0, 0) already gives 𝐆μ(0) = 1
    start = np.zeros(n)
    start[0] = 1.0 / g[0, 0]
    report = WmpReport(
        b_empirical=1.0, b_theoretical=theoretical, witness_support=(0,), witness_point=0,
        witness_measure=start, exact=(mode == "exact"), budget=budget,
        seed=None if mode == "exact" else seed,
    )

    def consider(support: Tuple[int, ...], points: Iterable[int]) -> None:
        s = list(support)
        for x in points:
            if report.exact and budget is not None and report.lp_count >= budget:
                raise BudgetExhausted(
                    f"WMP budget of {budget} LPs exhausted after {report.supports_examined} supports",
                    report=report,
                )
            res = maximize(g[x, s], g[np.ix_(s, s)], np.ones(len(s)))
            report.lp_count += 1
            if res.value > report.b_empirical:
                mu = np.zeros(n)
                mu[s] = res.x
                report.b_empirical = float(res.value)
                report.witness_support = tuple(support)
                report.witness_point = int(x)
                report.witness_measure = mu
        report.supports_examined += 1

    if report.exact:
        for support in _all_supports(n):
            consider(support, (x for x in range(n) if x not in support))
    else:
        count = int(budget) if budget is not None else int(DEFAULTS["wmp_budget"])
        for support, x in _sampled_supports(n, count, seed):
            consider(support, (x,))

    log.info(
        "wmp: mode=%s n=%d b=%.12g bound=%s lps=%d",
        mode, n, report.b_empirical, theoretical, report.lp_count,
    )
    return report


# ---------------------------------------------------------------------------
# Ptolemy inequality and modifiability
# ---------------------------------------------------------------------------

@dataclass
class PtolemyReport:
    worst_ratio: float
    witness: Tuple[int, int, int, int]  # (x, y, z, x0)
    bound: float

    @property
    def passed(self) -> bool:
        return self.worst_ratio <= self.bound * (1.0 + 1e-12)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "worst_ratio": self.worst_ratio,
            "witness": list(self.witness),
            "bound": self.bound,
            "passed": self.passed,
        }


def ptolemy_check(kernel: Any) -> PtolemyReport:
    """max of d(x,y)d(x0,z) / [d(x,z)d(y,x0) + d(x0,x)d(z,y)], compared with 4κ²."""
    k = as_kernel(kernel)
    if not k.symmetric:
        raise NotSymmetric("Ptolemy check requires a symmetric kernel")
    d = k.distance
    best, witness = 0.0, (0, 0, 0, 0)
    for x0 in range(k.n):
        lhs = d[:, :, None] * d[x0][None, None, :]
        rhs = d[:, None, :] * d[:, x0][None, :, None] + d[x0][:, None, None] * d.T[None, :, :]
        live = (lhs > 0) | (rhs > 0)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(live, lhs / rhs, 0.0)
        idx = int(np.argmax(ratio))
        if ratio.flat[idx] > best:
            best = float(ratio.flat[idx])
            x, y, z = np.unravel_index(idx, ratio.shape)
            witness = (int(x), int(y), int(z), x0)
    return PtolemyReport(worst_ratio=best, witness=witness, bound=4.0 * k.kappa_eff ** 2)


@dataclass
class ModifiabilityCertificate:
    pole: int
    kappa: float
    kappa_modified: float
    modifier: Modifier = field(repr=False)

    @property
    def bound(self) -> float:
        return 4.0 * max(self.kappa, KAPPA_FLOOR) ** 2

    @property
    def wmp_modified(self) -> float:
        return 2.0 * self.kappa_modified

    @property
    def wmp_bound(self) -> float:
        return 8.0 * max(self.kappa, KAPPA_FLOOR) ** 2

    @property
    def passed(self) -> bool:
        return self.kappa_modified <= self.bound * (1.0 + 1e-12)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "pole": self.pole,
            "kappa": self.kappa,
            "kappa_modified": self.kappa_modified,
            "bound_4kappa2": self.bound,
            "wmp_modified": self.wmp_modified,
            "wmp_bound_8kappa2": self.wmp_bound,
            "modifier": self.modifier.values,
            "passed": self.passed,
        }


def modifiability_certificate(kernel: Any, x0: int) -> ModifiabilityCertificate:
    """κ of the Green-modified kernel at pole x0 against 4κ²."""
    k = as_kernel(kernel)
    if not k.symmetric:
        raise NotSymmetric("modifiability certificate requires a symmetric kernel")
    m = green_modifier(k, x0)
    modified = modify(k, m)
    cert = ModifiabilityCertificate(pole=int(x0), kappa=k.kappa, kappa_modified=modified.kappa, modifier=m)
    log.debug("modifiability: pole=%d kappa=%.6g kappa~=%.6g", x0, cert.kappa, cert.kappa_modified)
    return cert
