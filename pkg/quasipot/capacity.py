"""
Quasipot — Wiener capacity.

    cap₀(K) = max μ(K)  s.t.  supp μ ⊆ K,  𝐆*μ <= 1 on all of Ω
    cap(K)  = max μ(K)  s.t.  𝐆*μ <= 1 on supp μ

with cap₀ <= cap <= 𝔟·cap₀ under the weak maximum principle (𝔟 = 2κ for
quasi-metric kernels). cap(K) is the max over supports S ⊆ K of the
LP restricted to S.
"""

from __future__ import annotations

import concurrent.futures
import itertools
import logging
from dataclasses import dataclass
from typing import Any, Dict, Iterable, List, Optional, Tuple

import numpy as np

from quasipot.config import DEFAULTS
from quasipot.errors import InputError, NotSymmetric, SubsetLimitExceeded
from quasipot.kernels import as_kernel
from quasipot.lp import LpResult, maximize
from quasipot.space import IndexSet, canonical_set

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class CapacityValue:
    set_K: IndexSet
    value: float
    equilibrium: np.ndarray
    dual_gap: float

    @property
    def support(self) -> IndexSet:
        return tuple(int(i) for i in np.flatnonzero(self.equilibrium > 0))


@dataclass(frozen=True, eq=False)
class CapacityResult:
    set_K: IndexSet
    mode: str
    cap0: float
    cap: Optional[float]
    bracket: Tuple[float, float]
    equilibrium: np.ndarray
    b: Optional[float]
    subsets: int = 0

    @property
    def sandwich_ok(self) -> bool:
        if self.cap is None:
            return True
        ok = self.cap0 <= self.cap * (1.0 + 1e-9)
        if self.b is not None:
            ok = ok and self.cap <= self.b * self.cap0 * (1.0 + 1e-9)
        return ok

    def to_dict(self) -> Dict[str, Any]:
        return {
            "set": list(self.set_K),
            "mode": self.mode,
            "cap0": self.cap0,
            "cap": self.cap,
            "bracket": list(self.bracket),
            "b": self.b,
            "equilibrium": self.equilibrium,
            "subsets": self.subsets,
            "sandwich_ok": self.sandwich_ok,
        }


def _nonempty(set_K: Optional[Iterable[int]], n: int) -> IndexSet:
    K = canonical_set(range(n) if set_K is None else set_K, n)
    if not K:
        raise InputError("capacity needs a nonempty set")
    return K


def _embed(n: int, idx: IndexSet, res: LpResult) -> np.ndarray:
    mu = np.zeros(n)
    mu[list(idx)] = res.x
    return mu


def capacity0(kernel: Any, set_K: Optional[Iterable[int]] = None) -> CapacityValue:
    """Everywhere-constrained capacity: Σ_{y∈K} G(y, x) μ_y <= 1 for every x."""
    k = as_kernel(kernel)
    K = _nonempty(set_K, k.n)
    A = k.matrix[list(K), :].T
    res = maximize(np.ones(len(K)), A, np.ones(k.n))
    return CapacityValue(K, res.value, _embed(k.n, K, res), res.dual_gap)


def _support_lp(matrix: np.ndarray, n: int, S: IndexSet) -> CapacityValue:
    s = list(S)
    res = maximize(np.ones(len(s)), matrix[np.ix_(s, s)].T, np.ones(len(s)))
    return CapacityValue(S, res.value, _embed(n, S, res), res.dual_gap)


def wiener_capacity(
    kernel: Any,
    set_K: Optional[Iterable[int]] = None,
    mode: str = "exact",
    subset_limit: Optional[int] = None,
    workers: Optional[int] = None,
) -> CapacityResult:
    k = as_kernel(kernel)
    K = _nonempty(set_K, k.n)
    subset_limit = DEFAULTS["subset_limit"] if subset_limit is None else int(subset_limit)
    workers = DEFAULTS["workers"] if workers is None else max(1, int(workers))
    b = 2.0 * k.kappa_eff if k.symmetric else None
    base = capacity0(k, K)

    if mode == "bracket":
        if b is None:
            raise NotSymmetric("bracket mode needs a symmetric kernel (b = 2 kappa)")
        return CapacityResult(K, mode, base.value, None, (base.value, b * base.value), base.equilibrium, b)
    if mode != "exact":
        raise InputError(f"unknown capacity mode {mode!r}")
    if len(K) > subset_limit:
        raise SubsetLimitExceeded(
            f"|K| = {len(K)} exceeds subset_limit {subset_limit}; use mode = bracket"
        )

    supports: List[IndexSet] = [
        S for size in range(1, len(K) + 1) for S in itertools.combinations(K, size)
    ]
    if workers > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
            values = list(pool.map(lambda S: _support_lp(k.matrix, k.n, S), supports))
    else:
        values = [_support_lp(k.matrix, k.n, S) for S in supports]
    best = max(values, key=lambda v: v.value)
    log.info("capacity: |K|=%d cap0=%.12g cap=%.12g supports=%d", len(K), base.value, best.value, len(values))
    return CapacityResult(
        K, mode, base.value, best.value, (base.value, best.value), best.equilibrium, b, subsets=len(values),
    )
