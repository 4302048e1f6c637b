"""
Quasipot — Dense simplex for small linear programs.

    maximize c·x  subject to  A x <= b,  x >= 0,  with b >= 0.

Since b >= 0 the slack basis is feasible, so no phase 1 is needed. Pivots
follow Bland's rule (smallest entering index with negative reduced cost,
ratio ties broken by smallest basic variable), which cannot cycle.
Duals are read off the slack columns of the objective row.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Any, Optional

import numpy as np

from quasipot.errors import InputError, LpNumericalFailure, LpUnbounded

log = logging.getLogger(__name__)

PIVOT_TOL = 1e-12
FEAS_TOL = 1e-9


@dataclass(frozen=True)
class LpResult:
    x: np.ndarray
    value: float
    duals: np.ndarray
    dual_gap: float
    pivots: int


def _scaled_feasible(A: np.ndarray, b: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Shrink a nonnegative x until A x <= b holds."""
    x = np.clip(x, 0.0, None)
    ax = A @ x
    over = ax > b
    if not np.any(over):
        return x
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.min(np.where(over, b / ax, 1.0))
    return x * max(0.0, float(scale))


def maximize(c: Any, A: Any, b: Any, max_pivots: Optional[int] = None) -> LpResult:
    c = np.asarray(c, dtype=float)
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float)
    m, n = A.shape
    if c.shape != (n,) or b.shape != (m,):
        raise InputError(f"LP shape mismatch: A {A.shape}, b {b.shape}, c {c.shape}")
    if np.any(b < 0):
        raise InputError("LP right-hand side must be nonnegative")
    if max_pivots is None:
        max_pivots = 50 * (m + n) + 1000

    # rows 0..m-1: constraints, row m: objective (-c); last column: rhs
    T = np.zeros((m + 1, n + m + 1))
    T[:m, :n] = A
    T[:m, n:n + m] = np.eye(m)
    T[:m, -1] = b
    T[m, :n] = -c
    basis = list(range(n, n + m))

    pivots = 0
    while True:
        reduced = T[m, :-1]
        candidates = np.flatnonzero(reduced < -PIVOT_TOL)
        if candidates.size == 0:
            break
        if pivots >= max_pivots:
            x = np.zeros(n + m)
            x[basis] = T[:m, -1]
            best = _scaled_feasible(A, b, x[:n])
            raise LpNumericalFailure(
                f"simplex did not terminate within {max_pivots} pivots",
                result=LpResult(best, float(c @ best), np.zeros(m), float("nan"), pivots),
            )
        enter = int(candidates[0])
        col = T[:m, enter]
        rows = np.flatnonzero(col > PIVOT_TOL)
        if rows.size == 0:
            raise LpUnbounded(f"LP unbounded along column {enter}")
        ratios = T[rows, -1] / col[rows]
        best_ratio = ratios.min()
        tied = rows[ratios <= best_ratio + PIVOT_TOL * max(1.0, abs(best_ratio))]
        leave = int(min(tied, key=lambda r: basis[r]))

        T[leave] /= T[leave, enter]
        for r in range(m + 1):
            if r != leave and T[r, enter] != 0.0:
                T[r] -= T[r, enter] * T[leave]
        basis[leave] = enter
        pivots += 1

    full = np.zeros(n + m)
    full[basis] = T[:m, -1]
    x = np.clip(full[:n], 0.0, None)
    duals = np.clip(T[m, n:n + m].copy(), 0.0, None)
    value = math.fsum((c * x).tolist())
    dual_gap = math.fsum((b * duals).tolist()) - value

    violation = float(np.max(A @ x - b)) if m else 0.0
    if violation > FEAS_TOL * max(1.0, float(np.max(b)) if m else 1.0) or not math.isfinite(value):
        best = _scaled_feasible(A, b, x)
        raise LpNumericalFailure(
            f"simplex optimum violates constraints by {violation:.3g}",
            result=LpResult(best, float(c @ best), duals, dual_gap, pivots),
        )
    log.debug("lp solved: m=%d n=%d pivots=%d value=%.12g", m, n, pivots, value)
    return LpResult(x=x, value=value, duals=duals, dual_gap=dual_gap, pivots=pivots)
