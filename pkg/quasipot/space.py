"""
Quasipot — Finite measure spaces.

Points, nonnegative measures (atoms at points) and the nested-ball
decomposition of a kernel row. On a finite space every radial integral
over balls B(x, r) = {y : G(x, y) > 1/r} is a finite step sum over the
distinct values of the row G(x, .).

Contract: build_space(), ball(), ball_decomposition().
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Any, FrozenSet, Iterable, Optional, Sequence, Tuple, Union

import numpy as np

from quasipot.errors import InputError, LengthMismatch, NonFiniteEntry, ZeroSigma

log = logging.getLogger(__name__)

IndexSet = Tuple[int, ...]


def _frozen_vector(values: Any, name: str) -> np.ndarray:
    try:
        arr = np.array(values, dtype=float)
    except (TypeError, ValueError) as e:
        raise InputError(f"{name}: not numeric ({e})") from e
    if arr.ndim != 1:
        raise LengthMismatch(f"{name}: expected a vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteEntry(f"{name}: entries must be finite")
    arr.setflags(write=False)
    return arr


def canonical_set(indices: Iterable[int], n: Optional[int] = None) -> IndexSet:
    """Sorted tuple of distinct indices; validated against n when given."""
    out = tuple(sorted({int(i) for i in indices}))
    if n is not None and out and (out[0] < 0 or out[-1] >= n):
        raise InputError(f"index out of range 0..{n - 1}: {out}")
    return out


# ---------------------------------------------------------------------------
# Measures
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Measure:
    """Nonnegative weights over point indices."""

    weights: np.ndarray

    def __post_init__(self) -> None:
        w = _frozen_vector(self.weights, "measure")
        if np.any(w < 0):
            raise InputError("measure weights must be nonnegative")
        object.__setattr__(self, "weights", w)

    @classmethod
    def zeros(cls, n: int) -> "Measure":
        return cls(np.zeros(int(n)))

    @classmethod
    def point_mass(cls, n: int, y: int, mass: float = 1.0) -> "Measure":
        w = np.zeros(int(n))
        w[int(y)] = float(mass)
        return cls(w)

    @property
    def n(self) -> int:
        return int(self.weights.shape[0])

    @property
    def total(self) -> float:
        return math.fsum(self.weights.tolist())

    @property
    def is_zero(self) -> bool:
        return not bool(np.any(self.weights > 0))

    def mass(self, index_set: Iterable[int]) -> float:
        idx = list(index_set)
        if not idx:
            return 0.0
        return math.fsum(self.weights[idx].tolist())

    def support(self) -> IndexSet:
        return tuple(int(i) for i in np.flatnonzero(self.weights > 0))

    def restrict(self, index_set: Iterable[int]) -> "Measure":
        w = np.zeros(self.n)
        idx = list(index_set)
        w[idx] = self.weights[idx]
        return Measure(w)

    def scaled(self, t: float) -> "Measure":
        return Measure(self.weights * float(t))

    def __repr__(self) -> str:
        return f"Measure(n={self.n}, total={self.total!r})"


def as_weights(measure: Union[Measure, Sequence[float], np.ndarray], n: Optional[int] = None) -> np.ndarray:
    w = measure.weights if isinstance(measure, Measure) else Measure(measure).weights
    if n is not None and w.shape[0] != n:
        raise LengthMismatch(f"measure has {w.shape[0]} weights, space has {n} points")
    return w


# ---------------------------------------------------------------------------
# Spaces
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Space:
    n_points: int
    sigma: Measure
    mu: Measure
    f: Optional[np.ndarray] = None
    coords: Optional[np.ndarray] = None
    labels: Optional[Tuple[str, ...]] = None

    def label(self, i: int) -> str:
        return self.labels[i] if self.labels else str(i)

    @property
    def dimension(self) -> Optional[int]:
        return None if self.coords is None else int(self.coords.shape[1])


def _coords_array(coords: Any) -> np.ndarray:
    try:
        arr = np.array(coords, dtype=float)
    except (TypeError, ValueError) as e:
        raise InputError(f"coords: not numeric ({e})") from e
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2 or arr.shape[0] == 0 or arr.shape[1] == 0:
        raise LengthMismatch(f"coords: expected N x d with d >= 1, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteEntry("coords must be finite")
    arr.setflags(write=False)
    return arr


def build_space(
    coords_or_size: Any,
    sigma_weights: Any,
    mu_weights: Any = None,
    f_values: Any = None,
    labels: Optional[Sequence[str]] = None,
) -> Space:
    """Immutable space with σ (required, nonzero), μ (default 0) and optional data f."""
    if isinstance(coords_or_size, (int, np.integer)):
        n = int(coords_or_size)
        coords = None
    else:
        coords = _coords_array(coords_or_size)
        n = int(coords.shape[0])
    if n < 1:
        raise InputError("a space needs at least one point")

    sigma = Measure(sigma_weights)
    if sigma.n != n:
        raise LengthMismatch(f"sigma has {sigma.n} weights, space has {n} points")
    if sigma.total <= 0:
        raise ZeroSigma("sigma must have positive total mass")

    mu = Measure.zeros(n) if mu_weights is None else Measure(mu_weights)
    if mu.n != n:
        raise LengthMismatch(f"mu has {mu.n} weights, space has {n} points")

    f = None
    if f_values is not None:
        f = _frozen_vector(f_values, "f")
        if f.shape[0] != n:
            raise LengthMismatch(f"f has {f.shape[0]} values, space has {n} points")
        if np.any(f < 0):
            raise InputError("f must be nonnegative")

    lab = None
    if labels is not None:
        lab = tuple(str(s) for s in labels)
        if len(lab) != n:
            raise LengthMismatch(f"{len(lab)} labels for {n} points")

    log.debug("space built: n=%d sigma=%.6g mu=%.6g", n, sigma.total, mu.total)
    return Space(n_points=n, sigma=sigma, mu=mu, f=f, coords=coords, labels=lab)


# ---------------------------------------------------------------------------
# Balls
# ---------------------------------------------------------------------------

def _row(kernel: Any, x: int) -> np.ndarray:
    matrix = np.asarray(getattr(kernel, "matrix", kernel), dtype=float)
    n = matrix.shape[0]
    if not 0 <= int(x) < n:
        raise InputError(f"point index {x} out of range 0..{n - 1}")
    return matrix[int(x)]


def ball(kernel: Any, x: int, r: float) -> FrozenSet[int]:
    """B(x, r) = {y : G(x, y) > 1/r}."""
    if not r > 0:
        raise InputError(f"ball radius must be positive, got {r}")
    row = _row(kernel, x)
    return frozenset(int(i) for i in np.flatnonzero(row > 1.0 / r))


@dataclass(frozen=True, eq=False)
class BallDecomposition:
    """Distinct row levels g_1 > ... > g_m and the nested balls B_j = {G(x,.) >= g_j}.

    B(x, r) equals B_j for r in (1/g_j, 1/g_{j+1}] and is empty for r <= 1/g_1.
    """

    center: int
    levels: Tuple[float, ...]
    ball_sets: Tuple[IndexSet, ...]

    @property
    def widths(self) -> np.ndarray:
        g = np.asarray(self.levels, dtype=float)
        return g - np.append(g[1:], 0.0)

    @property
    def radii(self) -> Tuple[float, ...]:
        return tuple(1.0 / g for g in self.levels)

    def ball_at(self, r: float) -> FrozenSet[int]:
        if not r > 0:
            raise InputError(f"ball radius must be positive, got {r}")
        k = sum(1 for g in self.levels if g > 1.0 / r)
        return frozenset(self.ball_sets[k - 1]) if k else frozenset()

    def masses(self, measure: Union[Measure, np.ndarray]) -> np.ndarray:
        w = as_weights(measure)
        return np.array([math.fsum(w[list(s)].tolist()) for s in self.ball_sets])

    def step_sum(self, values: Any) -> float:
        """Σ_j values_j (g_j − g_{j+1}), the radial integral ∫ F(B(x,r)) / r² dr."""
        v = np.asarray(values, dtype=float)
        return math.fsum((v * self.widths).tolist())

    def tail_sum(self, values: Any, a: float) -> float:
        """∫_a^∞ F(B(x,r)) / r² dr for the step function F(B_j) = values_j."""
        if not a > 0:
            raise InputError(f"tail radius must be positive, got {a}")
        v = np.asarray(values, dtype=float)
        cap = 1.0 / a
        g = np.minimum(np.asarray(self.levels, dtype=float), cap)
        widths = g - np.append(g[1:], 0.0)
        return math.fsum((v * widths).tolist())


def ball_decomposition(kernel: Any, x: int) -> BallDecomposition:
    row = _row(kernel, x)
    levels = np.unique(row)[::-1]
    sets = tuple(tuple(int(i) for i in np.flatnonzero(row >= g)) for g in levels)
    return BallDecomposition(
        center=int(x),
        levels=tuple(float(g) for g in levels),
        ball_sets=sets,
    )
