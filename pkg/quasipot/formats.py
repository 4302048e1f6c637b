"""
Quasipot — File formats.

Space CSV: header required; columns x1..xd (optional), sigma, mu
(optional), f (optional), label (optional). Kernel CSV: N rows of N
reals, no header, with an optional `<name>.meta` sidecar of key=value
lines (provenance, alpha, n, diagonal_rule).
"""

from __future__ import annotations

import csv
import io
import logging
import pathlib
import re
from typing import Any, Dict, List, Optional

import numpy as np

from quasipot.errors import ConfigError, InputError
from quasipot.kernels import Kernel, Provenance
from quasipot.potentials import KappaCache, PotentialProfile
from quasipot.space import Space, build_space
from quasipot.utils import csv_text, format_float, read_text, write_text

log = logging.getLogger(__name__)

_COORD_RE = re.compile(r"^x(\d+)$")


# ---------------------------------------------------------------------------
# Ingestion
# ---------------------------------------------------------------------------

def _float_cell(row: Dict[str, str], key: str, line: int) -> float:
    try:
        return float(row[key])
    except (TypeError, ValueError) as e:
        raise ConfigError(f"line {line}: column {key!r} is not a number: {row.get(key)!r}") from e


def load_space_csv(path: pathlib.Path) -> Space:
    text = read_text(path)
    reader = csv.DictReader(io.StringIO(text))
    header = [h.strip() for h in (reader.fieldnames or [])]
    if "sigma" not in header:
        raise ConfigError(f"{path}: space CSV needs a 'sigma' column")
    reader.fieldnames = header
    coord_cols = sorted((c for c in header if _COORD_RE.match(c)), key=lambda c: int(c[1:]))

    coords: List[List[float]] = []
    sigma: List[float] = []
    mu: List[float] = []
    f: List[float] = []
    labels: List[str] = []
    for line, row in enumerate(reader, start=2):
        if coord_cols:
            coords.append([_float_cell(row, c, line) for c in coord_cols])
        sigma.append(_float_cell(row, "sigma", line))
        if "mu" in header:
            mu.append(_float_cell(row, "mu", line))
        if "f" in header:
            f.append(_float_cell(row, "f", line))
        if "label" in header:
            labels.append(str(row["label"]).strip())
    if not sigma:
        raise ConfigError(f"{path}: space CSV has no rows")
    log.info("loaded space: %s (%d points)", path, len(sigma))
    return build_space(
        coords if coord_cols else len(sigma),
        sigma,
        mu if mu else None,
        f if f else None,
        labels if labels else None,
    )


def _meta_path(path: pathlib.Path) -> pathlib.Path:
    return path.with_suffix(".meta")


def read_meta(path: pathlib.Path) -> Dict[str, str]:
    meta: Dict[str, str] = {}
    if not path.exists():
        return meta
    for raw in read_text(path).splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"{path}: expected key=value, got {raw!r}")
        meta[key.strip()] = value.strip()
    return meta


def load_kernel_csv(path: pathlib.Path) -> Kernel:
    rows: List[List[float]] = []
    for line, row in enumerate(csv.reader(io.StringIO(read_text(path))), start=1):
        if not any(cell.strip() for cell in row):
            continue
        try:
            rows.append([float(cell) for cell in row])
        except ValueError as e:
            raise ConfigError(f"{path}: line {line}: {e}") from e
    meta = read_meta(_meta_path(path))
    provenance = meta.pop("provenance", Provenance.EXPLICIT.value)
    try:
        prov = Provenance(provenance)
    except ValueError as e:
        raise ConfigError(f"{path}: unknown provenance {provenance!r}") from e
    log.info("loaded kernel: %s (%d rows)", path, len(rows))
    return Kernel(rows, prov, meta)


def save_kernel_csv(kernel: Kernel, path: pathlib.Path) -> None:
    write_text(path, csv_text_rows(kernel.matrix))
    meta = {"provenance": kernel.provenance.value, **{k: v for k, v in kernel.meta.items() if v is not None}}
    write_text(_meta_path(path), "".join(f"{k}={v}\n" for k, v in sorted(meta.items())))


def csv_text_rows(matrix: np.ndarray) -> str:
    return "".join(",".join(format_float(v) for v in row) + "\n" for row in np.asarray(matrix))


# ---------------------------------------------------------------------------
# Export
# ---------------------------------------------------------------------------

def profile_csv(profile: PotentialProfile) -> str:
    rows = [
        (i, float(profile.g_sigma[i]), float(profile.k_sigma[i]), float(profile.g_mu[i]), float(profile.h[i]))
        for i in range(profile.g_sigma.shape[0])
    ]
    return csv_text(["point", "g_sigma", "k_sigma", "g_mu", "h"], rows)


def solution_csv(u: np.ndarray, lower: Optional[np.ndarray], upper: Optional[np.ndarray],
                 lower_ratio: Optional[np.ndarray], upper_ratio: Optional[np.ndarray]) -> str:
    nan = float("nan")

    def cell(v: Optional[np.ndarray], i: int) -> float:
        return nan if v is None else float(v[i])

    rows = [
        (i, float(u[i]), cell(lower, i), cell(upper, i), cell(lower_ratio, i), cell(upper_ratio, i))
        for i in range(u.shape[0])
    ]
    return csv_text(["point", "u", "lower_bound", "upper_bound", "lower_ratio", "upper_ratio"], rows)


def radial_plot_csv(kernel: Kernel, cache: KappaCache, x: int) -> str:
    """Step data (r, σ(B(x,r)), κ(B(x,r))) at r = 0 and at each breakpoint 1/g_j; values hold to the right."""
    if not 0 <= int(x) < kernel.n:
        raise InputError(f"plot center {x} out of range 0..{kernel.n - 1}")
    dec = kernel.decomposition(x)
    masses = dec.masses(cache.sigma)
    rows: List[Any] = [(0.0, 0.0, 0.0)]
    for r, s, ball in zip(dec.radii, masses, dec.ball_sets):
        rows.append((float(r), float(s), float(cache.value(ball))))
    return csv_text(["r", "sigma_ball", "kappa_ball"], rows)
