"""
Quasipot — Shared utilities.

Single source for helper functions used across all modules.
Does not import anything from quasipot.* (zero dependency level).
"""

from __future__ import annotations

import csv
import enum
import hashlib
import io
import json
import math
import os
import pathlib
import re
import uuid
from typing import Any, Iterable, List, Sequence

import numpy as np


# ---------------------------------------------------------------------------
# Hashing
# ---------------------------------------------------------------------------

def sha256_arrays(*arrays: Any) -> str:
    """Fingerprint of numeric arrays (shape + float64 bytes)."""
    h = hashlib.sha256()
    for a in arrays:
        arr = np.ascontiguousarray(np.asarray(a, dtype=float))
        h.update(repr(arr.shape).encode("utf-8"))
        h.update(arr.tobytes())
    return h.hexdigest()


# ---------------------------------------------------------------------------
# File I/O
# ---------------------------------------------------------------------------

def read_text(path: pathlib.Path) -> str:
    return path.read_text(encoding="utf-8")


def write_text(path: pathlib.Path, content: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(content, encoding="utf-8")


def atomic_write_text(path: pathlib.Path, content: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(f".{path.name}.tmp.{uuid.uuid4().hex}")
    fd = os.open(str(tmp), os.O_WRONLY | os.O_CREAT | os.O_TRUNC, 0o644)
    try:
        os.write(fd, content.encode("utf-8"))
        os.fsync(fd)
    finally:
        os.close(fd)
    os.replace(str(tmp), str(path))


# ---------------------------------------------------------------------------
# Path safety
# ---------------------------------------------------------------------------

def safe_relpath(p: str) -> str:
    p = p.replace("\\", "/").lstrip("/")
    if ".." in pathlib.PurePosixPath(p).parts:
        raise ValueError("Path traversal is not allowed.")
    return p


# ---------------------------------------------------------------------------
# Deterministic text formats
# ---------------------------------------------------------------------------

def format_float(x: float) -> str:
    """Shortest round-trip repr; non-finite values spelled out."""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(x)


def to_jsonable(obj: Any) -> Any:
    """Convert numpy/tuple/set payloads into plain JSON values.

    Non-finite floats become the strings "nan", "inf", "-inf" so that the
    output stays strict JSON.
    """
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (frozenset, set)):
        return [to_jsonable(v) for v in sorted(obj)]
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else format_float(x)
    if isinstance(obj, enum.Enum):
        return to_jsonable(obj.value)
    return obj


def dumps_json(obj: Any) -> str:
    return json.dumps(to_jsonable(obj), ensure_ascii=False, indent=2, sort_keys=True) + "\n"


def csv_text(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(list(header))
    for row in rows:
        writer.writerow([format_float(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# Parsing helpers
# ---------------------------------------------------------------------------

_SPLIT_RE = re.compile(r"[,\s]+")


def parse_float_list(text: str) -> List[float]:
    """'1, 2 3' -> [1.0, 2.0, 3.0]. Raises ValueError on junk."""
    parts = [p for p in _SPLIT_RE.split(str(text).strip()) if p]
    return [float(p) for p in parts]


def parse_int_list(text: str) -> List[int]:
    parts = [p for p in _SPLIT_RE.split(str(text).strip()) if p]
    return [int(p) for p in parts]


def parse_rows(text: str) -> List[List[float]]:
    """Rows separated by ';' or newlines, entries by commas/whitespace."""
    rows = [r for r in re.split(r"[;\n]+", str(text)) if r.strip()]
    return [parse_float_list(r) for r in rows]
