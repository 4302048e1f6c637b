"""
Quasipot — Configuration.

One defaults table for every numeric knob, environment overrides
(QUASIPOT_<KEY>), and scenario files (INI sections or the scenario block
embedded in a JSON report).
Contract: DEFAULTS, get_cfg(), load_scenario(), Scenario.build_*().
"""

from __future__ import annotations

import configparser
import json
import logging
import os
import pathlib
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Optional, Tuple

from quasipot.errors import ConfigError
from quasipot.utils import format_float, parse_float_list, parse_int_list, parse_rows, read_text

log = logging.getLogger(__name__)

ENV_PREFIX = "QUASIPOT_"


# ---------------------------------------------------------------------------
# Defaults table
# ---------------------------------------------------------------------------

# name -> (default, minimum)
_DEFAULT_TABLE: Dict[str, Tuple[Any, Any]] = {
    "tol": (1e-12, 1e-16),
    "max_iter": (100000, 1),
    "gap_tol": (1e-9, 0.0),
    "gap_rel_tol": (1e-8, 0.0),
    "fw_max_iter": (50000, 1),
    "line_search_steps": (30, 1),
    "subset_limit": (16, 1),
    "exact_limit": (12, 1),
    "wmp_budget": (4096, 1),
    "divergence_threshold": (1e100, 1.0),
    "workers": (1, 1),
    "seed": (0, 0),
    "tail_radius": (1.0, 1e-300),
}


def get_cfg(name: str, default: Optional[str] = None) -> Optional[str]:
    v = os.environ.get(ENV_PREFIX + name.upper())
    if v is not None and str(v).strip() != "":
        return v
    return default


def _parse_int_cfg(raw: Optional[str], default: int, minimum: int = 0) -> int:
    try:
        val = int(str(raw))
    except Exception:
        val = default
    return max(minimum, val)


def _parse_float_cfg(raw: Optional[str], default: float, minimum: float = 0.0) -> float:
    try:
        val = float(str(raw))
    except Exception:
        val = default
    if val != val:  # nan
        val = default
    return max(minimum, val)


def load_defaults(env: Optional[Mapping[str, str]] = None) -> Dict[str, Any]:
    """Resolve the defaults table against QUASIPOT_* environment variables."""
    env = os.environ if env is None else env
    out: Dict[str, Any] = {}
    for name, (default, minimum) in _DEFAULT_TABLE.items():
        raw = env.get(ENV_PREFIX + name.upper())
        if raw is None or str(raw).strip() == "":
            out[name] = default
        elif isinstance(default, int):
            out[name] = _parse_int_cfg(raw, default, minimum)
        else:
            out[name] = _parse_float_cfg(raw, default, minimum)
        if raw is not None and out[name] != default:
            log.info("config override %s=%s from environment", name, out[name])
    return out


DEFAULTS: Dict[str, Any] = load_defaults()


# ---------------------------------------------------------------------------
# Scenarios
# ---------------------------------------------------------------------------

SECTIONS = ("space", "kernel", "problem", "kappa", "potentials", "capacity", "verify", "existence", "run")
PATH_KEYS = {("space", "csv"), ("kernel", "path")}
RUN_EXTRAS = {"inject_u_scale": 1.0}


@dataclass
class Scenario:
    """Parsed scenario: string values per section, resolved lazily."""

    sections: Dict[str, Dict[str, str]]
    base_dir: pathlib.Path
    source: Optional[pathlib.Path] = None
    _cache: Dict[str, Any] = field(default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        unknown = sorted(set(self.sections) - set(SECTIONS))
        if unknown:
            raise ConfigError(f"unknown scenario sections: {', '.join(unknown)}")

    # --- Typed access ---

    def get(self, section: str, key: str, default: Optional[str] = None) -> Optional[str]:
        raw = self.sections.get(section, {}).get(key)
        if raw is None or str(raw).strip() == "":
            return default
        return str(raw).strip()

    def has(self, section: str, key: str) -> bool:
        return self.get(section, key) is not None

    def _convert(self, section: str, key: str, fn: Any, default: Any) -> Any:
        raw = self.get(section, key)
        if raw is None:
            return default
        try:
            return fn(raw)
        except (TypeError, ValueError) as e:
            raise ConfigError(f"[{section}] {key} = {raw!r}: {e}") from e

    def get_float(self, section: str, key: str, default: Optional[float] = None) -> Optional[float]:
        return self._convert(section, key, float, default)

    def get_int(self, section: str, key: str, default: Optional[int] = None) -> Optional[int]:
        return self._convert(section, key, int, default)

    def get_bool(self, section: str, key: str, default: bool = False) -> bool:
        def parse(raw: str) -> bool:
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError("expected a boolean")
        return self._convert(section, key, parse, default)

    def get_floats(self, section: str, key: str) -> Optional[List[float]]:
        return self._convert(section, key, parse_float_list, None)

    def get_ints(self, section: str, key: str) -> Optional[List[int]]:
        return self._convert(section, key, parse_int_list, None)

    def get_rows(self, section: str, key: str) -> Optional[List[List[float]]]:
        return self._convert(section, key, parse_rows, None)

    def get_sets(self, section: str, key: str) -> List[Tuple[int, ...]]:
        """'0 1; 2' -> [(0, 1), (2,)]."""
        raw = self.get(section, key)
        if raw is None:
            return []
        try:
            return [tuple(parse_int_list(part)) for part in raw.replace("\n", ";").split(";") if part.strip()]
        except ValueError as e:
            raise ConfigError(f"[{section}] {key} = {raw!r}: {e}") from e

    def path(self, section: str, key: str) -> Optional[pathlib.Path]:
        raw = self.get(section, key)
        if raw is None:
            return None
        p = pathlib.Path(raw)
        return p if p.is_absolute() else (self.base_dir / p).resolve()

    def run_value(self, name: str) -> Any:
        """[run] override of a defaults-table entry (or a run-only extra)."""
        base = RUN_EXTRAS[name] if name in RUN_EXTRAS else DEFAULTS[name]
        conv = int if isinstance(base, int) and not isinstance(base, bool) else float
        value = self._convert("run", name, conv, base)
        if name in _DEFAULT_TABLE and value < _DEFAULT_TABLE[name][1]:
            raise ConfigError(f"[run] {name} = {value} is below the minimum {_DEFAULT_TABLE[name][1]}")
        return value

    def resolved(self) -> Dict[str, Dict[str, str]]:
        """All sections with defaults merged into [run] and paths made absolute."""
        out: Dict[str, Dict[str, str]] = {}
        for section in SECTIONS:
            values = {k: str(v).strip() for k, v in self.sections.get(section, {}).items() if str(v).strip() != ""}
            for key in list(values):
                if (section, key) in PATH_KEYS:
                    values[key] = str(self.path(section, key))
            if section == "run":
                for name in list(_DEFAULT_TABLE) + list(RUN_EXTRAS):
                    v = self.run_value(name)
                    values[name] = format_float(v) if isinstance(v, float) else str(v)
            if values:
                out[section] = dict(sorted(values.items()))
        return out

    # --- Builders ---

    def build_space(self) -> Any:
        if "space" in self._cache:
            return self._cache["space"]
        from quasipot.formats import load_space_csv
        from quasipot.space import build_space

        csv_path = self.path("space", "csv")
        if csv_path is not None:
            space = load_space_csv(csv_path)
        else:
            sigma = self.get_floats("space", "sigma")
            if sigma is None:
                raise ConfigError("[space] needs sigma (or csv)")
            coords = self.get_rows("space", "coords")
            size = self.get_int("space", "size", len(sigma))
            labels = self.get("space", "labels")
            space = build_space(
                coords if coords is not None else size,
                sigma,
                self.get_floats("space", "mu"),
                self.get_floats("space", "f"),
                [s.strip() for s in labels.split(",")] if labels else None,
            )
        self._cache["space"] = space
        return space

    def build_kernel(self) -> Any:
        if "kernel" in self._cache:
            return self._cache["kernel"]
        from quasipot.formats import load_kernel_csv
        from quasipot.kernels import green_ball_kernel, kernel_from_matrix, riesz_kernel

        kind = self.get("kernel", "type", "matrix")
        if kind == "matrix":
            rows = self.get_rows("kernel", "matrix")
            if rows is None:
                raise ConfigError("[kernel] type = matrix needs matrix = <rows separated by ';'>")
            kernel = kernel_from_matrix(rows)
        elif kind == "csv":
            path = self.path("kernel", "path")
            if path is None:
                raise ConfigError("[kernel] type = csv needs path")
            kernel = load_kernel_csv(path)
        elif kind in ("riesz", "green_ball"):
            space = self.build_space()
            if space.coords is None:
                raise ConfigError(f"[kernel] type = {kind} needs [space] coords")
            alpha = self.get_float("kernel", "alpha")
            n = self.get_int("kernel", "n", space.dimension)
            if alpha is None:
                raise ConfigError(f"[kernel] type = {kind} needs alpha")
            if kind == "riesz":
                kernel = riesz_kernel(
                    space.coords, alpha, n,
                    self.get("kernel", "diagonal_rule", "half_nearest"),
                    self.get_floats("kernel", "diagonal"),
                )
            else:
                kernel = green_ball_kernel(space.coords, alpha, n)
        else:
            raise ConfigError(f"[kernel] unknown type {kind!r}")
        self._cache["kernel"] = kernel
        return kernel

    def build_modifier(self) -> Any:
        from quasipot.kernels import Modifier, green_modifier

        kernel = self.build_kernel()
        pole = self.get_int("kernel", "pole")
        values = self.get_floats("kernel", "modifier")
        if pole is not None and values is not None:
            raise ConfigError("[kernel] give either pole or modifier, not both")
        if pole is not None:
            return green_modifier(kernel, pole)
        if values is not None:
            return Modifier(values)
        return None

    def build_problem(self) -> Any:
        from quasipot.solver import Problem

        space = self.build_space()
        kernel = self.build_kernel()
        if kernel.n != space.n_points:
            raise ConfigError(f"kernel has {kernel.n} points, space has {space.n_points}")
        q = self.get_float("problem", "q")
        if q is None:
            raise ConfigError("[problem] needs q")
        f = space.f
        if f is not None and not space.mu.is_zero:
            raise ConfigError("scenario gives both mu and f; pick one forcing")
        return Problem(
            kernel=kernel,
            sigma=space.sigma.weights,
            q=q,
            mu=None if f is not None else space.mu.weights,
            f=f,
            modifier=self.build_modifier(),
        )


def _sections_from_mapping(data: Mapping[str, Any]) -> Dict[str, Dict[str, str]]:
    out: Dict[str, Dict[str, str]] = {}
    for section, values in data.items():
        if not isinstance(values, Mapping):
            raise ConfigError(f"scenario section {section!r} must be a mapping")
        out[str(section)] = {str(k): str(v) for k, v in values.items()}
    return out


def scenario_from_dict(data: Mapping[str, Any], base_dir: Optional[pathlib.Path] = None) -> Scenario:
    return Scenario(_sections_from_mapping(data), base_dir or pathlib.Path.cwd())


def load_scenario(path: pathlib.Path) -> Scenario:
    """INI scenario, or a JSON report with an embedded 'scenario' block."""
    path = pathlib.Path(path)
    try:
        text = read_text(path)
    except OSError as e:
        raise ConfigError(f"cannot read scenario {path}: {e}") from e
    base_dir = path.resolve().parent
    if path.suffix.lower() == ".json":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: invalid JSON ({e})") from e
        block = data.get("scenario") if isinstance(data, dict) else None
        if not isinstance(block, dict):
            raise ConfigError(f"{path}: no 'scenario' block")
        sections = _sections_from_mapping(block)
    else:
        parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
        try:
            parser.read_string(text, source=str(path))
        except configparser.Error as e:
            raise ConfigError(f"{path}: {e}") from e
        sections = {s: dict(parser.items(s)) for s in parser.sections()}
    log.info("scenario loaded: %s (%s)", path, ", ".join(sorted(sections)))
    return Scenario(sections, base_dir, source=path)
