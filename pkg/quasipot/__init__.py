"""
Quasipot — sublinear equations u = 𝐆(u^q σ) + f on finite quasi-metric spaces.

Modules: space, kernels, potentials, solver, capacity (library);
config, formats, lp, errors, utils (support); cli and commands/ (front door).
"""

import pathlib as _pathlib

__all__ = [
    "space", "kernels", "potentials", "solver", "capacity",
    "config", "formats", "lp", "errors", "utils", "cli",
]


def _read_version() -> str:
    try:
        return (_pathlib.Path(__file__).resolve().parent.parent / "VERSION").read_text(encoding="utf-8").strip()
    except OSError:
        try:
            from importlib.metadata import version
            return version("quasipot")
        except Exception:
            return "0.0.0"


__version__ = _read_version()
