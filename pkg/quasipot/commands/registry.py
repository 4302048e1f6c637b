"""
Quasipot — Command registry (SSOT).

Plugin architecture: each module in commands/ exports get_commands().
CommandRegistry collects all commands, provides available_commands() and execute().
"""

from __future__ import annotations

import logging
import pathlib
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Mapping

from quasipot.config import Scenario
from quasipot.errors import EXIT_CONFIG, EXIT_NUMERIC, QuasipotError
from quasipot.utils import atomic_write_text, dumps_json, safe_relpath

log = logging.getLogger(__name__)


@dataclass
class CommandContext:
    """Execution context: one scenario and one output directory per run."""

    scenario: Scenario
    out_dir: pathlib.Path
    emit_plot_data: bool = False
    version: str = ""
    written: List[pathlib.Path] = field(default_factory=list)

    def out_path(self, rel: str) -> pathlib.Path:
        return (self.out_dir / safe_relpath(rel)).resolve()

    def write_text(self, rel: str, content: str) -> pathlib.Path:
        path = self.out_path(rel)
        atomic_write_text(path, content)
        self.written.append(path)
        log.info("wrote %s (%d bytes)", path, len(content))
        return path

    def write_report(self, rel: str, command: str, payload: Mapping[str, Any]) -> pathlib.Path:
        """JSON report with the fully resolved scenario embedded (no timestamps)."""
        doc = {
            "command": command,
            "version": self.version,
            "scenario": self.scenario.resolved(),
            "result": dict(payload),
        }
        return self.write_text(rel, dumps_json(doc))

    @property
    def workers(self) -> int:
        return int(self.scenario.run_value("workers"))


@dataclass
class CommandOutcome:
    exit_code: int
    summary: str
    files: List[pathlib.Path] = field(default_factory=list)


@dataclass
class CommandEntry:
    """Single command descriptor: name, handler, description."""

    name: str
    handler: Callable[[CommandContext], CommandOutcome]
    description: str = ""


class CommandRegistry:
    """Quasipot command registry (SSOT).

    To add a command: create a module in quasipot/commands/,
    export get_commands() -> List[CommandEntry].
    """

    def __init__(self) -> None:
        self._entries: Dict[str, CommandEntry] = {}
        self._load_modules()

    def _load_modules(self) -> None:
        """Auto-discover command modules in quasipot/commands/ that export get_commands()."""
        import importlib
        import pkgutil
        import quasipot.commands as commands_pkg
        for _importer, modname, _ispkg in pkgutil.iter_modules(commands_pkg.__path__):
            if modname.startswith("_") or modname == "registry":
                continue
            try:
                mod = importlib.import_module(f"quasipot.commands.{modname}")
                if hasattr(mod, "get_commands"):
                    for entry in mod.get_commands():
                        self._entries[entry.name] = entry
            except Exception:
                log.warning("Failed to load command module %s", modname, exc_info=True)

    # --- Contract ---

    def available_commands(self) -> List[str]:
        return sorted(self._entries)

    def describe(self, name: str) -> str:
        entry = self._entries.get(name)
        return entry.description if entry is not None else ""

    def execute(self, name: str, ctx: CommandContext) -> CommandOutcome:
        entry = self._entries.get(name)
        if entry is None:
            return CommandOutcome(EXIT_CONFIG, f"unknown command: {name}. Available: {', '.join(self.available_commands())}")
        log.info("command %s: start", name)
        try:
            outcome = entry.handler(ctx)
        except QuasipotError as e:
            log.warning("command %s failed: %s", name, e)
            return CommandOutcome(e.exit_code, f"{type(e).__name__}: {e}", list(ctx.written))
        except Exception as e:
            log.error("command %s crashed", name, exc_info=True)
            return CommandOutcome(EXIT_NUMERIC, f"{type(e).__name__}: {e}", list(ctx.written))
        log.info("command %s: exit %d", name, outcome.exit_code)
        return outcome
