"""capacity: cap₀ and Wiener capacity with the sandwich check."""

from __future__ import annotations

from typing import List

from quasipot.capacity import wiener_capacity
from quasipot.commands.registry import CommandContext, CommandEntry, CommandOutcome
from quasipot.errors import EXIT_BOUND_FAIL, EXIT_OK


def _capacity(ctx: CommandContext) -> CommandOutcome:
    sc = ctx.scenario
    kernel = sc.build_kernel()
    result = wiener_capacity(
        kernel,
        sc.get_ints("capacity", "set"),
        mode=sc.get("capacity", "mode", "exact"),
        subset_limit=sc.run_value("subset_limit"),
        workers=ctx.workers,
    )
    ctx.write_report("capacity.json", "capacity", result.to_dict())
    cap = "n/a" if result.cap is None else f"{result.cap:.12g}"
    summary = f"cap0={result.cap0:.12g} cap={cap} bracket=[{result.bracket[0]:.12g}, {result.bracket[1]:.12g}]"
    return CommandOutcome(EXIT_OK if result.sandwich_ok else EXIT_BOUND_FAIL, summary, list(ctx.written))


def get_commands() -> List[CommandEntry]:
    return [CommandEntry("capacity", _capacity, "cap0 and Wiener capacity of a set.")]
