"""check-existence: finiteness criteria, tails and the modified criterion."""

from __future__ import annotations

from typing import List

from quasipot.commands.registry import CommandContext, CommandEntry, CommandOutcome
from quasipot.errors import EXIT_NONEXISTENCE, EXIT_OK
from quasipot.solver import existence_check


def _existence(ctx: CommandContext) -> CommandOutcome:
    sc = ctx.scenario
    problem = sc.build_problem()
    report = existence_check(
        problem,
        x0=sc.get_int("existence", "x0", 0),
        a=sc.get_float("existence", "a", sc.run_value("tail_radius")),
        threshold=sc.run_value("divergence_threshold"),
    )
    ctx.write_report("existence.json", "check-existence", report.to_dict())
    integral = "n/a" if report.modifier_integral is None else f"{report.modifier_integral:.12g}"
    summary = (
        f"exists={report.exists} kappa~(Omega)={report.kappa_modified:.12g} integral(m dmu)={integral}"
    )
    return CommandOutcome(EXIT_OK if report.exists else EXIT_NONEXISTENCE, summary, list(ctx.written))


def get_commands() -> List[CommandEntry]:
    return [CommandEntry("check-existence", _existence, "Existence criteria for the scenario's problem.")]
