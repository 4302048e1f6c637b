"""solve: monotone iteration plus bilateral verification."""

from __future__ import annotations

import logging
from typing import List

from quasipot.commands.registry import CommandContext, CommandEntry, CommandOutcome
from quasipot.errors import EXIT_BOUND_FAIL, EXIT_NONEXISTENCE, EXIT_OK
from quasipot.formats import solution_csv
from quasipot.solver import Status, solve, solve_modified, verify_bilateral

log = logging.getLogger(__name__)


def _solve(ctx: CommandContext) -> CommandOutcome:
    sc = ctx.scenario
    problem = sc.build_problem()
    opts = dict(
        tol=sc.run_value("tol"),
        max_iter=sc.run_value("max_iter"),
        threshold=sc.run_value("divergence_threshold"),
        verify=False,
    )
    result = solve_modified(problem, **opts) if problem.modifier is not None else solve(problem, **opts)

    if result.status != Status.CONVERGED:
        ctx.write_report("solve.json", "solve", result.summary())
        return CommandOutcome(
            EXIT_NONEXISTENCE, f"status={result.status.value} after {result.iterations} iterations", list(ctx.written),
        )

    scale = float(sc.run_value("inject_u_scale"))
    u = result.u * scale
    if scale != 1.0:
        log.warning("solution scaled by inject_u_scale=%s before verification", scale)
    report = verify_bilateral(problem, u, constants=None, workers=ctx.workers)
    result.bilateral = report

    ctx.write_text(
        "solution.csv",
        solution_csv(u, report.lower_bound, report.upper_bound, report.lower_ratio, report.upper_ratio),
    )
    payload = result.summary()
    payload["u"] = u
    payload["inject_u_scale"] = scale
    ctx.write_report("solve.json", "solve", payload)

    lines: List[str] = [
        f"status={result.status.value} iterations={result.iterations} residual={result.residual:.3g}",
        f"kappa={report.constants.kappa:.12g} b={report.constants.b:.12g} "
        f"c={report.constants.c:.12g} C={report.constants.C:.12g}",
    ]
    if report.passed:
        lines.append("bilateral estimates: PASS")
        return CommandOutcome(EXIT_OK, "\n".join(lines), list(ctx.written))
    point, ratio = report.worst_upper if not report.upper_ok else report.worst_lower
    lines.append(f"bilateral estimates: FAIL at point {point} (ratio {ratio:.6g})")
    return CommandOutcome(EXIT_BOUND_FAIL, "\n".join(lines), list(ctx.written))


def get_commands() -> List[CommandEntry]:
    return [CommandEntry("solve", _solve, "Solve u = G(u^q sigma) + f and verify the bilateral estimates.")]
