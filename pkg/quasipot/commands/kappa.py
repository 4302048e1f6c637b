"""kappa: embedding-constant certificates and Lorentz diagnostics."""

from __future__ import annotations

from typing import Any, Dict, List, Tuple

from quasipot.commands.registry import CommandContext, CommandEntry, CommandOutcome
from quasipot.errors import EXIT_OK
from quasipot.potentials import KappaCache, lorentz_diagnostic


def _kappa(ctx: CommandContext) -> CommandOutcome:
    sc = ctx.scenario
    problem = sc.build_problem()
    cache = KappaCache(problem.kernel, problem.sigma, problem.q)

    requested: List[Tuple[int, ...]] = [tuple(range(problem.n))] + sc.get_sets("kappa", "sets")
    centers = sc.get_ints("kappa", "centers") or []
    balls = {x: problem.kernel.decomposition(x).ball_sets for x in centers}
    cache.solve_all(requested + [b for sets in balls.values() for b in sets], ctx.workers)

    payload: Dict[str, Any] = {
        "q": problem.q,
        "sets": [cache.certificate(s).to_dict() for s in requested],
        "lorentz": [lorentz_diagnostic(problem.kernel, problem.sigma, problem.q, s, cache).to_dict() for s in requested],
        "balls": {
            str(x): [
                {"radius": r, **cache.certificate(s).to_dict()}
                for r, s in zip(problem.kernel.decomposition(x).radii, sets)
            ]
            for x, sets in balls.items()
        },
    }
    ctx.write_report("kappa.json", "kappa", payload)
    omega = cache.certificate(requested[0])
    return CommandOutcome(EXIT_OK, f"kappa(Omega)={omega.value:.12g} gap={omega.gap:.3g}", list(ctx.written))


def get_commands() -> List[CommandEntry]:
    return [CommandEntry("kappa", _kappa, "Embedding constants for Omega, listed sets and balls.")]
