"""potentials: 𝐆σ, 𝐊σ, 𝐆μ and h per point, κ certificates, radial plot data."""

from __future__ import annotations

from typing import Any, Dict, List

from quasipot.commands.registry import CommandContext, CommandEntry, CommandOutcome
from quasipot.errors import EXIT_OK, InputError
from quasipot.formats import profile_csv, radial_plot_csv
from quasipot.potentials import KappaCache, modified_intrinsic_potential
from quasipot.solver import profile_for


def _potentials(ctx: CommandContext) -> CommandOutcome:
    sc = ctx.scenario
    problem = sc.build_problem()
    cache = KappaCache(problem.kernel, problem.sigma, problem.q)
    profile = profile_for(problem, cache, ctx.workers)
    ctx.write_text("profile.csv", profile_csv(profile))

    payload: Dict[str, Any] = {
        "q": problem.q,
        "g_sigma": profile.g_sigma,
        "k_sigma": profile.k_sigma,
        "g_mu": profile.g_mu,
        "h": profile.h,
        "certificates": [cert.to_dict() for cert in cache.certificates()],
    }
    if problem.modifier is not None:
        payload["k_sigma_modified"] = modified_intrinsic_potential(
            problem.kernel, problem.modifier, problem.sigma, problem.q, workers=ctx.workers,
        )
    if ctx.emit_plot_data:
        centers = sc.get_ints("potentials", "centers")
        for x in range(problem.n) if centers is None else centers:
            if not 0 <= x < problem.n:
                raise InputError(f"[potentials] center {x} out of range")
            ctx.write_text(f"radial_{x}.csv", radial_plot_csv(problem.kernel, cache, x))
    ctx.write_report("potentials.json", "potentials", payload)
    return CommandOutcome(EXIT_OK, f"potentials for {problem.n} points, {len(cache)} distinct balls", list(ctx.written))


def get_commands() -> List[CommandEntry]:
    return [CommandEntry("potentials", _potentials, "Linear and intrinsic potentials with kappa certificates.")]
