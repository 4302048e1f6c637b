"""verify: structural certificates of the scenario's kernel."""

from __future__ import annotations

import logging
from typing import Any, Dict, List

from quasipot.commands.registry import CommandContext, CommandEntry, CommandOutcome
from quasipot.errors import EXIT_BOUND_FAIL, EXIT_OK, BudgetExhausted, NotSymmetric
from quasipot.kernels import (
    Provenance, modifiability_certificate, ptolemy_check, riesz_kappa_bound, symmetrize, wmp_constant,
)

log = logging.getLogger(__name__)


def _wmp(ctx: CommandContext, kernel: Any) -> Dict[str, Any]:
    sc = ctx.scenario
    try:
        report = wmp_constant(
            kernel,
            mode=sc.get("verify", "wmp_mode", "auto"),
            budget=sc.get_int("verify", "wmp_budget"),
            exact_limit=sc.run_value("exact_limit"),
            seed=sc.run_value("seed"),
        )
    except BudgetExhausted as e:
        if e.report is not None:
            ctx.write_report("verify.json", "verify", {"wmp_partial": e.report.to_dict()})
        raise
    return report.to_dict()


def _verify(ctx: CommandContext) -> CommandOutcome:
    sc = ctx.scenario
    kernel = sc.build_kernel()
    if sc.get_bool("verify", "quasi_metric", False) and not kernel.symmetric:
        raise NotSymmetric("kernel declared quasi-metric but G(x, y) != G(y, x)")

    payload: Dict[str, Any] = {
        "n": kernel.n,
        "provenance": kernel.provenance.value,
        "symmetric": kernel.symmetric,
        "qs_constant": kernel.qs_constant,
    }
    checks: Dict[str, bool] = {}
    if kernel.symmetric:
        kappa, witness = kernel.kappa_witness
        payload["kappa"] = kappa
        payload["kappa_witness"] = list(witness)
        payload["wmp"] = _wmp(ctx, kernel)
        checks["wmp"] = payload["wmp"]["passed"]
        ptolemy = ptolemy_check(kernel)
        payload["ptolemy"] = ptolemy.to_dict()
        checks["ptolemy"] = ptolemy.passed
        poles = sc.get_ints("verify", "poles")
        certs = [modifiability_certificate(kernel, x0) for x0 in (range(kernel.n) if poles is None else poles)]
        payload["modifiability"] = [c.to_dict() for c in certs]
        checks["modifiability"] = all(c.passed for c in certs)
        if kernel.provenance == Provenance.RIESZ:
            bound = riesz_kappa_bound(kernel.meta["alpha"], kernel.meta["n"])
            payload["riesz_kappa_bound"] = bound
            checks["riesz_kappa_bound"] = kappa <= bound * (1.0 + 1e-12)
    else:
        sym = symmetrize(kernel)
        payload["symmetrized_kappa"] = sym.kappa
        payload["symmetrized_wmp_bound"] = 2.0 * sym.kappa_eff
        payload["wmp"] = _wmp(ctx, kernel)
    payload["checks"] = checks
    payload["passed"] = all(checks.values())
    ctx.write_report("verify.json", "verify", payload)

    summary = " ".join(f"{name}={'PASS' if ok else 'FAIL'}" for name, ok in checks.items())
    if "kappa" in payload:
        summary = f"kappa={payload['kappa']:.12g} " + summary
    else:
        summary = f"qs_constant={kernel.qs_constant:.12g} symmetrized_kappa={payload['symmetrized_kappa']:.12g}"
    return CommandOutcome(EXIT_OK if payload["passed"] else EXIT_BOUND_FAIL, summary, list(ctx.written))


def get_commands() -> List[CommandEntry]:
    return [CommandEntry("verify", _verify, "Quasi-metric, WMP, Ptolemy and modifiability certificates.")]
