"""
Quasipot — Errors and exit codes.

Every error knows the CLI exit code it maps to. Errors raised midway
through a computation keep the partial result on the instance.
"""

from __future__ import annotations

from typing import Any, Optional

EXIT_OK = 0
EXIT_BOUND_FAIL = 2
EXIT_NONEXISTENCE = 3
EXIT_CONFIG = 64
EXIT_NOT_SYMMETRIC = 65
EXIT_NUMERIC = 70


class QuasipotError(Exception):
    exit_code = EXIT_NUMERIC


# ---------------------------------------------------------------------------
# Bad input (exit 64)
# ---------------------------------------------------------------------------

class InputError(QuasipotError, ValueError):
    exit_code = EXIT_CONFIG


class ZeroSigma(InputError):
    pass


class LengthMismatch(InputError):
    pass


class NonPositiveEntry(InputError):
    pass


class NonFiniteEntry(InputError):
    pass


class DuplicatePoints(InputError):
    pass


class BadAlpha(InputError):
    pass


class BadExponent(InputError):
    pass


class ConfigError(InputError):
    pass


class SubsetLimitExceeded(InputError):
    pass


class NotSymmetric(QuasipotError, ValueError):
    exit_code = EXIT_NOT_SYMMETRIC


# ---------------------------------------------------------------------------
# Numerical failures (exit 70)
# ---------------------------------------------------------------------------

class NumericalError(QuasipotError, RuntimeError):
    exit_code = EXIT_NUMERIC


class NoConvergence(NumericalError):
    def __init__(self, message: str, certificate: Optional[Any] = None):
        super().__init__(message)
        self.certificate = certificate


class BudgetExhausted(NumericalError):
    def __init__(self, message: str, report: Optional[Any] = None):
        super().__init__(message)
        self.report = report


class SeedNotSubsolution(NumericalError):
    def __init__(self, message: str, worst_point: int = -1, excess: float = float("nan")):
        super().__init__(message)
        self.worst_point = worst_point
        self.excess = excess


class MaxIterExceeded(NumericalError):
    def __init__(self, message: str, result: Optional[Any] = None):
        super().__init__(message)
        self.result = result


class GapStagnation(NumericalError):
    def __init__(self, message: str, report: Optional[Any] = None):
        super().__init__(message)
        self.report = report


class SolutionUnderflow(NumericalError):
    """A converged iterate vanishes at a σ-mass point: the solution is below float range there."""

    def __init__(self, message: str, result: Optional[Any] = None):
        super().__init__(message)
        self.result = result


class LpNumericalFailure(NumericalError):
    def __init__(self, message: str, result: Optional[Any] = None):
        super().__init__(message)
        self.result = result


class LpUnbounded(NumericalError):
    pass


class NotQuasiMetricModified(NumericalError):
    def __init__(self, message: str, certificate: Optional[Any] = None):
        super().__init__(message)
        self.certificate = certificate
