"""
Error hierarchy for ExtraPoint.

Every library error carries the process exit code the CLI reports for it.
"""


class ExtraPointError(Exception):
    """Base error for solver, oracle and harness failures."""

    exit_code: int = 1
    kind: str = "error"

    def __init__(self, message: str, exit_code: int | None = None):
        self.message = message
        if exit_code is not None:
            self.exit_code = exit_code
        super().__init__(self.message)


class ConfigError(ExtraPointError):
    """Malformed or inconsistent configuration."""

    exit_code = 2
    kind = "config"


class ParameterValidationError(ExtraPointError):
    """Scheme parameters fail their convergence conditions."""

    exit_code = 3
    kind = "validation"

    def __init__(self, message: str, violated: list[str] | None = None):
        self.violated = list(violated or [])
        super().__init__(message)


class NumericalError(ExtraPointError):
    """Non-finite iterates, non-convergent reference solves or SVD failures."""

    exit_code = 4
    kind = "numerical"

    def __init__(
        self,
        message: str,
        iteration: int | None = None,
        replication: int | None = None,
    ):
        self.iteration = iteration
        self.replication = replication
        context = []
        if replication is not None:
            context.append(f"replication={replication}")
        if iteration is not None:
            context.append(f"iteration={iteration}")
        if context:
            message = f"{message} ({', '.join(context)})"
        super().__init__(message)


class OracleError(ExtraPointError):
    """Oracle evaluation failed or an oracle contract cannot be checked."""

    exit_code = 4
    kind = "oracle"
