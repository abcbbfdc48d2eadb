"""Exception hierarchy and process exit codes for ssmkit."""

# Exit codes used by the command-line entry point
EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_ACCEPTANCE = 2
EXIT_NUMERIC = 3


class SsmError(Exception):
    """Base class for all errors raised by ssmkit."""


class ModelError(ValueError):
    """A state or control violates a model guard (e.g. |delta| >= pi/2)."""


class ScenarioError(SsmError, ValueError):
    """Scenario text failed validation.

    Attributes:
        source: Name of the file or string the scenario came from
        line: 1-based line number of the offending entry, if known
        field: Section/key of the offending entry, if known
    """

    def __init__(
        self,
        message: str,
        *,
        source: str = "<string>",
        line: int | None = None,
        field: str | None = None,
    ):
        self.source = source
        self.line = line
        self.field = field
        self.reason = message

        location = source
        if line is not None:
            location += f":{line}"
        if field:
            location += f" [{field}]"
        super().__init__(f"{location}: {message}")


class NumericError(SsmError, ArithmeticError):
    """A numerical routine produced an unusable result."""


class IntegrationError(NumericError):
    """RK4 integration hit a non-finite state.

    Attributes:
        step_index: Index of the step whose result was non-finite
    """

    def __init__(self, message: str, step_index: int):
        self.step_index = step_index
        super().__init__(f"{message} (step {step_index})")


class EvaluationError(NumericError):
    """A collision query failed at a given evaluation time."""

    def __init__(self, time: float, query_id: str, cause: Exception):
        self.time = time
        self.query_id = query_id
        self.cause = cause
        super().__init__(f"query '{query_id}' failed at T_r={time:.3f}s: {cause}")


class AcceptanceFailure(SsmError):
    """One or more acceptance checks did not pass.

    Attributes:
        results: Every check that was run, passed or not
    """

    def __init__(self, message: str, results: list | None = None):
        self.results = results or []
        super().__init__(message)


def exit_code_for(exception: BaseException) -> int:
    """Map an exception to the process exit code.

    Args:
        exception: The exception that ended the command

    Returns:
        1 for validation problems, 2 for acceptance failures, 3 for numeric failures
    """
    if isinstance(exception, AcceptanceFailure):
        return EXIT_ACCEPTANCE
    if isinstance(exception, NumericError):
        return EXIT_NUMERIC
    if isinstance(exception, (ScenarioError, ModelError, ValueError)):
        return EXIT_VALIDATION
    return EXIT_NUMERIC
