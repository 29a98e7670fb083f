"""Exception hierarchy.

Each error class carries the CLI exit code used when it escapes a subcommand.
"""


class MeasoptError(Exception):
    exit_code = 1


class InputError(MeasoptError, ValueError):
    """Malformed user input (files, strings, arguments)."""

    exit_code = 3


class DimensionError(InputError):
    """Operands disagree on the number of qubits."""


class PauliParseError(InputError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at index {position})")
        self.position = position


class ConfigurationError(InputError):
    """A grouping kernel or pipeline is missing required context."""


class GenerationError(MeasoptError):
    """Random topology generation failed within the retry budget."""

    exit_code = 3


class RoutingError(MeasoptError):
    exit_code = 5


class CapacityError(MeasoptError):
    """Exact simulation requested beyond the dense-matrix qubit cap."""

    exit_code = 4


class NumericalError(MeasoptError, ArithmeticError):
    """A numerical contract (Hermiticity, PSD, real expectation) was violated."""

    exit_code = 5


class ContractViolation(MeasoptError):
    """An operation was called outside its documented precondition."""

    exit_code = 5


class StateError(MeasoptError):
    """A pipeline step was run before the step it depends on."""

    exit_code = 5


class RegressionError(MeasoptError):
    exit_code = 5
