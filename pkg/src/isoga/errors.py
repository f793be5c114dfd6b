"""Exception hierarchy. Every error raised on purpose derives from
``IsogaError`` so callers (and the CLI) can separate numerical failures
from programming errors."""


class IsogaError(Exception):
    """Base class."""


class InputError(IsogaError, ValueError):
    """Bad user input: arguments, configuration, files."""


class DomainError(InputError):
    """Parameter or point outside the valid domain."""


class ArgumentError(InputError):
    """Invalid argument value or combination."""


class ConfigError(InputError):
    """Configuration violates the schema; ``path`` is the JSON path."""

    def __init__(self, message, path="$"):
        super().__init__(f"{path}: {message}")
        self.path = path


class MethodError(InputError):
    """A boundary-condition method was applied where it is not valid."""


class FormulationError(InputError):
    """The discretization cannot represent the requested formulation."""


class NumericalError(IsogaError, ArithmeticError):
    """Base class for failures discovered during computation."""


class SingularGeometryError(NumericalError):
    """Jacobian determinant vanishes at an evaluation point."""

    def __init__(self, message, element=None, point=None):
        super().__init__(message)
        self.element = element
        self.point = point


class SingularPointError(NumericalError):
    """Evaluation requested at a singular point such as a crack tip."""


class SingularMatrixError(NumericalError):
    """Factorization met a zero or negative pivot; ``dof`` names it."""

    def __init__(self, message, dof=None):
        super().__init__(message)
        self.dof = dof


class SingularConstraintError(NumericalError):
    """Constraint matrix is rank deficient."""


class ConvergenceError(NumericalError):
    """Iterative solver failed; ``trace`` holds the residual history."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = list(trace or [])


class TopologyError(NumericalError):
    """Crack geometry cannot be resolved on the mesh."""


class IOFailure(IsogaError, OSError):
    """Output could not be written."""
