"""
Exception hierarchy. Every error carries the process exit code the CLI reports for it.
"""

from typing import Any


class ToolkitError(Exception):
    exit_code: int = 3


class ConfigError(ToolkitError):
    """Configuration could not be read or failed validation."""
    exit_code = 2

    def __init__(self, message: str, problems: list[str] | None = None):
        self.problems = problems or []
        detail = "; ".join(self.problems)
        super().__init__(f"{message}: {detail}" if detail else message)


class InvalidInputError(ToolkitError, ValueError):
    """Arguments violate a precondition of a numerical routine."""
    exit_code = 3


class VerificationError(ToolkitError):
    exit_code = 1

    def __init__(self, failed: list[str]):
        self.failed = failed
        super().__init__(f"verification failed: {', '.join(failed)}")


class NumericalError(ToolkitError):
    exit_code = 3


class FactorizationError(NumericalError):
    """Sparse factorization broke down (typically K not positive definite)."""


class ConvergenceError(NumericalError):
    pass


class SingularSystemError(NumericalError):
    pass


class IncompatibleRightHandSideError(NumericalError):
    pass


class ClusteredEigenvalueError(NumericalError):
    """A routine that requires a simple eigenvalue was handed a clustered one."""

    def __init__(self, index: int, cluster: tuple[int, int]):
        self.index = index
        self.cluster = cluster
        super().__init__(
            f"eigenvalue {index} belongs to the numerical cluster [{cluster[0]}, {cluster[1]})")


class DegenerateEigenvalueError(ClusteredEigenvalueError):
    """A target eigenvalue of the objective became repeated during optimization."""


class EigenvectorCrossingError(NumericalError):
    def __init__(self, index: int, overlap: float):
        self.index = index
        self.overlap = overlap
        super().__init__(
            f"eigenvector {index} is nearly orthogonal to its reference (overlap {overlap:.3g})")


class InfeasibleConstraintError(NumericalError):
    pass


class NonDifferentiableError(NumericalError):
    pass


class ObjectiveBoundError(NumericalError):
    pass


class LineSearchError(NumericalError):
    def __init__(self, message: str, result: Any = None):
        self.result = result
        super().__init__(message)
