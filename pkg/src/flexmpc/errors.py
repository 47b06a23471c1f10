"""Exception hierarchy shared by all flexmpc modules."""

from __future__ import annotations


class FlexMPCError(Exception):
    """Base class for every error raised by this package."""


class DomainError(FlexMPCError, ValueError):
    """An input violates a documented precondition (shape, symmetry, range)."""


class ConvergenceError(FlexMPCError, RuntimeError):
    """An iterative method hit its iteration cap.

    ``residual`` carries the last residual so callers can decide how bad it was.
    """

    def __init__(self, message: str, residual: float = float("nan"), diagnostics=None):
        super().__init__(message)
        self.residual = residual
        self.diagnostics = diagnostics or {}


class FeasibilityError(FlexMPCError):
    """The feasible start of an optimal control problem violates a constraint."""

    def __init__(self, message: str, coordinate=None):
        super().__init__(message)
        self.coordinate = coordinate


class AlgorithmInvariantError(FlexMPCError):
    """No predicted index achieves the certified descent in a flexible-step instance."""

    def __init__(self, message: str, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class ScenarioError(FlexMPCError, ValueError):
    """A scenario file is malformed; ``field`` names the offending entry."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field
