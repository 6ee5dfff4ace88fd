"""Exception types shared across the package."""

from __future__ import annotations


class DomainError(ValueError):
    """Argument outside the mathematical domain of an operation."""


class BracketError(ValueError):
    """Target probability is not bracketed by the supplied interval."""


class ShapeError(ValueError):
    """Array shapes are inconsistent."""


class SizeError(ValueError):
    """Too few samples for the requested statistic."""


class InfeasibleError(ValueError):
    """Hyperparameter constraints cannot be met; ``binding`` names the culprit."""

    def __init__(self, message: str, binding: str):
        super().__init__(message)
        self.binding = binding


class SpecError(ValueError):
    """Invalid experiment description."""


class DatasetError(ValueError):
    """Malformed dataset file."""


class NumericAbort(FloatingPointError):
    """A chain produced a non-finite iterate.

    Attributes
    ----------
    step : int
        Index of the step that produced the non-finite value.
    last_state : numpy.ndarray
        Last state in which every coordinate was finite.
    """

    def __init__(self, step: int, last_state):
        super().__init__(f"non-finite iterate at step {step}")
        self.step = step
        self.last_state = last_state
