"""Exception hierarchy shared by every layer of the toolkit."""
from __future__ import annotations


class AqedError(Exception):
    """Base class; the CLI maps subclasses to diagnostics."""


# core model
class StepBudgetExceeded(AqedError):
    def __init__(self, message: str, steps: int = 0, state=None):
        super().__init__(message)
        self.steps = steps
        self.state = state


class ExplosionCap(AqedError):
    pass


class BatchSizeError(AqedError, ValueError):
    pass


# frontend
class AbkSyntaxError(AqedError):
    def __init__(self, message: str, line: int = 0, column: int = 0):
        super().__init__(f"{line}:{column}: {message}")
        self.line = line
        self.column = column


class AnnotationError(AqedError):
    pass


class BoundError(AqedError):
    pass


class UnrollCap(AqedError):
    pass


class RegionError(AqedError):
    pass


# decomposition
class WiringError(AqedError):
    pass


class ComposabilityError(AqedError):
    def __init__(self, condition: str, message: str):
        super().__init__(f"condition ({condition}) violated: {message}")
        self.condition = condition


# obligations and engine
class NotApplicable(AqedError):
    pass


class SpecError(AqedError):
    pass


class ReplayMismatch(AqedError):
    pass


class EmptyInterface(AqedError):
    pass


class ConfigError(AqedError):
    pass
