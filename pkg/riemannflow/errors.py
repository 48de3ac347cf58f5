from typing import Optional


class RiemannFlowError(Exception):
    """Base class for every error raised by riemannflow."""


class DomainError(RiemannFlowError, ValueError):
    """An argument lies outside the range an operation accepts."""


class OffShellError(DomainError):
    """A launch state does not lie on the E=1 energy shell."""


class SingularityError(RiemannFlowError, ArithmeticError):
    """The polar equations of motion were evaluated at a = 0 or r = 0."""


class NotClosedError(RiemannFlowError, RuntimeError):
    """A trajectory did not close within its time budget."""


class BracketInvalidError(RiemannFlowError, ValueError):
    """A search bracket does not enclose a transition or a minimum."""


class NoTerminationError(RiemannFlowError, RuntimeError):
    """A shot from a turning point never crossed the principal negative-imaginary axis.

    Args:
        message: Human readable reason
        terminal: The event that ended the run, if any
    """

    def __init__(self, message: str, terminal: Optional[object] = None):
        super().__init__(message)
        self.terminal = terminal


class InsufficientTailError(RiemannFlowError, ValueError):
    """An escaping run has too few samples beyond the fit radius."""


class EscapeFitError(RiemannFlowError, RuntimeError):
    """The blowup power law does not describe an escape tail."""


class ConfigError(RiemannFlowError, ValueError):
    """A run configuration could not be parsed."""


class OutputError(RiemannFlowError, OSError):
    """A result file could not be written or read back."""


class UnresolvedRunError(RiemannFlowError, RuntimeError):
    """A run ended before it could answer the question it was started for.

    Args:
        message: Human readable reason
        terminal: The event that ended the run, if any
    """

    def __init__(self, message: str, terminal: Optional[object] = None):
        super().__init__(message)
        self.terminal = terminal
