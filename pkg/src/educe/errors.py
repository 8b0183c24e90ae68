"""Error taxonomy shared across the package.

Service handlers map these onto error categories; the CLI maps the same
categories onto exit codes. Keeping the hierarchy flat and explicit beats
encoding category strings at every raise site.
"""

from __future__ import annotations


class EduceError(Exception):
    """Base class for every error this package raises on purpose."""


class ParseError(EduceError):
    def __init__(self, message: str, line: int, col: int, expected: tuple[str, ...] = ()):
        self.line = line
        self.col = col
        self.expected = expected
        detail = f"{line}:{col}: {message}"
        if expected:
            detail += " (expected " + " or ".join(expected) + ")"
        super().__init__(detail)


class ContextSpecError(EduceError):
    """Malformed context spec string or a name that is not a declared dimension."""


class EvalError(EduceError):
    # category is the machine-comparable error class: div_zero, unresolved, depth
    def __init__(self, message: str, category: str, line: int | None = None, col: int | None = None):
        self.category = category
        self.line = line
        self.col = col
        if line is not None:
            message = f"{line}:{col}: {message}"
        super().__init__(message)


class ProtocolError(EduceError):
    """A demand lifecycle transition that the store's state machine forbids."""


class FabricDownError(EduceError):
    """No available transport to select."""


class TransportError(EduceError):
    """One failed delivery attempt on one transport; the dispatcher may retry."""


class DeliveryError(EduceError):
    """Delivery failed even after falling back to another transport."""


class StoreShutdownError(EduceError):
    pass


class ConfigError(EduceError):
    pass


class SampleFormatError(EduceError):
    pass


class TrainingError(EduceError):
    """Training-set precondition failures: method or length mismatch, empty set."""


class WalError(EduceError):
    pass


class PolicyError(EduceError):
    """Healing invoked against a state the policy has no action for."""


class WorkloadError(EduceError):
    """The workload could not finish even after healing was exhausted."""
