"""Exception hierarchy and no-witness result marker.

Exit-code mapping used by the CLI: UsageError -> 1, InputError -> 2,
BudgetError -> 3, CertificateError -> 4.
"""

from dataclasses import dataclass
from typing import Any


class HfaError(Exception):
    """Base class for all library errors."""

    exit_code = 2


class UsageError(HfaError):
    """Bad invocation (unknown subcommand, malformed flags)."""

    exit_code = 1


class InputError(HfaError):
    """Structurally invalid input (group mismatch, unparsable file)."""

    exit_code = 2


class PreconditionError(InputError):
    """A documented precondition of an operation does not hold."""


class BudgetError(HfaError):
    """Enumeration or search budget exceeded; retry with sampling or a cap."""

    exit_code = 3


class RetryableError(HfaError):
    """Randomized procedure exhausted its retry budget; rerun with a new seed."""

    exit_code = 3


class CertificateError(HfaError):
    """A hard internal certificate failed; signals a library or input bug."""

    exit_code = 4


class SearchExhaustedError(HfaError):
    """A verified search found no admissible object (pathological instance)."""

    exit_code = 3


class PartialResultError(HfaError):
    """Search budget ran out; carries whatever partial data was computed."""

    exit_code = 3

    def __init__(self, message: str, partial: Any = None):
        super().__init__(message)
        self.partial = partial


@dataclass(frozen=True)
class NoWitness:
    """Returned (not raised) when a bias/norm threshold is not met.

    Not an error: the hypothesis of the statement simply fails, so there is
    nothing to certify.
    """

    reason: str
    measured: float = 0.0

    def __bool__(self) -> bool:
        return False
