"""Exception hierarchy shared across the workbench."""
from __future__ import annotations


class ForgeditError(Exception):
    """Base class for all workbench errors."""


class ContractError(ForgeditError, ValueError):
    """A precondition or shape/compatibility contract was violated."""


class NotFoundError(ForgeditError, KeyError):
    """An artifact, session, or job id does not exist."""

    def __str__(self) -> str:  # KeyError quotes its args; keep message readable
        return Exception.__str__(self)


class StateError(ForgeditError):
    """An operation was attempted in an illegal workflow state."""


class StorageError(ForgeditError, IOError):
    """The artifact store failed to read or write a payload."""


class ConfigurationError(ForgeditError):
    """A backend or deployment is misconfigured (e.g. unclassifiable parameter name)."""


class CaptionerUnavailableError(ForgeditError):
    """The remote captioning endpoint timed out or is unreachable."""


class DegenerateReferenceError(ContractError):
    """Projection was asked to decompose against a near-zero reference embedding."""


class NumericalError(ForgeditError):
    """A loss or gradient evaluation produced a non-finite value."""


class SamplingError(ForgeditError):
    """A non-finite value appeared during generative sampling."""


class AbortedFinetuneError(ForgeditError):
    """Finetuning hit a non-finite loss; carries the partial loss curve."""

    def __init__(self, message: str, loss_curve: list[tuple[int, float]]):
        super().__init__(message)
        self.loss_curve = loss_curve
