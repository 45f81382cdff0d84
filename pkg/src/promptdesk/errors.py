"""Exception hierarchy shared across the service.

Every error that can cross a module boundary lives here so the API layer
can map exception type -> wire error code in one place.
"""

from __future__ import annotations


class PromptDeskError(Exception):
    """Base class for all domain and infrastructure errors."""


class ValidationError(PromptDeskError):
    """Caller-supplied input violates a precondition or type invariant."""


class StateError(PromptDeskError):
    """Operation is not legal in the entity's current status."""


class NotFoundError(PromptDeskError):
    """Referenced entity does not exist."""


class BusyError(PromptDeskError):
    """A conflicting long-running operation is already in flight."""


class GateBlockedError(PromptDeskError):
    """Publication gate refused; carries the per-condition reasons."""

    def __init__(self, reasons: list[str], unpassed_case_ids: list[str]):
        super().__init__("publication blocked: " + "; ".join(reasons))
        self.reasons = list(reasons)
        self.unpassed_case_ids = list(unpassed_case_ids)


class InputRequiredError(PromptDeskError):
    """No scripted follow-up remains and no explicit message was given."""


# --- gateway ---------------------------------------------------------------

class GatewayError(PromptDeskError):
    """Base class for chat-completion gateway failures."""


class ConfigurationError(GatewayError):
    """Provider credential or configuration missing; no network attempted."""


class ProviderError(GatewayError):
    """Permanent provider-side failure (HTTP 4xx); never retried."""


class ProviderTimeoutError(GatewayError):
    """Total deadline exceeded across attempts."""


class ProtocolError(GatewayError):
    """Provider returned a payload we could not interpret."""


class FixtureMissError(GatewayError):
    """Scripted provider had no fixture registered for the computed key."""

    def __init__(self, key: str):
        super().__init__(f"no fixture registered for key {key}")
        self.key = key


class FixtureFileError(GatewayError):
    """Fixture file unreadable or malformed; carries the offending line."""

    def __init__(self, path: str, line_no: int, reason: str):
        super().__init__(f"{path}:{line_no}: {reason}")
        self.path = path
        self.line_no = line_no


# --- diff algebra ----------------------------------------------------------

class DiffApplicationError(PromptDeskError):
    """Diff's keep+delete projection diverged from the target text."""

    def __init__(self, line_index: int, detail: str):
        super().__init__(f"diff does not apply at line {line_index}: {detail}")
        self.line_index = line_index


# --- pipeline --------------------------------------------------------------

class PipelineError(PromptDeskError):
    """A reverse-pipeline step failed after its bounded retries."""


# --- persistence -----------------------------------------------------------

class StoreError(PromptDeskError):
    """Base class for store failures."""


class AppendOnlyViolationError(StoreError):
    """Attempted overwrite of an immutable record kind."""


class StoreDegradedError(StoreError):
    """Store opened read-degraded after quarantining a corrupt suffix."""
