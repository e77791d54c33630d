"""Typed failures shared across modules."""

from __future__ import annotations


class OpsAssistError(Exception):
    """Base class for all engine errors."""

    code = "internal_error"


class BudgetExceeded(OpsAssistError):
    """The next chat call would exceed the per-request budget."""

    code = "budget_exceeded"


class ProviderUnavailable(OpsAssistError):
    code = "provider_unavailable"


class ReplayMiss(ProviderUnavailable):
    """No transcript entry for this fingerprint; carries authoring context."""

    code = "replay_miss"

    def __init__(self, fingerprint: str, tag: str, preview: str):
        super().__init__(
            f"no canned response for fingerprint {fingerprint} (tag={tag}): {preview!r}"
        )
        self.fingerprint = fingerprint
        self.tag = tag
        self.preview = preview


class TransportTimeout(OpsAssistError):
    code = "transport_timeout"


class MalformedOutput(OpsAssistError):
    """Structured parsing failed even after the single repair retry."""

    code = "malformed_output"

    def __init__(self, message: str, problems: tuple[str, ...] = ()):
        super().__init__(message)
        self.problems = problems


class SchemaViolation(OpsAssistError):
    """One parse attempt failed; internal to the repair loop."""

    code = "schema_violation"

    def __init__(self, problems: list[str] | tuple[str, ...]):
        super().__init__("; ".join(problems))
        self.problems = tuple(problems)


class DimensionMismatch(OpsAssistError):
    code = "dimension_mismatch"


class ValidationFailed(OpsAssistError):
    code = "validation_failed"

    def __init__(self, problems: list[str] | tuple[str, ...]):
        super().__init__("; ".join(problems))
        self.problems = tuple(problems)


class UnknownReplaceTarget(OpsAssistError):
    code = "unknown_replace_target"


class Level4Requested(OpsAssistError):
    """Model-general knowledge performs no retrieval; callers answer directly."""

    code = "level4_requested"


class EmptyTrainingSet(OpsAssistError):
    code = "empty_training_set"


class UnknownSession(OpsAssistError):
    code = "unknown_session"


class UnknownTicket(OpsAssistError):
    code = "unknown_ticket"


class UnknownTrace(OpsAssistError):
    code = "unknown_trace"
