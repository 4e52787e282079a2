"""Exception taxonomy for the whole package.

Every error raised on a violated precondition names that precondition, so
callers (CLI, HTTP service) can map exceptions to exit codes / status codes
without string matching.
"""

from __future__ import annotations


class ArborflowError(Exception):
    """Base class for all package errors."""

    code = "error"

    def payload(self) -> dict:
        """Machine-readable form used by the CLI --json mode and the service."""
        return {"code": self.code, "message": str(self)}


class SpecValidationError(ArborflowError):
    """A process spec failed validation; carries the full report."""

    code = "invalid-spec"

    def __init__(self, report):
        self.report = report
        issues = ", ".join(i.code for i in report.errors)
        super().__init__(f"spec validation failed: {issues}")

    def payload(self) -> dict:
        return {
            "code": self.code,
            "message": str(self),
            "report": self.report.to_dict(),
        }


class RecursiveGrammarError(ArborflowError):
    """Scenario enumeration requires a non-recursive grammar."""

    code = "recursive-grammar"

    def __init__(self, sorts):
        self.sorts = tuple(sorted(sorts))
        super().__init__(f"grammar is recursive through sorts: {', '.join(self.sorts)}")


class ExplosionLimitError(ArborflowError):
    """The target enumeration exceeded the configured cap."""

    code = "explosion-limit"

    def __init__(self, cap: int):
        self.cap = cap
        super().__init__(f"target enumeration exceeded the cap of {cap} artifacts")


class NotSingletonError(ArborflowError):
    """A rooted projection was requested but the projection is not a single tree."""

    code = "not-singleton"

    def __init__(self, size: int):
        self.size = size
        super().__init__(f"projection produced a forest of {size} artifacts, expected exactly 1")


class EmptyGuidesError(ArborflowError):
    """No enumerated target is compatible with the (global, replica) pair."""

    code = "empty-guides"


class GuideMismatchError(ArborflowError):
    """The merge traversal hit a configuration its preconditions rule out."""

    code = "guide-mismatch"


class ScriptStepError(ArborflowError):
    """A scenario-script step failed during replay."""

    code = "script-step"

    def __init__(self, index: int, cause: Exception):
        self.index = index
        self.cause = cause
        super().__init__(f"script step {index} failed: {cause}")

    def payload(self) -> dict:
        return {"error": self.code, "message": str(self), "step": self.index}


class EngineError(ArborflowError):
    """Base class for peer-engine precondition violations."""

    code = "engine-error"


class UnknownActorError(EngineError):
    code = "unknown-actor"


class UnknownCaseError(EngineError):
    code = "unknown-case"


class NoReplicaError(EngineError):
    code = "no-replica"


class LockedBudError(EngineError):
    code = "locked-bud"


class NotABudError(EngineError):
    code = "not-a-bud"


class AddressError(EngineError):
    code = "bad-address"


class NotAccreditedError(EngineError):
    code = "not-accredited"


class UnknownProductionError(EngineError):
    code = "unknown-production"


class NonConformingArtifactError(EngineError):
    code = "non-conforming-artifact"


class StaleReplicaError(EngineError):
    """The shared artifact moved under the actor's feet in a conflicting way."""

    code = "stale-replica"


class GuideChoiceRequiredError(EngineError):
    """External guide policy: several scenarios fit, a caller must choose one."""

    code = "guide-choice-required"

    def __init__(self, summaries):
        self.summaries = list(summaries)
        super().__init__(
            f"{len(self.summaries)} execution scenarios fit this commit; choose one by index"
        )

    def payload(self) -> dict:
        return {"code": self.code, "message": str(self), "guides": self.summaries}
