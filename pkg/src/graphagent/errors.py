"""Exception hierarchy shared across the pipeline stages.

Each pipeline stage raises subclasses of :class:`GraphAgentError`; the CLI maps
the stage of origin to a stable exit code.
"""

from __future__ import annotations


class GraphAgentError(Exception):
    """Base class for all errors raised by this package."""


# --- graph grounding ---

class GroundingError(GraphAgentError):
    pass


class MalformedLine(GroundingError):
    def __init__(self, line_no: int, line: str, reason: str):
        super().__init__(f"line {line_no}: {reason}: {line!r}")
        self.line_no = line_no
        self.line = line
        self.reason = reason


class DuplicateNode(GroundingError):
    pass


class DuplicateEdge(GroundingError):
    pass


class DanglingEdge(GroundingError):
    pass


class UnknownEdge(GroundingError):
    pass


class UnknownNode(GroundingError):
    pass


# --- llm gateway ---

class GatewayError(GraphAgentError):
    pass


class BackendUnavailable(GatewayError):
    pass


class Timeout(GatewayError):
    pass


class ResponseTooLong(GatewayError):
    pass


class UnparseableAfterRepair(GatewayError):
    def __init__(self, message: str, attempts: list[str]):
        super().__init__(message)
        self.attempts = attempts


# --- skg builder ---

class SkgError(GraphAgentError):
    pass


class EmptyExtraction(SkgError):
    pass


class CountMismatchAfterRepair(SkgError):
    pass


# --- planner ---

class PlanError(GraphAgentError):
    pass


class InconsistentPlan(PlanError):
    pass


# --- tokenizer ---

class TokenizerError(GraphAgentError):
    pass


class ProviderUnavailable(TokenizerError):
    pass


class DimensionMismatch(TokenizerError):
    pass


# --- action agent ---

class ActionError(GraphAgentError):
    pass


class TemplateMissing(ActionError):
    pass


class PlaceholderMismatch(ActionError):
    pass


class BudgetExceeded(ActionError):
    pass


class LabelNotInCandidates(ActionError):
    pass


class CitationOutOfRange(ActionError):
    pass


# --- instruction data ---

class InstructDataError(GraphAgentError):
    pass


class NoEligibleType(InstructDataError):
    pass


class CannotSatisfyDiversity(InstructDataError):
    pass


class MissingReasoning(InstructDataError):
    pass


class EmptySource(InstructDataError):
    pass


# --- eval harness ---

class EvalError(GraphAgentError):
    pass


class UnknownLabel(EvalError):
    pass


class DegenerateClass(EvalError):
    pass


class NonPositivePpl(EvalError):
    pass


class UnparseableVerdict(EvalError):
    pass
