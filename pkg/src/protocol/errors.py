"""Exception hierarchy for the protocol engine.

Every error carries a stable, machine-parseable ``code`` which the CLI
prints as ``ERROR <code>: <message>``.
"""


class PrincipiaError(Exception):
    code = "PRINCIPIA"

    def __init__(self, message="", **context):
        self.context = context
        detail = " ".join(f"{k}={v}" for k, v in context.items())
        super().__init__(" ".join(part for part in (message, detail) if part))


class InvalidKey(PrincipiaError):
    code = "INVALID_KEY"


class ConfigError(PrincipiaError):
    code = "CONFIG"


class ScenarioError(PrincipiaError):
    """Scenario validation error with file/section/field diagnostics."""

    code = "SCENARIO"


# Ledger integrity

class LedgerError(PrincipiaError):
    code = "LEDGER"


class ChainBreak(LedgerError):
    code = "CHAIN_BREAK"


class BadSignature(LedgerError):
    code = "BAD_SIGNATURE"


class LedgerLocked(LedgerError):
    code = "LEDGER_LOCKED"


# Kind-specific precondition failures

class PreconditionFailed(PrincipiaError):
    code = "PRECONDITION_FAILED"


class UnknownEntity(PreconditionFailed):
    code = "UNKNOWN_ENTITY"


class NotValidated(PreconditionFailed):
    code = "NOT_VALIDATED"


class MissingFounderSignature(PreconditionFailed):
    code = "MISSING_FOUNDER_SIGNATURE"


class BadParams(PreconditionFailed):
    code = "BAD_PARAMS"


class DuplicateJournal(PreconditionFailed):
    code = "DUPLICATE_JOURNAL"


class QuorumNotMet(PreconditionFailed):
    code = "QUORUM_NOT_MET"


class AlreadySuperseded(PreconditionFailed):
    code = "ALREADY_SUPERSEDED"


class EmptyBoardResult(PreconditionFailed):
    code = "EMPTY_BOARD_RESULT"


class PendingProposal(PreconditionFailed):
    code = "PENDING_PROPOSAL"


class AlreadyMember(PreconditionFailed):
    code = "ALREADY_MEMBER"


class InsufficientFunds(PreconditionFailed):
    code = "INSUFFICIENT_FUNDS"


class NotDescendant(PreconditionFailed):
    code = "NOT_DESCENDANT"


class JournalSuperseded(PreconditionFailed):
    code = "JOURNAL_SUPERSEDED"


class WrongStatus(PreconditionFailed):
    code = "WRONG_STATUS"


class NotEnoughEligibleReviewers(PreconditionFailed):
    code = "NOT_ENOUGH_ELIGIBLE_REVIEWERS"


class NotAssigned(PreconditionFailed):
    code = "NOT_ASSIGNED"


class PastDeadline(PreconditionFailed):
    code = "PAST_DEADLINE"


class DuplicateReview(PreconditionFailed):
    code = "DUPLICATE_REVIEW"


class ScoreOutOfRange(PreconditionFailed):
    code = "SCORE_OUT_OF_RANGE"


class TooFewReviews(PreconditionFailed):
    code = "TOO_FEW_REVIEWS"


class ReviewsPending(PreconditionFailed):
    code = "REVIEWS_PENDING"


class VoteFromNonReviewer(PreconditionFailed):
    code = "VOTE_FROM_NON_REVIEWER"


class NoFeasibleMatch(PreconditionFailed):
    code = "NO_FEASIBLE_MATCH"


class NotMatched(PreconditionFailed):
    code = "NOT_MATCHED"


class Duplicate(PreconditionFailed):
    code = "DUPLICATE"


class SelfScore(PreconditionFailed):
    code = "SELF_SCORE"


class NotEnoughReviewers(PreconditionFailed):
    code = "NOT_ENOUGH_REVIEWERS"
