"""
Journal-mediated review lifecycle.

BID -> ACCEPTED_FOR_REVIEW -> UNDER_REVIEW -> DECIDED -> FINAL_VOTE -> SETTLED,
with FAILED reachable from the acceptance vote and the publication decision.
The review fee sits in a per-round escrow wallet until it is settled or
refunded.
"""
import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from fractions import Fraction

import numpy as np

from src.algorithms.allocation import Payout, split_failed_round, split_review_fee
from src.protocol.canonical import canonicalize
from src.protocol.errors import (
    Duplicate,
    DuplicateReview,
    JournalSuperseded,
    NotAssigned,
    NotEnoughEligibleReviewers,
    PastDeadline,
    PreconditionFailed,
    QuorumNotMet,
    ReviewsPending,
    ScoreOutOfRange,
    TooFewReviews,
    UnknownEntity,
    VoteFromNonReviewer,
    WrongStatus,
)
from src.protocol.events import EventKind
from src.protocol.identity import ContentHash, Signature, content_hash
from src.protocol.state import (
    escrow_account,
    handles,
    hash_field,
    int_field,
    journal_account,
    people_field,
    person_account,
    signatures_field,
)

logger = logging.getLogger(__name__)

MIN_SCORE = 1
MAX_SCORE = 5
ACCEPT_ABOVE = 3


class RoundStatus(Enum):
    BID = "Bid"
    ACCEPTED_FOR_REVIEW = "AcceptedForReview"
    UNDER_REVIEW = "UnderReview"
    DECIDED = "Decided"
    FINAL_VOTE = "FinalVote"
    SETTLED = "Settled"
    FAILED = "Failed"


OPEN_STATUSES = frozenset(RoundStatus) - {RoundStatus.SETTLED, RoundStatus.FAILED}


@dataclass(frozen=True)
class Paper:
    hash: ContentHash
    authors: frozenset
    author_signatures: tuple
    keywords: frozenset
    cites: frozenset
    published_at: int


@dataclass(frozen=True)
class Publication:
    paper: ContentHash
    journal: ContentHash
    day: int


@dataclass(frozen=True)
class ReviewRound:
    id: ContentHash
    paper: ContentHash
    journal: ContentHash
    payer: object
    fee: int
    created_at: int
    status: RoundStatus = RoundStatus.BID
    reviewers: tuple = ()
    tokens: tuple = ()
    scores: dict = field(default_factory=dict)
    reports: dict = field(default_factory=dict)
    deadline: int | None = None
    decision: bool | None = None
    decided_at: int | None = None
    final_version: ContentHash | None = None
    final_deadline: int | None = None
    final_votes: dict = field(default_factory=dict)
    payout: Payout | None = None
    failure: str | None = None

    @property
    def escrow(self):
        return escrow_account("review", self.id)


# Signed payloads

def paper_payload(paper_hash):
    return canonicalize(["paper", paper_hash])


def accept_payload(round_id):
    return canonicalize(["review-accept", round_id])


def confirm_payload(round_id):
    return canonicalize(["review-confirm", round_id])


def round_id_for(paper_hash, journal_id, seq):
    return content_hash(canonicalize(["round", paper_hash, journal_id, seq]))


def pseudonym_token(reviewer, round_id, salt):
    """Per-round commitment to a reviewer; unlinkable across rounds without the salt."""
    return content_hash(canonicalize(["pseudonym", reviewer, round_id, bytes(salt)]))


# Pure rules

def decide_publication(scores):
    """Accept iff the mean of the submitted scores is strictly greater than 3."""
    values = list(scores.values()) if isinstance(scores, dict) else list(scores)
    if not values:
        raise TooFewReviews("no review was submitted")
    return Fraction(sum(values), len(values)) > ACCEPT_ABOVE


def final_acceptance(votes, reviewers):
    """Strict majority of the assigned reviewers must approve the final version."""
    approvals = sum(1 for r in reviewers if votes.get(r) is True)
    return approvals * 2 > len(reviewers)


def minimum_reviews(n_j):
    return math.ceil(n_j / 2)


def draw_reviewers(eligible, n, journal_id, paper_hash, nonce):
    """
    Draw ``n`` reviewers uniformly without replacement.

    Args:
        eligible: Candidate PersonIds (board minus authors)
        n: Reviewers per paper
        journal_id: Journal the round belongs to
        paper_hash: Reviewed paper
        nonce: Round nonce

    Returns:
        Sorted tuple of PersonIds
    """
    pool = sorted(eligible)
    if len(pool) < n:
        raise NotEnoughEligibleReviewers("board too small after excluding authors", eligible=len(pool), needed=n)
    seed = content_hash(canonicalize(["assign", journal_id, paper_hash, nonce]))
    rng = np.random.default_rng(int.from_bytes(seed.digest, "big"))
    picks = rng.choice(len(pool), size=n, replace=False)
    return tuple(sorted(pool[int(i)] for i in picks))


def check_score(score):
    if not isinstance(score, int) or isinstance(score, bool) or not MIN_SCORE <= score <= MAX_SCORE:
        raise ScoreOutOfRange("scores are integers from 1 to 5", score=score)
    return score


# Operations on rounds (pure: they return the new round)

def submit_review_bid(state, paper_hash, journal_id, payer, fee, seq, day):
    paper = state.paper(paper_hash)
    state.journal(journal_id)
    if not state.is_current(journal_id):
        raise JournalSuperseded("cannot submit to an ancestor journal", journal=journal_id.hex[:12])
    if payer not in paper.authors:
        raise PreconditionFailed("only an author may bid for review")
    if paper_hash in state.publications:
        raise PreconditionFailed("paper is already published", paper=paper_hash.hex[:12])
    if any(r.paper == paper_hash and r.status in OPEN_STATUSES for r in state.rounds.values()):
        raise PreconditionFailed("paper already has an open review round", paper=paper_hash.hex[:12])
    state.require_funds(person_account(payer), fee)
    return ReviewRound(
        id=round_id_for(paper_hash, journal_id, seq),
        paper=paper_hash,
        journal=journal_id,
        payer=payer,
        fee=fee,
        created_at=day,
    )


def _require_status(review_round, *statuses):
    if review_round.status not in statuses:
        raise WrongStatus(
            "round is not in the expected status",
            status=review_round.status.value,
            expected="|".join(s.value for s in statuses),
        )


def vote_accept_for_review(state, review_round, approvals, confirmation):
    """
    Resolve the r_j acceptance vote.

    Returns the new round; a failed vote returns a FAILED round whose fee is
    refunded in full, with the reason in ``failure``.
    """
    _require_status(review_round, RoundStatus.BID)
    journal = state.journal(review_round.journal)

    failure = None
    if not state.is_current(journal.id):
        failure = JournalSuperseded.code
    else:
        check = state.check_quorum(journal.members, journal.params.r_j, approvals, accept_payload(review_round.id))
        confirmed = (
            confirmation is not None
            and confirmation.signer == review_round.payer
            and state.keys.verify(confirm_payload(review_round.id), confirmation)
        )
        if not check.met:
            failure = QuorumNotMet.code
        elif not confirmed:
            failure = "MISSING_CONFIRMATION"

    if failure is not None:
        payout = Payout(reviewer_amounts={}, journal_share=0, refund_to_authors=review_round.fee)
        return replace(review_round, status=RoundStatus.FAILED, payout=payout, failure=failure)
    return replace(review_round, status=RoundStatus.ACCEPTED_FOR_REVIEW)


def assign_reviewers(state, review_round, day):
    _require_status(review_round, RoundStatus.ACCEPTED_FOR_REVIEW)
    journal = state.journal(review_round.journal)
    paper = state.paper(review_round.paper)
    eligible = journal.members - paper.authors
    reviewers = draw_reviewers(eligible, journal.params.n_j, journal.id, paper.hash, review_round.id)
    tokens = tuple(pseudonym_token(r, review_round.id, state.salt) for r in reviewers)
    return replace(
        review_round,
        status=RoundStatus.UNDER_REVIEW,
        reviewers=reviewers,
        tokens=tokens,
        deadline=day + journal.params.t_j,
    )


def submit_review(review_round, reviewer, score, report_hash, day):
    _require_status(review_round, RoundStatus.UNDER_REVIEW)
    if reviewer not in review_round.reviewers:
        raise NotAssigned("reviewer is not assigned to this round")
    if day > review_round.deadline:
        raise PastDeadline("review deadline has passed", deadline=review_round.deadline, day=day)
    if reviewer in review_round.scores:
        raise DuplicateReview("reviewer already scored this round")
    check_score(score)
    return replace(
        review_round,
        scores={**review_round.scores, reviewer: score},
        reports={**review_round.reports, reviewer: report_hash},
    )


def decide_round(state, review_round, day):
    """
    Publication decision once all reviews are in or the deadline has passed.

    Missing reviewers forfeit. With fewer than ceil(n_j / 2) reviews at the
    deadline the round fails: the journal keeps f_j * f_r and the rest is
    refunded.
    """
    _require_status(review_round, RoundStatus.UNDER_REVIEW)
    journal = state.journal(review_round.journal)
    complete = len(review_round.scores) == len(review_round.reviewers)
    if not complete and day <= review_round.deadline:
        raise ReviewsPending(
            "reviews outstanding before the deadline",
            got=len(review_round.scores),
            needed=len(review_round.reviewers),
        )
    if len(review_round.scores) < minimum_reviews(journal.params.n_j):
        payout = split_failed_round(review_round.fee, journal.params.f_j)
        return replace(review_round, status=RoundStatus.FAILED, payout=payout, failure=TooFewReviews.code)
    return replace(
        review_round,
        status=RoundStatus.DECIDED,
        decision=decide_publication(review_round.scores),
        decided_at=day,
    )


def submit_final_version(state, review_round, author, version_hash, day):
    _require_status(review_round, RoundStatus.DECIDED)
    if not review_round.decision:
        raise WrongStatus("only accepted papers have a final version")
    if author not in state.paper(review_round.paper).authors:
        raise PreconditionFailed("only an author may submit the final version")
    t_j = state.journal(review_round.journal).params.t_j
    if day > review_round.decided_at + t_j:
        raise PastDeadline("final version deadline has passed", deadline=review_round.decided_at + t_j)
    return replace(
        review_round,
        status=RoundStatus.FINAL_VOTE,
        final_version=version_hash,
        final_deadline=day + t_j,
    )


def cast_final_vote(review_round, reviewer, approve, day):
    _require_status(review_round, RoundStatus.FINAL_VOTE)
    if reviewer not in review_round.reviewers:
        raise VoteFromNonReviewer("only the round's reviewers vote on the final version")
    if reviewer in review_round.final_votes:
        raise Duplicate("reviewer already voted")
    if day > review_round.final_deadline:
        raise PastDeadline("final vote deadline has passed", deadline=review_round.final_deadline)
    return replace(review_round, final_votes={**review_round.final_votes, reviewer: bool(approve)})


def settle_round(state, review_round, day):
    """
    Pay the fee split over the submitted scores and publish on a majority vote.

    Returns:
        new_round: SETTLED round carrying its Payout
        published: True when the paper enters the journal
    """
    journal = state.journal(review_round.journal)
    status = review_round.status
    if status == RoundStatus.DECIDED:
        if review_round.decision and day <= review_round.decided_at + journal.params.t_j:
            raise ReviewsPending("waiting for the final version", deadline=review_round.decided_at + journal.params.t_j)
    elif status == RoundStatus.FINAL_VOTE:
        if len(review_round.final_votes) < len(review_round.reviewers) and day <= review_round.final_deadline:
            raise ReviewsPending("final votes outstanding", deadline=review_round.final_deadline)
    else:
        _require_status(review_round, RoundStatus.DECIDED, RoundStatus.FINAL_VOTE)

    payout = split_review_fee(review_round.fee, journal.params.f_j, review_round.scores)
    published = (
        status == RoundStatus.FINAL_VOTE
        and bool(review_round.decision)
        and final_acceptance(review_round.final_votes, review_round.reviewers)
    )
    return replace(review_round, status=RoundStatus.SETTLED, payout=payout), published


def execute_payout(state, review_round):
    """Move the escrowed fee according to the round's Payout."""
    payout = review_round.payout
    if payout.total != review_round.fee:
        raise PreconditionFailed("payout does not conserve the fee", fee=review_round.fee, total=payout.total)
    state.transfer(review_round.escrow, journal_account(review_round.journal), payout.journal_share)
    for reviewer in sorted(payout.reviewer_amounts):
        state.transfer(review_round.escrow, person_account(reviewer), payout.reviewer_amounts[reviewer])
    state.transfer(review_round.escrow, person_account(review_round.payer), payout.refund_to_authors)


def public_view(state, review_round):
    """Round as published; reviewers appear as pseudonym tokens on anonymous journals."""
    anonymous = state.journal(review_round.journal).params.a_j
    names = {
        reviewer: (token.hex if anonymous else reviewer.hex)
        for reviewer, token in zip(review_round.reviewers, review_round.tokens)
    }
    view = {
        "round": review_round.id.hex,
        "paper": review_round.paper.hex,
        "journal": review_round.journal.hex,
        "fee": review_round.fee,
        "status": review_round.status.value,
        "deadline": review_round.deadline,
        "reviewers": sorted(names.values()),
        "scores": {names[r]: s for r, s in review_round.scores.items()},
        "reports": {names[r]: h.hex for r, h in review_round.reports.items()},
        "decision": review_round.decision,
        "final_version": review_round.final_version.hex if review_round.final_version else None,
        "final_votes": {names[r]: v for r, v in review_round.final_votes.items()},
        "failure": review_round.failure,
    }
    if review_round.payout is not None:
        view["payout"] = {
            "journal_share": review_round.payout.journal_share,
            "refund_to_authors": review_round.payout.refund_to_authors,
            "reviewers": {names[r]: a for r, a in review_round.payout.reviewer_amounts.items()},
        }
    return view


# Event handlers

def _hashes(body, name):
    values = body.get(name) or []
    if not isinstance(values, (list, frozenset)):
        raise PreconditionFailed("malformed hash list", field=name)
    return [hash_field({name: v}, name) for v in values]


@handles(EventKind.PAPER_PUBLISH)
def apply_paper_publish(state, event):
    body = event.body
    paper_hash = hash_field(body, "paper")
    authors = people_field(body, "authors")
    signatures = signatures_field(body, "signatures")
    if paper_hash in state.papers:
        raise Duplicate("paper already published", paper=paper_hash.hex[:12])
    if event.actor not in authors:
        raise PreconditionFailed("the publisher must be an author")
    signed = {s.signer for s in signatures if state.keys.verify(paper_payload(paper_hash), s)}
    if not authors <= signed:
        raise PreconditionFailed("every author must sign the paper hash", missing=len(authors - signed))
    keywords = body.get("keywords") or []
    if not all(isinstance(k, str) for k in keywords):
        raise PreconditionFailed("keywords must be strings")
    cites = frozenset(_hashes(body, "cites"))

    state.papers[paper_hash] = Paper(
        hash=paper_hash,
        authors=authors,
        author_signatures=tuple(sorted(signatures, key=lambda s: s.signer)),
        keywords=frozenset(keywords),
        cites=cites,
        published_at=event.timestamp,
    )
    state.citations[paper_hash] = {cited: event.timestamp for cited in cites}


@handles(EventKind.CITATION_DECLARE)
def apply_citation_declare(state, event):
    paper = state.paper(hash_field(event.body, "paper"))
    if event.actor not in paper.authors:
        raise PreconditionFailed("only an author may declare citations")
    cites = _hashes(event.body, "cites")
    declared = dict(state.citations.get(paper.hash, {}))
    for cited in cites:
        declared.setdefault(cited, event.timestamp)
    state.citations[paper.hash] = declared


@handles(EventKind.REVIEW_BID)
def apply_review_bid(state, event):
    body = event.body
    review_round = submit_review_bid(
        state,
        hash_field(body, "paper"),
        hash_field(body, "journal"),
        event.actor,
        int_field(body, "fee"),
        event.seq,
        event.timestamp,
    )
    state.transfer(person_account(event.actor), review_round.escrow, review_round.fee)
    state.rounds[review_round.id] = review_round
    logger.info("Review round %s opened (fee %d)", review_round.id.hex[:12], review_round.fee)


@handles(EventKind.REVIEW_ACCEPT_VOTE)
def apply_review_accept_vote(state, event):
    body = event.body
    review_round = state.round(hash_field(body, "round"))
    confirmation = body.get("confirmation")
    updated = vote_accept_for_review(
        state,
        review_round,
        signatures_field(body, "approvals"),
        Signature.from_body(confirmation) if confirmation is not None else None,
    )
    if updated.status == RoundStatus.FAILED:
        execute_payout(state, updated)
        logger.warning("Round %s refused for review: %s", updated.id.hex[:12], updated.failure)
    state.rounds[updated.id] = updated


@handles(EventKind.REVIEWER_ASSIGNMENT)
def apply_reviewer_assignment(state, event):
    review_round = state.round(hash_field(event.body, "round"))
    if event.actor not in state.journal(review_round.journal).members:
        raise PreconditionFailed("only a board member triggers the assignment")
    updated = assign_reviewers(state, review_round, event.timestamp)
    state.rounds[updated.id] = updated


@handles(EventKind.REVIEW_SUBMIT)
def apply_review_submit(state, event):
    body = event.body
    review_round = state.round(hash_field(body, "round"))
    updated = submit_review(review_round, event.actor, body.get("score"), hash_field(body, "report"), event.timestamp)
    state.rounds[updated.id] = updated


@handles(EventKind.PUBLICATION_DECISION)
def apply_publication_decision(state, event):
    review_round = state.round(hash_field(event.body, "round"))
    updated = decide_round(state, review_round, event.timestamp)
    if updated.status == RoundStatus.FAILED:
        execute_payout(state, updated)
        logger.warning("Round %s failed: %s", updated.id.hex[:12], updated.failure)
    state.rounds[updated.id] = updated


@handles(EventKind.FINAL_VERSION)
def apply_final_version(state, event):
    body = event.body
    review_round = state.round(hash_field(body, "round"))
    updated = submit_final_version(state, review_round, event.actor, hash_field(body, "version"), event.timestamp)
    state.rounds[updated.id] = updated


@handles(EventKind.FINAL_VOTE)
def apply_final_vote(state, event):
    body = event.body
    review_round = state.round(hash_field(body, "round"))
    approve = body.get("approve")
    if not isinstance(approve, bool):
        raise PreconditionFailed("final vote must be true or false")
    updated = cast_final_vote(review_round, event.actor, approve, event.timestamp)
    state.rounds[updated.id] = updated


@handles(EventKind.FEE_SETTLEMENT)
def apply_fee_settlement(state, event):
    review_round = state.round(hash_field(event.body, "round"))
    updated, published = settle_round(state, review_round, event.timestamp)
    execute_payout(state, updated)
    state.rounds[updated.id] = updated
    if published:
        state.publications[updated.paper] = Publication(updated.paper, updated.journal, event.timestamp)
    logger.info("Round %s settled; published=%s", updated.id.hex[:12], published)


def rounds_for_paper(state, paper_hash):
    if paper_hash not in state.papers:
        raise UnknownEntity("unknown paper", paper=paper_hash.hex[:12])
    return sorted((r for r in state.rounds.values() if r.paper == paper_hash), key=lambda r: r.created_at)
