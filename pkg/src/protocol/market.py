"""
Minimal journal-free review market.

Reviewers publish an ask R_i with keywords and a capacity; authors escrow a
bid R_p. A match picks the reviewers with the highest total reputation score
(RS) whose asks fit the bid. Review happens in two steps: reviewers score the
paper, then score each other's reports. Settlement pays each reviewer whose
reports were rated well enough and refunds everything else to the authors.
"""
import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from fractions import Fraction

from src.algorithms.allocation import as_fraction
from src.algorithms.matching import Candidate, select_reviewers
from src.protocol.canonical import canonicalize
from src.protocol.errors import (
    Duplicate,
    NotEnoughReviewers,
    NotMatched,
    PreconditionFailed,
    SelfScore,
    WrongStatus,
)
from src.protocol.events import EventKind
from src.protocol.identity import ContentHash, content_hash
from src.protocol.review import check_score
from src.protocol.state import (
    escrow_account,
    handles,
    hash_field,
    int_field,
    person_account,
    person_field,
)
from src.utils.config import PROTOCOL_DEFAULTS

logger = logging.getLogger(__name__)


class SubmissionStatus(Enum):
    SUBMITTED = "Submitted"
    MATCHED = "Matched"
    SCORED = "Scored"
    REPORT_SCORED = "ReportScored"
    SETTLED = "Settled"
    WITHDRAWN = "Withdrawn"
    EXPIRED = "Expired"


@dataclass(frozen=True)
class ScientistProfile:
    person: object
    keywords: frozenset
    rs: float
    ask: int
    capacity: int
    active: int = 0
    reviews: int = 0

    @property
    def has_capacity(self):
        return self.active < self.capacity


@dataclass(frozen=True)
class FieldThresholds:
    """Acceptance threshold per keyword field; the strictest applicable one wins."""

    thresholds: dict = field(default_factory=dict)
    default: float = PROTOCOL_DEFAULTS['default_threshold']

    def for_keywords(self, keywords):
        configured = [self.thresholds[k] for k in keywords if k in self.thresholds]
        return max(configured) if configured else self.default


@dataclass(frozen=True)
class MarketSubmission:
    id: ContentHash
    paper: ContentHash
    payer: object
    authors: frozenset
    keywords: frozenset
    bid: int
    seq: int
    created_at: int
    status: SubmissionStatus = SubmissionStatus.SUBMITTED
    reviewers: tuple = ()
    asks: dict = field(default_factory=dict)
    paper_scores: dict = field(default_factory=dict)
    reports: dict = field(default_factory=dict)
    report_scores: dict = field(default_factory=dict)
    settlement: object = None
    matched_at: int | None = None
    journal_bids: tuple = ()

    @property
    def escrow(self):
        return escrow_account("market", self.id)


@dataclass(frozen=True)
class MarketSettlement:
    payments: dict
    refund: int
    report_means: dict
    paper_score: Fraction
    threshold: float
    accepted: bool
    rs_before: dict
    rs_after: dict

    @property
    def total(self):
        return sum(self.payments.values()) + self.refund


@dataclass(frozen=True)
class JournalBid:
    journal: ContentHash
    bidder: object
    offer: int
    day: int


def submission_id_for(paper_hash, seq):
    return content_hash(canonicalize(["market", paper_hash, seq]))


# Pure rules

def eligible_profiles(profiles, keywords, exclude=frozenset()):
    """Profiles sharing a keyword with spare capacity, excluding ``exclude`` (the authors)."""
    keywords = frozenset(keywords)
    return [
        p for p in sorted(profiles.values(), key=lambda p: p.person)
        if p.keywords & keywords and p.has_capacity and p.person not in exclude
    ]


def match_reviewers(submission, profiles, n=3):
    """
    Match a submission to reviewers.

    Args:
        submission: MarketSubmission in SUBMITTED status
        profiles: Mapping PersonId -> ScientistProfile
        n: Reviewers per paper

    Returns:
        selected: List of Candidate sorted by person
        results: Dictionary with additional information
    """
    pool = eligible_profiles(profiles, submission.keywords, submission.authors)
    candidates = [Candidate(person=p.person, rs=p.rs, ask=p.ask) for p in pool]
    return select_reviewers(candidates, submission.bid, n)


def score_paper(submission, reviewer, score, report_hash):
    """Step 1: a matched reviewer scores the paper and publishes a report."""
    if submission.status != SubmissionStatus.MATCHED:
        raise WrongStatus("paper scoring is closed", status=submission.status.value)
    if reviewer not in submission.reviewers:
        raise NotMatched("reviewer is not matched to this submission")
    if reviewer in submission.paper_scores:
        raise Duplicate("reviewer already scored the paper")
    check_score(score)
    paper_scores = {**submission.paper_scores, reviewer: score}
    status = SubmissionStatus.SCORED if len(paper_scores) == len(submission.reviewers) else submission.status
    return replace(
        submission,
        paper_scores=paper_scores,
        reports={**submission.reports, reviewer: report_hash},
        status=status,
    )


def score_reports(submission, scorer, scores):
    """Step 2: a reviewer rates every other reviewer's report."""
    if submission.status != SubmissionStatus.SCORED:
        raise WrongStatus("report scoring is not open", status=submission.status.value)
    if scorer not in submission.reviewers:
        raise NotMatched("scorer is not matched to this submission")
    if scorer in scores:
        raise SelfScore("reviewers cannot score their own report")
    if scorer in submission.report_scores:
        raise Duplicate("reviewer already scored the reports")
    expected = set(submission.reviewers) - {scorer}
    if set(scores) != expected:
        raise NotMatched("report scores must cover exactly the other reviewers")
    for value in scores.values():
        check_score(value)
    report_scores = {**submission.report_scores, scorer: dict(scores)}
    status = (
        SubmissionStatus.REPORT_SCORED
        if len(report_scores) == len(submission.reviewers)
        else submission.status
    )
    return replace(submission, report_scores=report_scores, status=status)


def report_means(submission):
    """Mean report score received by each reviewer."""
    received = {r: [] for r in submission.reviewers}
    for scorer in sorted(submission.report_scores):
        for scoree, value in submission.report_scores[scorer].items():
            received[scoree].append(value)
    return {r: Fraction(sum(v), len(v)) for r, v in received.items() if v}


def updated_rs(rs, mean, mode, weight):
    if mode == "ema":
        w = float(weight)
        return (1 - w) * rs + w * float(mean)
    return rs + float(mean)


def settle(submission, profiles, thresholds, theta_report, rs_mode="additive", rs_ema_weight=0.5):
    """
    Settle a fully scored submission.

    Each reviewer whose mean report score is at least ``theta_report`` collects
    their ask; other asks and the unmatched leftover return to the authors.
    The paper is accepted iff its mean score exceeds the field threshold.

    Returns:
        MarketSettlement with payments + refund == bid
    """
    if submission.status != SubmissionStatus.REPORT_SCORED:
        raise WrongStatus("submission is not ready to settle", status=submission.status.value)
    means = report_means(submission)
    theta = as_fraction(theta_report)

    payments = {}
    for reviewer in submission.reviewers:
        mean = means.get(reviewer)
        payments[reviewer] = submission.asks[reviewer] if mean is not None and mean >= theta else 0
    refund = submission.bid - sum(payments.values())

    tau = thresholds.for_keywords(submission.keywords)
    paper_score = Fraction(sum(submission.paper_scores.values()), len(submission.paper_scores))
    rs_before = {r: profiles[r].rs for r in submission.reviewers}
    rs_after = {
        r: updated_rs(rs_before[r], means.get(r, 0), rs_mode, rs_ema_weight)
        for r in submission.reviewers
    }
    return MarketSettlement(
        payments=payments,
        refund=refund,
        report_means=means,
        paper_score=paper_score,
        threshold=float(tau),
        accepted=paper_score > as_fraction(tau),
        rs_before=rs_before,
        rs_after=rs_after,
    )


def withdraw_submission(submission, actor, day, review_days):
    """
    Close a submission without settlement.

    The payer may withdraw a queued submission at any time. A matched one
    expires once more than ``review_days`` have passed since the match
    without every report being scored; then anyone may close it. The whole
    escrow returns to the payer and reviewers are paid nothing.
    """
    status = submission.status
    if status == SubmissionStatus.SUBMITTED:
        if actor != submission.payer:
            raise PreconditionFailed("only the payer withdraws a queued submission")
    elif status in (SubmissionStatus.MATCHED, SubmissionStatus.SCORED):
        deadline = submission.matched_at + review_days
        if day <= deadline:
            raise PreconditionFailed("the review period is still running", deadline=deadline)
    else:
        raise WrongStatus("submission cannot be withdrawn", status=status.value)
    return replace(submission, status=SubmissionStatus.EXPIRED)


def overdue_submissions(state, day):
    """Matched submissions whose review period ended before ``day``, in ledger order."""
    open_review = (SubmissionStatus.MATCHED, SubmissionStatus.SCORED)
    return sorted(
        (
            s for s in state.submissions.values()
            if s.status in open_review and day > s.matched_at + state.rules.market_review_days
        ),
        key=lambda s: s.seq,
    )


def suggest_fair_bid(profiles, keywords, factor=PROTOCOL_DEFAULTS['fair_bid_factor'], exclude=frozenset(), n=3):
    """Sum of the ``n`` cheapest eligible asks times ``factor``, rounded up."""
    pool = eligible_profiles(profiles, keywords, exclude)
    if len(pool) < n:
        raise NotEnoughReviewers("not enough eligible reviewers", eligible=len(pool), needed=n)
    cheapest = sorted(p.ask for p in pool)[:n]
    return math.ceil(sum(cheapest) * as_fraction(factor))


def field_thresholds(rules):
    return FieldThresholds(thresholds=dict(rules.thresholds), default=rules.default_threshold)


def queued_submissions(state):
    """Submissions waiting for a match, in ledger order."""
    return sorted(
        (s for s in state.submissions.values() if s.status == SubmissionStatus.SUBMITTED),
        key=lambda s: s.seq,
    )


def public_record(state, submission):
    """Public record of a market submission; certified papers carry their full review trail."""
    record = {
        "submission": submission.id.hex,
        "paper": submission.paper.hex,
        "status": submission.status.value,
        "keywords": sorted(submission.keywords),
        "bid": submission.bid,
        "reviewers": [r.hex for r in submission.reviewers],
    }
    settlement = submission.settlement
    if settlement is not None:
        record.update({
            "paper_score": float(settlement.paper_score),
            "threshold": settlement.threshold,
            "accepted": settlement.accepted,
            "paper_scores": {r.hex: s for r, s in submission.paper_scores.items()},
            "reports": {r.hex: h.hex for r, h in submission.reports.items()},
            "report_scores": {
                scorer.hex: {scoree.hex: s for scoree, s in given.items()}
                for scorer, given in submission.report_scores.items()
            },
            "report_means": {r.hex: float(m) for r, m in settlement.report_means.items()},
            "reviewer_rs": {r.hex: settlement.rs_after[r] for r in submission.reviewers},
            "payments": {r.hex: a for r, a in settlement.payments.items()},
            "refund": settlement.refund,
        })
    if submission.journal_bids:
        record["journal_bids"] = [
            {"journal": b.journal.hex, "offer": b.offer, "day": b.day} for b in submission.journal_bids
        ]
    return record


# Event handlers

def _keywords(body, name):
    values = body.get(name) or []
    if not isinstance(values, (list, frozenset)) or not all(isinstance(k, str) and k for k in values):
        raise PreconditionFailed("keywords must be non-empty strings", field=name)
    return frozenset(values)


@handles(EventKind.MARKET_ASK)
def apply_market_ask(state, event):
    body = event.body
    ask = int_field(body, "ask")
    capacity = int_field(body, "capacity")
    keywords = _keywords(body, "keywords")
    if ask < 0 or capacity < 0:
        raise PreconditionFailed("ask and capacity must be non-negative", ask=ask, capacity=capacity)
    profile = state.profiles.get(event.actor)
    if profile is None:
        profile = ScientistProfile(
            person=event.actor, keywords=keywords, rs=float(state.rules.initial_rs), ask=ask, capacity=capacity
        )
    else:
        profile = replace(profile, keywords=keywords, ask=ask, capacity=capacity)
    state.profiles[event.actor] = profile


@handles(EventKind.MARKET_SUBMIT)
def apply_market_submit(state, event):
    body = event.body
    paper = state.paper(hash_field(body, "paper"))
    bid = int_field(body, "bid")
    keywords = _keywords(body, "keywords") or paper.keywords
    if event.actor not in paper.authors:
        raise PreconditionFailed("only an author may submit the paper")
    if not keywords:
        raise PreconditionFailed("a submission needs at least one keyword")
    state.require_funds(person_account(event.actor), bid)

    submission = MarketSubmission(
        id=submission_id_for(paper.hash, event.seq),
        paper=paper.hash,
        payer=event.actor,
        authors=paper.authors,
        keywords=keywords,
        bid=bid,
        seq=event.seq,
        created_at=event.timestamp,
    )
    state.transfer(person_account(event.actor), submission.escrow, bid)
    state.submissions[submission.id] = submission


@handles(EventKind.MARKET_MATCH)
def apply_market_match(state, event):
    submission = state.submission(hash_field(event.body, "submission"))
    if submission.status != SubmissionStatus.SUBMITTED:
        raise WrongStatus("submission is already matched", status=submission.status.value)
    selected, results = match_reviewers(submission, state.profiles, state.rules.market_reviewers)

    for candidate in selected:
        profile = state.profiles[candidate.person]
        state.profiles[candidate.person] = replace(profile, active=profile.active + 1)
    state.submissions[submission.id] = replace(
        submission,
        status=SubmissionStatus.MATCHED,
        reviewers=tuple(c.person for c in selected),
        asks={c.person: c.ask for c in selected},
        matched_at=event.timestamp,
    )
    logger.info(
        "Submission %s matched: total RS %.3f, leftover %d",
        submission.id.hex[:12], results["total_rs"], results["leftover"],
    )


@handles(EventKind.MARKET_REVIEW)
def apply_market_review(state, event):
    body = event.body
    submission = state.submission(hash_field(body, "submission"))
    updated = score_paper(submission, event.actor, body.get("score"), hash_field(body, "report"))
    state.submissions[updated.id] = updated


@handles(EventKind.MARKET_REPORT_SCORE)
def apply_market_report_score(state, event):
    body = event.body
    submission = state.submission(hash_field(body, "submission"))
    raw = body.get("scores")
    if not isinstance(raw, dict):
        raise PreconditionFailed("malformed report scores")
    scores = {person_field(k): v for k, v in raw.items()}
    updated = score_reports(submission, event.actor, scores)
    state.submissions[updated.id] = updated


@handles(EventKind.MARKET_SETTLEMENT)
def apply_market_settlement(state, event):
    submission = state.submission(hash_field(event.body, "submission"))
    rules = state.rules
    result = settle(
        submission,
        state.profiles,
        field_thresholds(rules),
        rules.theta_report,
        rules.rs_mode,
        rules.rs_ema_weight,
    )
    if result.total != submission.bid:
        raise PreconditionFailed("settlement does not conserve the bid")

    for reviewer in submission.reviewers:
        state.transfer(submission.escrow, person_account(reviewer), result.payments[reviewer])
        profile = state.profiles[reviewer]
        keywords = profile.keywords | submission.keywords if rules.learn_keywords else profile.keywords
        state.profiles[reviewer] = replace(
            profile,
            rs=result.rs_after[reviewer],
            active=profile.active - 1,
            reviews=profile.reviews + 1,
            keywords=keywords,
        )
    state.transfer(submission.escrow, person_account(submission.payer), result.refund)
    status = SubmissionStatus.SETTLED if result.accepted else SubmissionStatus.WITHDRAWN
    state.submissions[submission.id] = replace(submission, status=status, settlement=result)
    logger.info("Submission %s %s (S_p=%.3f)", submission.id.hex[:12], status.value, float(result.paper_score))


@handles(EventKind.MARKET_JOURNAL_BID)
def apply_market_journal_bid(state, event):
    body = event.body
    submission = state.submission(hash_field(body, "submission"))
    journal_id = hash_field(body, "journal")
    offer = int_field(body, "offer")
    journal = state.journal(journal_id)
    if submission.status != SubmissionStatus.SETTLED:
        raise WrongStatus("journals bid only on certified papers", status=submission.status.value)
    if not state.is_current(journal_id):
        raise PreconditionFailed("journal has a descendant", journal=journal_id.hex[:12])
    if event.actor not in journal.members:
        raise PreconditionFailed("only a board member bids for the journal")
    if offer < 0:
        raise PreconditionFailed("offer must be non-negative")
    bid = JournalBid(journal=journal_id, bidder=event.actor, offer=offer, day=event.timestamp)
    state.submissions[submission.id] = replace(submission, journal_bids=submission.journal_bids + (bid,))


@handles(EventKind.MARKET_WITHDRAW)
def apply_market_withdraw(state, event):
    submission = state.submission(hash_field(event.body, "submission"))
    updated = withdraw_submission(submission, event.actor, event.timestamp, state.rules.market_review_days)
    for reviewer in submission.reviewers:
        profile = state.profiles[reviewer]
        state.profiles[reviewer] = replace(profile, active=profile.active - 1)
    refund = state.balance(submission.escrow)
    state.transfer(submission.escrow, person_account(submission.payer), refund)
    state.submissions[submission.id] = updated
    logger.info("Submission %s closed without settlement, %d refunded", submission.id.hex[:12], refund)
