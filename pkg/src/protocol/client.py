"""Builds, signs and appends protocol events on behalf of key holders."""
import copy
import logging

from src.protocol.errors import NoFeasibleMatch
from src.protocol.events import EventKind, make_event
from src.protocol.identity import sign
from src.protocol.journal import (
    BoardChange,
    create_payload,
    join_payload,
    journal_id_for,
    modify_payload,
    spend_payload,
    transfer_payload,
)
from src.protocol.ledger import genesis_event
from src.protocol.market import overdue_submissions, queued_submissions, submission_id_for
from src.protocol.review import accept_payload, confirm_payload, paper_payload, round_id_for

logger = logging.getLogger(__name__)


def _people(people):
    return sorted(p.fingerprint for p in people)


def _signatures(signatures):
    return [s.to_body() for s in signatures]


class ProtocolClient:
    """
    Thin facade over a Ledger: one method per protocol step.

    Args:
        ledger: Ledger to append to
        append: Callable persisting an event (defaults to ``ledger.append``)
        dry_run: Validate events against a scratch copy and never append
    """

    def __init__(self, ledger, append=None, dry_run=False):
        self.ledger = ledger
        self._append = append or ledger.append
        self.dry_run = dry_run
        self.day = ledger.state.day

    @property
    def state(self):
        return self.ledger.state

    def submit(self, key, kind, body, day=None):
        day = self.day if day is None else day
        event = make_event(key, self.ledger.next_seq, self.ledger.head_hash, day, kind, body)
        if self.dry_run:
            copy.deepcopy(self.ledger).append(event)
            logger.info("Dry run: %s would be appended as #%d", kind.value, event.seq)
            return event
        return self._append(event)

    @staticmethod
    def approve(keys, payload):
        return [sign(key, payload) for key in keys]

    # Identity and money

    def genesis(self, registrar_key, rules, day=0):
        event = genesis_event(registrar_key, rules, day)
        if self.dry_run:
            return event
        return self._append(event)

    def register_key(self, actor_key, public, scheme, validated=False):
        body = {"public": public, "scheme": scheme, "validated": validated}
        return self.submit(actor_key, EventKind.KEY_REGISTER, body)

    def mint(self, registrar_key, person, amount):
        return self.submit(registrar_key, EventKind.MINT, {"amount": amount, "to": person.fingerprint})

    # Journals

    def create_journal(self, actor_key, founder_keys, params):
        signers = {k.person_id: k for k in [actor_key, *founder_keys]}
        founders = set(signers)
        signatures = self.approve(signers.values(), create_payload(founders, params))
        body = {"founders": _people(founders), "params": params.to_body(), "signatures": _signatures(signatures)}
        self.submit(actor_key, EventKind.JOURNAL_CREATE, body)
        return journal_id_for(founders, params, None)

    def modify_journal(self, actor_key, journal_id, change, approver_keys=()):
        approvals = self.approve(approver_keys, modify_payload(journal_id, change))
        body = {"approvals": _signatures(approvals), "change": change.to_body(), "journal": journal_id.digest}
        self.submit(actor_key, EventKind.JOURNAL_MODIFY, body)
        return self.state.descendant.get(journal_id)

    def leave_journal(self, actor_key, journal_id):
        return self.modify_journal(actor_key, journal_id, BoardChange(remove=frozenset({actor_key.person_id})))

    def join_bid(self, candidate_key, journal_id, bid):
        return self.submit(candidate_key, EventKind.JOIN_BID, {"bid": bid, "journal": journal_id.digest})

    def decide_join(self, actor_key, journal_id, approver_keys=()):
        pending = self.state.pending_joins[journal_id]
        approvals = self.approve(approver_keys, join_payload(journal_id, pending.candidate, pending.bid))
        body = {
            "approvals": _signatures(approvals),
            "candidate": pending.candidate.fingerprint,
            "journal": journal_id.digest,
        }
        self.submit(actor_key, EventKind.JOIN_DECISION, body)
        return self.state.descendant.get(journal_id)

    def spend(self, actor_key, journal_id, amount, recipient, approver_keys=()):
        payload = spend_payload(journal_id, amount, recipient, self.ledger.next_seq)
        body = {
            "amount": amount,
            "approvals": _signatures(self.approve(approver_keys, payload)),
            "journal": journal_id.digest,
            "recipient": recipient.fingerprint,
        }
        return self.submit(actor_key, EventKind.BALANCE_SPEND, body)

    def transfer(self, actor_key, ancestor_id, descendant_id, approver_keys=()):
        payload = transfer_payload(ancestor_id, descendant_id, self.ledger.next_seq)
        body = {
            "ancestor": ancestor_id.digest,
            "approvals": _signatures(self.approve(approver_keys, payload)),
            "descendant": descendant_id.digest,
        }
        return self.submit(actor_key, EventKind.BALANCE_TRANSFER, body)

    # Papers and review rounds

    def publish_paper(self, actor_key, paper_hash, author_keys=(), keywords=(), cites=()):
        author_keys = list(author_keys) or [actor_key]
        if actor_key.person_id not in {k.person_id for k in author_keys}:
            author_keys.append(actor_key)
        signatures = self.approve(author_keys, paper_payload(paper_hash))
        body = {
            "authors": _people({k.person_id for k in author_keys}),
            "cites": sorted(c.digest for c in cites),
            "keywords": sorted(keywords),
            "paper": paper_hash.digest,
            "signatures": _signatures(signatures),
        }
        return self.submit(actor_key, EventKind.PAPER_PUBLISH, body)

    def declare_citations(self, author_key, paper_hash, cites):
        body = {"cites": sorted(c.digest for c in cites), "paper": paper_hash.digest}
        return self.submit(author_key, EventKind.CITATION_DECLARE, body)

    def review_bid(self, author_key, paper_hash, journal_id, fee):
        event = self.submit(
            author_key, EventKind.REVIEW_BID, {"fee": fee, "journal": journal_id.digest, "paper": paper_hash.digest}
        )
        return round_id_for(paper_hash, journal_id, event.seq)

    def accept_for_review(self, actor_key, round_id, approver_keys=(), confirm_key=None):
        approvals = self.approve(approver_keys, accept_payload(round_id))
        confirmation = sign(confirm_key, confirm_payload(round_id)).to_body() if confirm_key else None
        body = {"approvals": _signatures(approvals), "confirmation": confirmation, "round": round_id.digest}
        return self.submit(actor_key, EventKind.REVIEW_ACCEPT_VOTE, body)

    def assign_reviewers(self, actor_key, round_id):
        return self.submit(actor_key, EventKind.REVIEWER_ASSIGNMENT, {"round": round_id.digest})

    def submit_review(self, reviewer_key, round_id, score, report_hash):
        body = {"report": report_hash.digest, "round": round_id.digest, "score": score}
        return self.submit(reviewer_key, EventKind.REVIEW_SUBMIT, body)

    def decide(self, actor_key, round_id):
        return self.submit(actor_key, EventKind.PUBLICATION_DECISION, {"round": round_id.digest})

    def final_version(self, author_key, round_id, version_hash):
        body = {"round": round_id.digest, "version": version_hash.digest}
        return self.submit(author_key, EventKind.FINAL_VERSION, body)

    def final_vote(self, reviewer_key, round_id, approve):
        return self.submit(reviewer_key, EventKind.FINAL_VOTE, {"approve": bool(approve), "round": round_id.digest})

    def settle_round(self, actor_key, round_id):
        return self.submit(actor_key, EventKind.FEE_SETTLEMENT, {"round": round_id.digest})

    # Minimal market

    def market_ask(self, reviewer_key, ask, keywords, capacity):
        body = {"ask": ask, "capacity": capacity, "keywords": sorted(keywords)}
        return self.submit(reviewer_key, EventKind.MARKET_ASK, body)

    def market_submit(self, author_key, paper_hash, bid, keywords=()):
        body = {"bid": bid, "keywords": sorted(keywords), "paper": paper_hash.digest}
        event = self.submit(author_key, EventKind.MARKET_SUBMIT, body)
        return submission_id_for(paper_hash, event.seq)

    def market_match(self, actor_key, submission_id):
        return self.submit(actor_key, EventKind.MARKET_MATCH, {"submission": submission_id.digest})

    def market_sweep(self, actor_key):
        """Try to match every queued submission in ledger order; infeasible ones stay queued."""
        matched = []
        for submission in queued_submissions(self.state):
            try:
                self.market_match(actor_key, submission.id)
            except NoFeasibleMatch as exc:
                logger.info("Submission %s stays queued: %s", submission.id.hex[:12], exc)
                continue
            matched.append(submission.id)
        return matched

    def market_review(self, reviewer_key, submission_id, score, report_hash):
        body = {"report": report_hash.digest, "score": score, "submission": submission_id.digest}
        return self.submit(reviewer_key, EventKind.MARKET_REVIEW, body)

    def market_rate(self, scorer_key, submission_id, scores):
        body = {"scores": {p.fingerprint: s for p, s in scores.items()}, "submission": submission_id.digest}
        return self.submit(scorer_key, EventKind.MARKET_REPORT_SCORE, body)

    def market_settle(self, actor_key, submission_id):
        return self.submit(actor_key, EventKind.MARKET_SETTLEMENT, {"submission": submission_id.digest})

    def market_withdraw(self, actor_key, submission_id):
        return self.submit(actor_key, EventKind.MARKET_WITHDRAW, {"submission": submission_id.digest})

    def market_expire(self, actor_key):
        """Close every matched submission whose review period has run out."""
        expired = []
        for submission in overdue_submissions(self.state, self.day):
            self.market_withdraw(actor_key, submission.id)
            expired.append(submission.id)
        return expired

    def market_journal_bid(self, member_key, submission_id, journal_id, offer):
        body = {"journal": journal_id.digest, "offer": offer, "submission": submission_id.digest}
        return self.submit(member_key, EventKind.MARKET_JOURNAL_BID, body)
