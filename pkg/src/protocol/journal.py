"""
Journal lifecycle and governance.

A journal is an immutable snapshot of (board, params, ancestor). Every
change creates a new snapshot whose ancestor is the old one; only the newest
snapshot of a lineage accepts submissions and modifications.
"""
import logging
from dataclasses import dataclass, field, replace
from fractions import Fraction

import networkx as nx

from src.algorithms.allocation import as_fraction
from src.protocol.canonical import canonicalize
from src.protocol.errors import (
    AlreadyMember,
    AlreadySuperseded,
    BadParams,
    DuplicateJournal,
    EmptyBoardResult,
    MissingFounderSignature,
    NotDescendant,
    NotValidated,
    PendingProposal,
    PreconditionFailed,
)
from src.protocol.events import EventKind
from src.protocol.identity import ContentHash, content_hash
from src.protocol.state import (
    escrow_account,
    handles,
    hash_field,
    int_field,
    journal_account,
    people_field,
    person_account,
    person_field,
    signatures_field,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class JournalParams:
    """
    Journal parameters.

    f_j: fraction of the review fee kept by the journal
    a_j: reviewers are anonymous
    t_j: maximum review time in days
    n_j: reviewers per paper
    r_j, p_j, m_j: qualified majorities to accept a paper for review, to
        spend the balance and to modify the journal
    """

    f_j: Fraction = Fraction(1, 5)
    a_j: bool = False
    t_j: int = 30
    n_j: int = 3
    r_j: Fraction = Fraction(1, 2)
    p_j: Fraction = Fraction(1, 2)
    m_j: Fraction = Fraction(2, 3)

    def __post_init__(self):
        try:
            for name in ("f_j", "r_j", "p_j", "m_j"):
                object.__setattr__(self, name, as_fraction(getattr(self, name)))
        except (TypeError, ValueError, ZeroDivisionError) as exc:
            raise BadParams("journal fractions must be finite numbers") from exc
        object.__setattr__(self, "a_j", bool(self.a_j))

    def validate(self):
        if not 0 <= self.f_j <= 1:
            raise BadParams("f_j must lie in [0, 1]", f_j=self.f_j)
        for name in ("r_j", "p_j", "m_j"):
            value = getattr(self, name)
            if not 0 < value <= 1:
                raise BadParams(f"{name} must lie in (0, 1]", **{name: value})
        if self.m_j <= self.p_j:
            raise BadParams("m_j must be higher than p_j", m_j=self.m_j, p_j=self.p_j)
        if not isinstance(self.t_j, int) or self.t_j <= 0:
            raise BadParams("t_j must be a positive number of days", t_j=self.t_j)
        if not isinstance(self.n_j, int) or self.n_j < 1:
            raise BadParams("n_j must be at least 1", n_j=self.n_j)
        return self

    def to_body(self):
        return {
            "a_j": self.a_j,
            "f_j": self.f_j,
            "m_j": self.m_j,
            "n_j": self.n_j,
            "p_j": self.p_j,
            "r_j": self.r_j,
            "t_j": self.t_j,
        }

    @classmethod
    def from_body(cls, body):
        if not isinstance(body, dict):
            raise BadParams("malformed journal parameters")
        try:
            return cls(**body)
        except TypeError as exc:
            raise BadParams("unknown journal parameter") from exc

    @classmethod
    def parse(cls, text, base=None):
        """Parse ``f_j=0.2,n_j=3,...`` on top of ``base`` (or the defaults)."""
        values = (base or cls()).to_body()
        for item in filter(None, (part.strip() for part in text.split(","))):
            name, _, raw = item.partition("=")
            name = name.strip()
            if name not in values:
                raise BadParams("unknown journal parameter", name=name)
            raw = raw.strip()
            if name == "a_j":
                values[name] = raw.lower() in ("1", "true", "yes")
            elif name in ("t_j", "n_j"):
                values[name] = int(raw)
            else:
                values[name] = Fraction(raw)
        return cls(**values)


@dataclass(frozen=True)
class Journal:
    id: ContentHash
    board: tuple
    ancestor: ContentHash | None
    params: JournalParams
    created_at: int

    @property
    def members(self):
        return frozenset(self.board)


@dataclass(frozen=True)
class ServiceInterval:
    person: object
    journal: ContentHash
    from_day: int
    to_day: int | None = None

    def duration(self, at_day):
        end = at_day if self.to_day is None else min(self.to_day, at_day)
        return max(0, end - self.from_day)


@dataclass(frozen=True)
class PendingJoin:
    journal: ContentHash
    candidate: object
    bid: int
    day: int


@dataclass(frozen=True)
class BoardChange:
    add: frozenset = field(default_factory=frozenset)
    remove: frozenset = field(default_factory=frozenset)

    def to_body(self):
        return {
            "add": sorted(p.fingerprint for p in self.add),
            "params": None,
            "remove": sorted(p.fingerprint for p in self.remove),
        }


@dataclass(frozen=True)
class ParamChange:
    params: JournalParams

    def to_body(self):
        return {"add": [], "params": self.params.to_body(), "remove": []}


def change_from_body(body):
    if not isinstance(body, dict):
        raise PreconditionFailed("malformed journal change")
    if body.get("params") is not None:
        if body.get("add") or body.get("remove"):
            raise PreconditionFailed("a change is either a board change or a parameter change")
        return ParamChange(JournalParams.from_body(body["params"]))
    return BoardChange(add=people_field(body, "add"), remove=people_field(body, "remove"))


def journal_id_for(board, params, ancestor):
    return content_hash(canonicalize(["journal", sorted(board), params, ancestor]))


# Approval payloads: what board members sign

def create_payload(founders, params):
    return canonicalize(["journal-create", sorted(founders), params])


def modify_payload(journal_id, change):
    return canonicalize(["journal-modify", journal_id, change.to_body()])


def join_payload(journal_id, candidate, bid):
    return canonicalize(["journal-join", journal_id, candidate, bid])


def spend_payload(journal_id, amount, recipient, seq):
    return canonicalize(["journal-spend", journal_id, amount, recipient, seq])


def transfer_payload(ancestor_id, descendant_id, seq):
    return canonicalize(["journal-transfer", ancestor_id, descendant_id, seq])


# Operations (pure: validate and compute, never mutate)

def _new_journal(state, board, params, ancestor, day):
    if not board:
        raise EmptyBoardResult("a journal needs at least one board member")
    journal_id = journal_id_for(board, params, ancestor)
    if journal_id in state.journals:
        raise DuplicateJournal("an identical journal already exists", journal=journal_id.hex[:12])
    return Journal(id=journal_id, board=tuple(sorted(board)), ancestor=ancestor, params=params, created_at=day)


def _require_validated(state, people):
    for person in people:
        if not state.keys.is_validated(person):
            raise NotValidated("board members need a validated key", person=person.short)


def _require_current(state, journal_id):
    journal = state.journal(journal_id)
    if journal_id in state.descendant:
        raise AlreadySuperseded("journal has a descendant", journal=journal_id.hex[:12])
    return journal


def create_journal(state, founders, params, signatures, day):
    """
    Create a journal; every founder must sign.

    Args:
        state: ProtocolState
        founders: Set of PersonId
        params: JournalParams
        signatures: Founder signatures over the creation payload
        day: Creation day

    Returns:
        Journal with no ancestor and an empty wallet
    """
    params.validate()
    founders = frozenset(founders)
    if not founders:
        raise EmptyBoardResult("a journal needs at least one founder")
    payload = create_payload(founders, params)
    signed = {sig.signer for sig in signatures if state.keys.verify(payload, sig)}
    missing = founders - signed
    if missing:
        raise MissingFounderSignature("every founder must sign", missing=len(missing))
    _require_validated(state, founders)
    return _new_journal(state, founders, params, None, day)


def modify_journal(state, journal_id, change, approvals, actor, day):
    """
    Derive a new journal from ``journal_id`` by a board or parameter change.

    A member removing only themself needs no approvals; anything else needs
    ceil(m_j * |board|) distinct member approvals.
    """
    journal = _require_current(state, journal_id)
    pending = state.pending_joins.get(journal_id)
    if pending is not None and day <= pending.day + state.rules.proposal_expiry_days:
        raise PendingProposal("a join proposal is pending", journal=journal_id.hex[:12])

    unilateral_leave = (
        isinstance(change, BoardChange)
        and not change.add
        and change.remove == frozenset({actor})
        and actor in journal.members
    )
    if not unilateral_leave:
        state.require_quorum(
            journal.members, journal.params.m_j, approvals, modify_payload(journal_id, change), "modification"
        )

    if isinstance(change, ParamChange):
        params = change.params.validate()
        board = journal.members
    else:
        params = journal.params
        if change.add & journal.members:
            raise AlreadyMember("cannot add an existing member")
        if not change.remove <= journal.members:
            raise PreconditionFailed("cannot remove a non-member")
        _require_validated(state, change.add)
        board = (journal.members | change.add) - change.remove
        if not board:
            raise EmptyBoardResult("the change would leave the board empty")
    return _new_journal(state, board, params, journal_id, day)


def join_journal(state, journal_id, candidate, bid, approvals, day):
    """
    Decide a pending join bid.

    Returns:
        new_journal: The journal including the candidate, or None on refusal
        settlement: Dictionary with the escrow movement
    """
    journal = state.journal(journal_id)
    escrow = escrow_account("join", journal_id)
    refund = {"from": escrow, "to": person_account(candidate), "amount": bid}

    pending = state.pending_joins.get(journal_id)
    if pending is None or pending.candidate != candidate:
        raise PreconditionFailed("no pending join bid for this candidate")
    if journal_id in state.descendant:
        return None, dict(refund, outcome="superseded")
    if day > pending.day + state.rules.proposal_expiry_days:
        return None, dict(refund, outcome="expired")

    check = state.check_quorum(journal.members, journal.params.m_j, approvals, join_payload(journal_id, candidate, bid))
    if not check.met:
        return None, dict(refund, outcome="rejected")

    new_journal = _new_journal(state, journal.members | {candidate}, journal.params, journal_id, day)
    return new_journal, {"from": escrow, "to": journal_account(new_journal.id), "amount": bid, "outcome": "joined"}


def spend_balance(state, journal_id, amount, recipient, approvals, seq):
    """Spend from the journal wallet with a p_j qualified majority."""
    journal = state.journal(journal_id)
    state.require_quorum(
        journal.members, journal.params.p_j, approvals, spend_payload(journal_id, amount, recipient, seq), "spend"
    )
    state.require_funds(journal_account(journal_id), amount)
    return {"from": journal_account(journal_id), "to": person_account(recipient), "amount": amount}


def transfer_balance(state, ancestor_id, descendant_id, approvals, seq):
    """Move the whole ancestor balance to its direct descendant (ancestor's p_j)."""
    ancestor = state.journal(ancestor_id)
    descendant = state.journal(descendant_id)
    if descendant.ancestor != ancestor_id:
        raise NotDescendant("journals are not ancestor and descendant")
    state.require_quorum(
        ancestor.members, ancestor.params.p_j, approvals, transfer_payload(ancestor_id, descendant_id, seq), "transfer"
    )
    amount = state.balance(journal_account(ancestor_id))
    return {"from": journal_account(ancestor_id), "to": journal_account(descendant_id), "amount": amount}


# Commit helpers

def _register_journal(state, journal, day):
    """Record a new snapshot, retire its ancestor and roll the service intervals."""
    state.journals[journal.id] = journal
    if journal.ancestor is not None:
        state.descendant[journal.ancestor] = journal.id
        state.intervals = [
            replace(iv, to_day=day) if iv.journal == journal.ancestor and iv.to_day is None else iv
            for iv in state.intervals
        ]
    for person in journal.board:
        state.intervals.append(ServiceInterval(person=person, journal=journal.id, from_day=day))


def lineage(state, journal_id):
    """Ancestor-to-newest chain containing ``journal_id``."""
    state.journal(journal_id)
    graph = lineage_graph(state)
    chain = nx.ancestors(graph, journal_id) | {journal_id} | nx.descendants(graph, journal_id)
    return list(nx.topological_sort(graph.subgraph(chain)))


def lineage_graph(state):
    graph = nx.DiGraph()
    graph.add_nodes_from(state.journals)
    graph.add_edges_from((j.ancestor, j.id) for j in state.journals.values() if j.ancestor is not None)
    return graph


def current_journals(state):
    return [j for j in state.journals.values() if j.id not in state.descendant]


# Event handlers

@handles(EventKind.JOURNAL_CREATE)
def apply_journal_create(state, event):
    body = event.body
    founders = people_field(body, "founders")
    if event.actor not in founders:
        raise PreconditionFailed("the creator must be a founder")
    journal = create_journal(
        state,
        founders,
        JournalParams.from_body(body.get("params")),
        signatures_field(body, "signatures"),
        event.timestamp,
    )
    _register_journal(state, journal, event.timestamp)
    logger.info("Journal %s created by %d founders", journal.id.hex[:12], len(founders))


@handles(EventKind.JOURNAL_MODIFY)
def apply_journal_modify(state, event):
    body = event.body
    journal_id = hash_field(body, "journal")
    new_journal = modify_journal(
        state,
        journal_id,
        change_from_body(body.get("change")),
        signatures_field(body, "approvals"),
        event.actor,
        event.timestamp,
    )
    _register_journal(state, new_journal, event.timestamp)
    logger.info("Journal %s superseded by %s", journal_id.hex[:12], new_journal.id.hex[:12])


@handles(EventKind.JOIN_BID)
def apply_join_bid(state, event):
    journal_id = hash_field(event.body, "journal")
    bid = int_field(event.body, "bid")
    journal = _require_current(state, journal_id)
    candidate = event.actor
    if candidate in journal.members:
        raise AlreadyMember("candidate already serves on the board")
    _require_validated(state, [candidate])
    pending = state.pending_joins.get(journal_id)
    if pending is not None:
        raise PendingProposal("another join bid is pending", journal=journal_id.hex[:12])
    state.require_funds(person_account(candidate), bid)

    state.transfer(person_account(candidate), escrow_account("join", journal_id), bid)
    state.pending_joins[journal_id] = PendingJoin(journal_id, candidate, bid, event.timestamp)


@handles(EventKind.JOIN_DECISION)
def apply_join_decision(state, event):
    journal_id = hash_field(event.body, "journal")
    candidate = person_field(event.body.get("candidate"))
    pending = state.pending_joins.get(journal_id)
    if pending is None:
        raise PreconditionFailed("no pending join bid", journal=journal_id.hex[:12])
    new_journal, settlement = join_journal(
        state, journal_id, candidate, pending.bid, signatures_field(event.body, "approvals"), event.timestamp
    )

    del state.pending_joins[journal_id]
    state.transfer(settlement["from"], settlement["to"], settlement["amount"])
    if new_journal is not None:
        _register_journal(state, new_journal, event.timestamp)
    logger.info("Join bid on %s: %s", journal_id.hex[:12], settlement["outcome"])


@handles(EventKind.BALANCE_SPEND)
def apply_balance_spend(state, event):
    body = event.body
    settlement = spend_balance(
        state,
        hash_field(body, "journal"),
        int_field(body, "amount"),
        person_field(body.get("recipient")),
        signatures_field(body, "approvals"),
        event.seq,
    )
    state.transfer(settlement["from"], settlement["to"], settlement["amount"])


@handles(EventKind.BALANCE_TRANSFER)
def apply_balance_transfer(state, event):
    body = event.body
    settlement = transfer_balance(
        state,
        hash_field(body, "ancestor"),
        hash_field(body, "descendant"),
        signatures_field(body, "approvals"),
        event.seq,
    )
    state.transfer(settlement["from"], settlement["to"], settlement["amount"])
