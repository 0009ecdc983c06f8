"""Protocol state replayed from the event log, with wallets and dispatch."""
import logging
from dataclasses import dataclass, field, fields

from src.protocol.canonical import canonicalize
from src.protocol.errors import (
    InsufficientFunds,
    PreconditionFailed,
    QuorumNotMet,
    UnknownEntity,
)
from src.protocol.events import EventKind, Wallet
from src.protocol.identity import ContentHash, KeyRegistry, PersonId, Signature, content_hash, person_id_for
from src.algorithms.allocation import quorum_required
from src.utils.config import PROTOCOL_DEFAULTS, RULE_KEYS

logger = logging.getLogger(__name__)

# kind -> handler(state, event); modules register themselves with @handles
HANDLERS = {}


def handles(kind):
    """
    Register the state transition for ``kind``.

    Handlers check every precondition before their first write to the
    state and never raise after it; apply_event only restores the day.
    """
    def register(func):
        HANDLERS[kind] = func
        return func
    return register


@dataclass(frozen=True)
class Rules:
    """Transition rules fixed by the genesis event."""

    theta_report: float = PROTOCOL_DEFAULTS['theta_report']
    default_threshold: float = PROTOCOL_DEFAULTS['default_threshold']
    market_reviewers: int = PROTOCOL_DEFAULTS['market_reviewers']
    initial_rs: float = PROTOCOL_DEFAULTS['initial_rs']
    rs_mode: str = PROTOCOL_DEFAULTS['rs_mode']
    rs_ema_weight: float = PROTOCOL_DEFAULTS['rs_ema_weight']
    learn_keywords: bool = PROTOCOL_DEFAULTS['learn_keywords']
    market_review_days: int = PROTOCOL_DEFAULTS['market_review_days']
    proposal_expiry_days: int = PROTOCOL_DEFAULTS['proposal_expiry_days']
    thresholds: dict = field(default_factory=dict)

    def to_body(self):
        body = {key: getattr(self, key) for key in RULE_KEYS}
        body['theta_report'] = float(self.theta_report)
        body['default_threshold'] = float(self.default_threshold)
        body['initial_rs'] = float(self.initial_rs)
        body['rs_ema_weight'] = float(self.rs_ema_weight)
        body['thresholds'] = {k: float(v) for k, v in self.thresholds.items()}
        return body

    @classmethod
    def from_body(cls, body):
        known = {f.name for f in fields(cls)}
        values = {k: v for k, v in (body or {}).items() if k in known}
        return cls(**values)

    @classmethod
    def from_config(cls, config):
        return cls.from_body(config.rules())

    def threshold_for(self, keywords):
        """Acceptance threshold of a submission: strictest configured field, else default."""
        configured = [self.thresholds[k] for k in keywords if k in self.thresholds]
        return max(configured) if configured else self.default_threshold


def person_account(person):
    return f"person:{person.hex}"


def journal_account(journal_id):
    return f"journal:{journal_id.hex}"


def escrow_account(kind, ident):
    return f"escrow:{kind}:{ident.hex}"


@dataclass(frozen=True)
class QuorumCheck:
    required: int
    got: frozenset

    @property
    def met(self):
        return len(self.got) >= self.required


class ProtocolState:
    """Everything the ledger knows, rebuilt deterministically by replay."""

    def __init__(self, salt=b""):
        self.salt = bytes(salt)
        self.registrar = None
        self.rules = Rules()
        self.day = 0
        self.seq = -1
        self.keys = KeyRegistry()
        self.balances = {}
        self.minted = 0

        # Journals and governance
        self.journals = {}
        self.descendant = {}
        self.pending_joins = {}
        self.intervals = []

        # Papers and review rounds
        self.papers = {}
        self.rounds = {}
        self.publications = {}
        self.citations = {}

        # Minimal market
        self.profiles = {}
        self.submissions = {}

    # Wallets

    def balance(self, account):
        return self.balances.get(account, 0)

    def wallet(self, account):
        return Wallet(owner=account, balance=self.balance(account))

    def require_funds(self, account, amount):
        if amount < 0:
            raise PreconditionFailed("amounts must be non-negative", amount=amount)
        if self.balance(account) < amount:
            raise InsufficientFunds("balance too low", account=account, balance=self.balance(account), amount=amount)

    def transfer(self, source, target, amount):
        """Move money between wallets; callers check funds before committing."""
        if amount == 0:
            return
        self.require_funds(source, amount)
        self.balances[source] = self.balance(source) - amount
        self.balances[target] = self.balance(target) + amount
        if self.balances[source] == 0:
            del self.balances[source]

    def total_money(self):
        return sum(self.balances.values())

    # Lookups

    def journal(self, journal_id):
        try:
            return self.journals[journal_id]
        except KeyError:
            raise UnknownEntity("unknown journal", journal=journal_id.hex[:12]) from None

    def paper(self, paper_hash):
        try:
            return self.papers[paper_hash]
        except KeyError:
            raise UnknownEntity("unknown paper", paper=paper_hash.hex[:12]) from None

    def round(self, round_id):
        try:
            return self.rounds[round_id]
        except KeyError:
            raise UnknownEntity("unknown review round", round=round_id.hex[:12]) from None

    def submission(self, submission_id):
        try:
            return self.submissions[submission_id]
        except KeyError:
            raise UnknownEntity("unknown market submission", submission=submission_id.hex[:12]) from None

    def is_current(self, journal_id):
        return journal_id in self.journals and journal_id not in self.descendant

    def check_quorum(self, board, q, approvals, payload):
        """
        Count distinct board members with a valid approval signature over ``payload``.

        Duplicate signatures count once; non-members and bad signatures never count.
        """
        got = frozenset(
            sig.signer for sig in approvals
            if sig.signer in board and self.keys.verify(payload, sig)
        )
        return QuorumCheck(required=quorum_required(q, len(board)), got=got)

    def require_quorum(self, board, q, approvals, payload, action):
        check = self.check_quorum(board, q, approvals, payload)
        if not check.met:
            raise QuorumNotMet(f"{action} lacks a qualified majority", required=check.required, got=len(check.got))
        return check

    # Digest

    def snapshot(self):
        return {
            "registrar": self.registrar,
            "rules": self.rules.to_body(),
            "day": self.day,
            "seq": self.seq,
            "keys": self.keys.snapshot(),
            "balances": dict(self.balances),
            "minted": self.minted,
            "journals": self.journals,
            "descendant": self.descendant,
            "pending_joins": self.pending_joins,
            "intervals": list(self.intervals),
            "papers": self.papers,
            "rounds": self.rounds,
            "publications": self.publications,
            "citations": self.citations,
            "profiles": self.profiles,
            "submissions": self.submissions,
        }

    def digest(self):
        return content_hash(canonicalize(self.snapshot()))


# Body helpers shared by the operation modules

def hash_field(body, name):
    try:
        return ContentHash(body[name])
    except (KeyError, TypeError, ValueError):
        raise PreconditionFailed("malformed hash field", field=name) from None


def person_field(value):
    try:
        return PersonId(value)
    except (TypeError, ValueError):
        raise PreconditionFailed("malformed person id") from None


def people_field(body, name):
    return frozenset(person_field(v) for v in body.get(name) or [])


def signatures_field(body, name):
    return [Signature.from_body(s) for s in body.get(name) or []]


def int_field(body, name):
    value = body.get(name)
    if not isinstance(value, int) or isinstance(value, bool):
        raise PreconditionFailed("malformed integer field", field=name)
    return value


# Identity and money events

@handles(EventKind.KEY_REGISTER)
def apply_key_register(state, event):
    body = event.body
    public = body.get("public")
    scheme = body.get("scheme")
    validated = bool(body.get("validated"))
    if not isinstance(public, bytes) or not isinstance(scheme, str):
        raise PreconditionFailed("malformed key registration")

    if event.seq == 0:
        # Genesis: the registrar registers itself and fixes the rules
        rules = Rules.from_body(body.get("rules"))
        person = state.keys.register(public, scheme, True)
        state.registrar = person
        state.rules = rules
        logger.info("Genesis: registrar %s", person.short)
        return

    is_registrar = event.actor == state.registrar
    if validated and not is_registrar:
        raise PreconditionFailed("only the registrar validates keys")
    person = person_id_for(public)
    if not is_registrar and person != event.actor:
        raise PreconditionFailed("self-registration must be signed by the registered key")
    if not is_registrar and person in state.keys:
        raise PreconditionFailed("key already registered; only the registrar may re-register it", person=person.short)
    state.keys.register(public, scheme, validated)
    logger.debug("Registered key %s (validated=%s)", person.short, validated)


@handles(EventKind.MINT)
def apply_mint(state, event):
    if event.actor != state.registrar:
        raise PreconditionFailed("only the registrar mints")
    amount = int_field(event.body, "amount")
    if amount < 0:
        raise PreconditionFailed("mint amount must be non-negative")
    recipient = person_field(event.body.get("to"))
    state.keys.get(recipient)
    account = person_account(recipient)
    state.balances[account] = state.balance(account) + amount
    state.minted += amount


def apply_event(state, event):
    """Validate and apply one event; state is untouched when it raises."""
    handler = HANDLERS.get(event.kind)
    if handler is None:
        raise PreconditionFailed("no handler for event kind", kind=event.kind.value)
    if event.timestamp < state.day:
        raise PreconditionFailed("timestamp goes backwards", day=event.timestamp, last=state.day)
    if event.seq > 0 and event.actor not in state.keys and event.kind != EventKind.KEY_REGISTER:
        raise UnknownEntity("actor is not registered", actor=event.actor.short)
    previous_day = state.day
    state.day = event.timestamp
    try:
        handler(state, event)
    except Exception:
        state.day = previous_day
        raise
    state.seq = event.seq
