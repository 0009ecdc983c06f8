"""Signed, hash-chained protocol events."""
from dataclasses import dataclass
from enum import Enum

from src.protocol.canonical import canonicalize, decode
from src.protocol.errors import ChainBreak
from src.protocol.identity import ContentHash, PersonId, Signature, content_hash, sign


class EventKind(Enum):
    KEY_REGISTER = "KeyRegister"
    MINT = "Mint"
    JOURNAL_CREATE = "JournalCreate"
    JOURNAL_MODIFY = "JournalModify"
    JOIN_BID = "JoinBid"
    JOIN_DECISION = "JoinDecision"
    BALANCE_SPEND = "BalanceSpend"
    BALANCE_TRANSFER = "BalanceTransfer"
    PAPER_PUBLISH = "PaperPublish"
    REVIEW_BID = "ReviewBid"
    REVIEW_ACCEPT_VOTE = "ReviewAcceptVote"
    REVIEWER_ASSIGNMENT = "ReviewerAssignment"
    REVIEW_SUBMIT = "ReviewSubmit"
    PUBLICATION_DECISION = "PublicationDecision"
    FINAL_VERSION = "FinalVersion"
    FINAL_VOTE = "FinalVote"
    FEE_SETTLEMENT = "FeeSettlement"
    CITATION_DECLARE = "CitationDeclare"
    MARKET_ASK = "MarketAsk"
    MARKET_SUBMIT = "MarketSubmit"
    MARKET_MATCH = "MarketMatch"
    MARKET_REVIEW = "MarketReview"
    MARKET_REPORT_SCORE = "MarketReportScore"
    MARKET_SETTLEMENT = "MarketSettlement"
    MARKET_JOURNAL_BID = "MarketJournalBid"
    MARKET_WITHDRAW = "MarketWithdraw"


# Events after which the sum of all wallets must be unchanged
MONEY_MOVING_KINDS = frozenset(EventKind) - {EventKind.MINT}


@dataclass(frozen=True)
class Event:
    seq: int
    prev_hash: ContentHash
    timestamp: int
    actor: PersonId
    kind: EventKind
    body: dict
    signature: Signature

    def header(self):
        return [self.seq, self.prev_hash, self.timestamp, self.actor, self.kind.value, self.body]

    def signing_bytes(self):
        return signing_bytes(self.seq, self.prev_hash, self.timestamp, self.actor, self.kind, self.body)

    def to_record(self):
        return canonicalize(self.header() + [self.signature.to_body()])

    @property
    def hash(self):
        return content_hash(self.to_record())

    @classmethod
    def from_record(cls, record, seq_hint=None):
        """Decode one binary record; anything non-canonical is a chain break."""
        try:
            fields = decode(record)
            seq, prev, timestamp, actor, kind, body, signature = fields
            event = cls(
                seq=seq,
                prev_hash=ContentHash(prev),
                timestamp=timestamp,
                actor=PersonId(actor),
                kind=EventKind(kind),
                body=body,
                signature=Signature.from_body(signature),
            )
        except Exception as exc:
            raise ChainBreak("undecodable event record", seq=seq_hint) from exc
        if not isinstance(event.seq, int) or not isinstance(event.timestamp, int) or not isinstance(body, dict):
            raise ChainBreak("malformed event record", seq=seq_hint)
        if event.to_record() != bytes(record):
            raise ChainBreak("non-canonical event record", seq=seq_hint)
        return event


def signing_bytes(seq, prev_hash, timestamp, actor, kind, body):
    return canonicalize(["principia-event", seq, prev_hash, timestamp, actor, kind.value, body])


def make_event(key, seq, prev_hash, timestamp, kind, body):
    """Build and sign an event with the actor's key pair."""
    actor = key.person_id
    signature = sign(key, signing_bytes(seq, prev_hash, timestamp, actor, kind, body))
    return Event(
        seq=seq,
        prev_hash=prev_hash,
        timestamp=timestamp,
        actor=actor,
        kind=kind,
        body=body,
        signature=signature,
    )


@dataclass(frozen=True)
class Wallet:
    owner: str
    balance: int
