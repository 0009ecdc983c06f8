"""
Append-only, hash-chained event log with deterministic replay.

On disk the log is a sequence of records, each a 4-byte big-endian length
followed by the canonical bytes of one event. The data directory also holds
the ledger salt, a lock file and the content-addressed blob store.
"""
import fcntl
import logging
import os
import secrets
from pathlib import Path

from src.protocol import journal, market, review  # noqa: F401  (registers event handlers)
from src.protocol.errors import BadSignature, ChainBreak, LedgerLocked, PrincipiaError, UnknownEntity
from src.protocol.events import MONEY_MOVING_KINDS, Event, EventKind, make_event
from src.protocol.identity import ZERO_HASH, content_hash, person_id_for, verify
from src.protocol.state import ProtocolState, apply_event
from src.utils.export import to_plain

logger = logging.getLogger(__name__)

RECORD_LENGTH = 4
SALT_SIZE = 32


def genesis_event(registrar_key, rules, day=0):
    """Seq 0: the registrar registers itself and freezes the protocol rules."""
    body = {
        "public": registrar_key.public,
        "rules": rules.to_body(),
        "scheme": registrar_key.scheme,
        "validated": True,
    }
    return make_event(registrar_key, 0, ZERO_HASH, day, EventKind.KEY_REGISTER, body)


def _signing_key(state, event):
    """Public key and scheme that must have signed ``event``."""
    if event.kind == EventKind.KEY_REGISTER and event.actor not in state.keys:
        public = event.body.get("public")
        scheme = event.body.get("scheme")
        if isinstance(public, bytes) and person_id_for(public) == event.actor:
            return public, scheme
        raise BadSignature("unregistered actor", seq=event.seq)
    try:
        entry = state.keys.get(event.actor)
    except UnknownEntity:
        raise BadSignature("unregistered actor", seq=event.seq) from None
    return entry.public, entry.scheme


class Ledger:
    """
    In-memory event log plus the protocol state it replays to.

    Args:
        salt: Ledger salt for reviewer pseudonyms
        record_digests: Keep the state digest after every event
        check_conservation: Assert that non-mint events never change total money
    """

    def __init__(self, salt=b"", record_digests=False, check_conservation=False):
        self.events = []
        self.state = ProtocolState(salt)
        self.digests = [] if record_digests else None
        self.check_conservation = check_conservation

    def __len__(self):
        return len(self.events)

    @property
    def next_seq(self):
        return len(self.events)

    @property
    def head_hash(self):
        return self.events[-1].hash if self.events else ZERO_HASH

    def digest(self):
        return self.state.digest()

    def verify_link(self, event):
        if event.seq != self.next_seq:
            raise ChainBreak("sequence gap", seq=event.seq, expected=self.next_seq)
        if event.prev_hash != self.head_hash:
            raise ChainBreak("prev_hash does not match the previous event", seq=event.seq)
        if event.seq == 0 and event.kind != EventKind.KEY_REGISTER:
            raise ChainBreak("genesis must be a key registration", seq=0)

    def verify_signature(self, event):
        public, scheme = _signing_key(self.state, event)
        if event.signature.signer != event.actor:
            raise BadSignature("signer is not the actor", seq=event.seq)
        try:
            valid = verify(public, event.signing_bytes(), event.signature, scheme)
        except PrincipiaError:
            valid = False
        if not valid:
            raise BadSignature("signature does not verify", seq=event.seq)

    def append(self, event):
        """Validate and apply ``event``; the log and state are unchanged if it raises."""
        self.verify_link(event)
        self.verify_signature(event)
        total_before = self.state.total_money()
        apply_event(self.state, event)
        if self.check_conservation and event.kind in MONEY_MOVING_KINDS:
            if self.state.total_money() != total_before:
                raise ChainBreak("money not conserved", seq=event.seq, before=total_before,
                                 after=self.state.total_money())
        self.events.append(event)
        if self.digests is not None:
            self.digests.append(self.state.digest())
        logger.debug("Appended #%d %s by %s", event.seq, event.kind.value, event.actor.short)
        return event

    def records(self):
        return [event.to_record() for event in self.events]

    def lines(self):
        return [render_line(event) for event in self.events]


def replay(events, salt=b"", record_digests=False, check_conservation=False):
    """
    Rebuild a Ledger from stored events.

    Any event that fails to apply breaks the chain: it is reported as
    ChainBreak with its seq and the underlying error code.

    Args:
        events: Iterable of Event
        salt: Ledger salt

    Returns:
        Ledger
    """
    ledger = Ledger(salt, record_digests=record_digests, check_conservation=check_conservation)
    for event in events:
        try:
            ledger.append(event)
        except ChainBreak:
            raise
        except PrincipiaError as exc:
            logger.debug("Event #%d does not apply: %s", event.seq, exc)
            raise ChainBreak("stored event does not apply", seq=event.seq, cause=exc.code) from exc
    return ledger


# Binary log file

def encode_record(event):
    record = event.to_record()
    return len(record).to_bytes(RECORD_LENGTH, "big") + record


def read_records(path):
    """Split a ledger file into raw records; a truncated record is a chain break."""
    data = Path(path).read_bytes() if Path(path).exists() else b""
    records = []
    pos = 0
    while pos < len(data):
        if pos + RECORD_LENGTH > len(data):
            raise ChainBreak("truncated record header", seq=len(records))
        size = int.from_bytes(data[pos:pos + RECORD_LENGTH], "big")
        pos += RECORD_LENGTH
        if pos + size > len(data):
            raise ChainBreak("truncated record", seq=len(records))
        records.append(data[pos:pos + size])
        pos += size
    return records


def read_events(path):
    return [Event.from_record(record, seq_hint=i) for i, record in enumerate(read_records(path))]


def write_events(path, events):
    with open(path, "wb") as handle:
        for event in events:
            handle.write(encode_record(event))


def render_line(event):
    """One canonical text line per event for diffing."""
    body = to_plain(event.body)
    return (
        f"{event.seq}\t{event.timestamp}\t{event.kind.value}\t{event.actor.hex}\t"
        f"{event.prev_hash.hex}\t{event.hash.hex}\t{body}"
    )


class BlobStore:
    """Content-addressed store for papers and review reports."""

    def __init__(self, root):
        self.root = Path(root)

    def put(self, data):
        data = bytes(data)
        digest = content_hash(data)
        self.root.mkdir(parents=True, exist_ok=True)
        path = self.root / digest.hex
        if not path.exists():
            path.write_bytes(data)
        return digest

    def get(self, digest):
        path = self.root / digest.hex
        if not path.exists():
            raise UnknownEntity("blob not found", blob=digest.hex[:12])
        data = path.read_bytes()
        if content_hash(data) != digest:
            raise ChainBreak("blob content does not match its hash", blob=digest.hex[:12])
        return data

    def __contains__(self, digest):
        return (self.root / digest.hex).exists()


class LedgerStore:
    """
    File-backed ledger owned by one process through an exclusive lock.

    Usage:
        with LedgerStore(config.data_dir) as store:
            store.append(event)
    """

    def __init__(self, data_dir, create=True):
        self.data_dir = Path(data_dir)
        self.ledger_path = self.data_dir / "ledger.bin"
        self.salt_path = self.data_dir / "ledger.salt"
        self.lock_path = self.data_dir / "ledger.lock"
        self.blobs = BlobStore(self.data_dir / "blobs")
        self.create = create
        self._lock = None
        self.ledger = None

    def __enter__(self):
        self.open()
        return self

    def __exit__(self, exc_type, exc, tb):
        self.close()

    def open(self):
        if self.create:
            self.data_dir.mkdir(parents=True, exist_ok=True)
        elif not self.data_dir.exists():
            raise UnknownEntity("data directory does not exist", data_dir=self.data_dir)
        self._lock = open(self.lock_path, "a+")
        try:
            fcntl.flock(self._lock.fileno(), fcntl.LOCK_EX | fcntl.LOCK_NB)
        except BlockingIOError:
            self._lock.close()
            self._lock = None
            raise LedgerLocked("ledger is in use by another process", data_dir=self.data_dir) from None

        self.ledger = replay(read_events(self.ledger_path), self.salt())
        logger.debug("Opened ledger with %d events", len(self.ledger))
        return self.ledger

    def close(self):
        if self._lock is not None:
            fcntl.flock(self._lock.fileno(), fcntl.LOCK_UN)
            self._lock.close()
            self._lock = None

    def salt(self):
        if not self.salt_path.exists():
            if not self.create:
                return b""
            self.salt_path.write_bytes(secrets.token_bytes(SALT_SIZE))
        return self.salt_path.read_bytes()

    def append(self, event):
        """Apply to the in-memory ledger, then persist the record."""
        self.ledger.append(event)
        with open(self.ledger_path, "ab") as handle:
            handle.write(encode_record(event))
            handle.flush()
            os.fsync(handle.fileno())
        return event


def head_summary(ledger):
    return {
        "events": len(ledger),
        "head": ledger.head_hash.hex,
        "digest": ledger.digest().hex,
        "total_money": ledger.state.total_money(),
        "minted": ledger.state.minted,
    }
