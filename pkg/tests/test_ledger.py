import dataclasses
from fractions import Fraction

import numpy as np
import pytest

from conftest import World, blob, make_key, random_scenario
from src.protocol.errors import (
    BadSignature,
    ChainBreak,
    LedgerLocked,
    PreconditionFailed,
    PrincipiaError,
    QuorumNotMet,
)
from src.protocol.events import EventKind, make_event
from src.protocol.identity import ZERO_HASH
from src.protocol.journal import JournalParams, ParamChange
from src.protocol.ledger import (
    BlobStore,
    LedgerStore,
    head_summary,
    read_events,
    replay,
    write_events,
)
from src.protocol.state import Rules
from src.simulation.engine import run


@pytest.fixture
def busy_world():
    """A ledger with a join, a published paper and an assigned review round."""
    w = World(["alice", "bob", "carol", "dave", "xavier"], record_digests=True)
    jid = w.create_journal("alice", "bob", "carol", m_j=Fraction(2, 3))
    w.client.join_bid(w.keys["dave"], jid, 100)
    jid = w.client.decide_join(w.keys["alice"], jid, w.key_list("alice", "bob"))
    paper = w.publish("paper-1", "xavier", keywords=["ml"])
    rid = w.client.review_bid(w.keys["xavier"], paper, jid, 900)
    w.client.accept_for_review(w.keys["alice"], rid, w.key_list("alice", "bob"), w.keys["xavier"])
    w.client.assign_reviewers(w.keys["alice"], rid)
    return w


def test_empty_log_is_empty_state():
    ledger = replay([])
    assert len(ledger) == 0
    assert ledger.head_hash == ZERO_HASH
    assert ledger.state.registrar is None


def test_append_links_to_head(world):
    before = world.ledger.head_hash
    event = world.client.mint(world.registrar, world.person("alice"), 5)
    assert event.prev_hash == before
    assert world.ledger.head_hash == event.hash


def test_stale_prev_hash(world):
    stale = world.ledger.events[-2].hash
    event = make_event(world.registrar, world.ledger.next_seq, stale, 0, EventKind.MINT,
                       {"amount": 1, "to": world.person("alice").fingerprint})
    with pytest.raises(ChainBreak):
        world.ledger.append(event)


def test_sequence_gap(world):
    event = make_event(world.registrar, world.ledger.next_seq + 1, world.ledger.head_hash, 0, EventKind.MINT,
                       {"amount": 1, "to": world.person("alice").fingerprint})
    with pytest.raises(ChainBreak):
        world.ledger.append(event)


def test_forged_signature(world):
    event = make_event(world.keys["alice"], world.ledger.next_seq, world.ledger.head_hash, 0, EventKind.MINT,
                       {"amount": 1, "to": world.person("alice").fingerprint})
    forged = dataclasses.replace(event, actor=world.registrar.person_id)
    with pytest.raises(BadSignature):
        world.ledger.append(forged)


def test_modify_without_quorum_leaves_state(world):
    jid = world.create_journal("alice", "bob", "carol", m_j=Fraction(2, 3))
    digest = world.ledger.digest()
    length = len(world.ledger)
    change = ParamChange(JournalParams(m_j=Fraction(2, 3), t_j=10))
    with pytest.raises(QuorumNotMet):
        world.client.modify_journal(world.keys["alice"], jid, change, world.key_list("alice"))
    assert world.ledger.digest() == digest
    assert len(world.ledger) == length


def test_replay_reproduces_every_prefix(busy_world):
    events = busy_world.ledger.events
    replayed = replay(events, busy_world.state.salt, record_digests=True)
    assert replayed.digests == busy_world.ledger.digests
    assert replayed.digest() == busy_world.ledger.digest()

    # Truncating the last event gives the state just before it
    shorter = replay(events[:-1], busy_world.state.salt)
    assert shorter.digest() == busy_world.ledger.digests[-2]


def test_file_roundtrip_and_corruption(busy_world, tmp_path):
    path = tmp_path / "ledger.bin"
    write_events(path, busy_world.ledger.events)
    salt = busy_world.state.salt
    assert replay(read_events(path), salt).digest() == busy_world.ledger.digest()

    data = path.read_bytes()
    for position in range(0, len(data), 97):
        corrupt = bytearray(data)
        corrupt[position] ^= 0x01
        path.write_bytes(bytes(corrupt))
        with pytest.raises(ChainBreak):
            replay(read_events(path), salt)


def test_truncated_file(busy_world, tmp_path):
    path = tmp_path / "ledger.bin"
    write_events(path, busy_world.ledger.events)
    path.write_bytes(path.read_bytes()[:-3])
    with pytest.raises(ChainBreak):
        read_events(path)


def test_conservation_of_money(busy_world):
    summary = head_summary(busy_world.ledger)
    assert summary["total_money"] == summary["minted"]
    assert summary["events"] == len(busy_world.ledger)


def test_genesis_fixes_rules():
    w = World(["alice"], rules=Rules(theta_report=4.0, thresholds={"ml": 3.5}))
    ledger = replay(w.ledger.events, w.state.salt)
    assert ledger.state.rules.theta_report == 4.0
    assert ledger.state.rules.thresholds == {"ml": 3.5}


def test_store_persists_and_locks(tmp_path):
    w = World(["alice"])
    with LedgerStore(tmp_path) as store:
        for event in w.ledger.events:
            store.append(event)
        with pytest.raises(LedgerLocked):
            LedgerStore(tmp_path).open()
    with LedgerStore(tmp_path) as store:
        assert len(store.ledger) == len(w.ledger)
        assert store.ledger.digest() == w.ledger.digest()


def test_blob_store(tmp_path):
    blobs = BlobStore(tmp_path / "blobs")
    digest = blobs.put(b"a paper")
    assert digest == blob("a paper")
    assert digest in blobs
    assert blobs.get(digest) == b"a paper"


def test_dry_run_appends_nothing(world):
    world.client.dry_run = True
    length = len(world.ledger)
    world.client.mint(world.registrar, world.person("alice"), 5)
    assert len(world.ledger) == length


@pytest.mark.parametrize("seed", range(100))
def test_simulated_ledger_replays_to_live_digests(seed, tmp_path):
    live = run(random_scenario(seed), record_digests=True).ledger
    salt = live.state.salt
    replayed = replay(live.events, salt, record_digests=True)
    assert len(live.digests) == len(live)
    assert replayed.digests == live.digests

    path = tmp_path / "ledger.bin"
    write_events(path, live.events)
    data = path.read_bytes()
    rng = np.random.default_rng(seed)
    for position in rng.choice(len(data), size=5, replace=False):
        corrupt = bytearray(data)
        corrupt[int(position)] ^= 1 << int(rng.integers(8))
        path.write_bytes(bytes(corrupt))
        with pytest.raises(ChainBreak):
            replay(read_events(path), salt)


def test_refused_events_leave_state_untouched(world):
    paper = world.publish("paper", "xavier", keywords=["ml"])
    for name in ("alice", "bob", "carol"):
        world.client.market_ask(world.keys[name], 10, ["ml"], 2)
    cheap = world.client.market_submit(world.keys["xavier"], paper, 5, ["ml"])
    journal = world.create_journal("alice", "bob", "carol")
    refused = [
        lambda: world.client.mint(world.keys["alice"], world.person("alice"), 5),
        lambda: world.publish("paper", "xavier"),
        lambda: world.client.market_match(world.keys["xavier"], cheap),
        lambda: world.client.market_submit(world.keys["xavier"], paper, 10**12, ["ml"]),
        lambda: world.client.review_bid(world.keys["xavier"], paper, journal, 10**12),
        lambda: world.client.register_key(world.keys["alice"], world.keys["alice"].public, "ed25519"),
    ]
    for attempt in refused:
        digest, length = world.ledger.digest(), len(world.ledger)
        with pytest.raises(PrincipiaError):
            attempt()
        assert world.ledger.digest() == digest
        assert len(world.ledger) == length


def test_reregistration_needs_the_registrar(world):
    alice = world.keys["alice"]
    with pytest.raises(PreconditionFailed):
        world.client.register_key(alice, alice.public, alice.scheme)
    assert world.state.keys.is_validated(alice.person_id)

    world.client.register_key(world.registrar, alice.public, alice.scheme, validated=False)
    assert not world.state.keys.is_validated(alice.person_id)

    newcomer = make_key("newcomer")
    world.client.register_key(newcomer, newcomer.public, newcomer.scheme)
    assert newcomer.person_id in world.state.keys
