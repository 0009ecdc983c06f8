import numpy as np
import pytest

from src.data.loader import parse_scenario
from src.protocol.client import ProtocolClient
from src.protocol.identity import content_hash, derive_seed, keygen
from src.protocol.journal import JournalParams
from src.protocol.ledger import Ledger
from src.protocol.state import Rules, journal_account, person_account


def make_key(label, scheme="hmac-test"):
    return keygen(derive_seed(label), scheme)


def blob(label):
    return content_hash(label.encode("utf-8"))


class World:
    """A fresh ledger with a registrar and validated, funded persons."""

    def __init__(self, names, wallet=1_000_000, rules=None, salt=b"test-salt", record_digests=False):
        self.ledger = Ledger(salt, record_digests=record_digests, check_conservation=True)
        self.client = ProtocolClient(self.ledger)
        self.registrar = make_key("registrar")
        self.client.genesis(self.registrar, rules or Rules())
        self.keys = {}
        for name in names:
            self.add(name, wallet)

    def add(self, name, wallet=0, validated=True):
        key = make_key(name)
        self.keys[name] = key
        self.client.register_key(self.registrar, key.public, key.scheme, validated=validated)
        if wallet:
            self.client.mint(self.registrar, key.person_id, wallet)
        return key

    @property
    def state(self):
        return self.ledger.state

    def person(self, name):
        return self.keys[name].person_id

    def key_list(self, *names):
        return [self.keys[n] for n in names]

    def balance(self, name):
        return self.state.balance(person_account(self.person(name)))

    def journal_balance(self, journal_id):
        return self.state.balance(journal_account(journal_id))

    def create_journal(self, *names, **params):
        first, *rest = names
        return self.client.create_journal(self.keys[first], self.key_list(*rest), JournalParams(**params))

    def publish(self, label, *authors, keywords=(), cites=()):
        paper = blob(label)
        keys = self.key_list(*authors)
        self.client.publish_paper(keys[0], paper, keys, keywords, cites)
        return paper


@pytest.fixture
def world():
    return World(["alice", "bob", "carol", "dave", "erin", "xavier"])


def random_scenario(seed, horizon=None):
    """Seeded random scenario: one or two journals with boards, an optional pool, authors and a shock."""
    rng = np.random.default_rng(seed)
    horizon = horizon or int(rng.integers(5, 21))
    topics = ["ml", "graphs"]
    lines = [
        "[scenario]",
        f"seed = {seed}",
        f"horizon_days = {horizon}",
        f"sample_every = {int(rng.integers(1, 6))}",
        f"market_share = {rng.random():.2f}",
    ]
    for index in range(int(rng.integers(1, 3))):
        n_j = int(rng.integers(1, 4))
        lines += [
            f"[journal:j{index}]",
            f"f_j = 1/{int(rng.integers(2, 6))}",
            f"a_j = {'yes' if rng.random() < 0.5 else 'no'}",
            f"t_j = {int(rng.integers(2, 8))}",
            f"n_j = {n_j}",
            f"review_fee = {int(rng.integers(1, 50)) * 1000}",
            f"keywords = {topics[index]}",
            f"[agents:board{index}]",
            "role = reviewer",
            f"count = {n_j + int(rng.integers(0, 3))}",
            f"wallet = {int(rng.integers(0, 5)) * 100000}",
            f"keywords = {topics[index]}",
            f"journal = j{index}",
            f"diligence = {rng.uniform(0.3, 1.0):.2f}",
        ]
    groups = ["authors"]
    if rng.random() < 0.7:
        groups.append("pool")
        lines += [
            "[agents:pool]",
            "role = reviewer",
            f"count = {int(rng.integers(3, 7))}",
            f"wallet = {int(rng.integers(0, 5)) * 100000}",
            "keywords = ml, graphs",
            f"capacity = {int(rng.integers(1, 4))}",
            f"join_rate = {rng.uniform(0, 0.2):.2f}",
            f"join_fee = {int(rng.integers(0, 20)) * 1000}",
        ]
    lines += [
        "[agents:authors]",
        "role = author",
        f"count = {int(rng.integers(1, 6))}",
        f"wallet = {int(rng.integers(1, 20)) * 100000}",
        "keywords = ml, graphs",
        f"paper_rate = {rng.uniform(0.05, 0.5):.2f}",
        f"bid_fraction = {rng.uniform(0.5, 1.5):.2f}",
    ]
    if rng.random() < 0.5:
        lines += [
            "[shock:s]",
            f"day = {int(rng.integers(1, horizon + 1))}",
            f"group = {groups[int(rng.integers(len(groups)))]}",
            f"fraction = {rng.random():.2f}",
        ]
    return parse_scenario("\n".join(lines) + "\n", source=f"random-{seed}.scn")
