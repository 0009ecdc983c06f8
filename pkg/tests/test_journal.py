from fractions import Fraction

import pytest

from src.protocol.errors import (
    AlreadyMember,
    AlreadySuperseded,
    BadParams,
    DuplicateJournal,
    EmptyBoardResult,
    InsufficientFunds,
    MissingFounderSignature,
    NotDescendant,
    NotValidated,
    PendingProposal,
    QuorumNotMet,
)
from src.protocol.identity import sign
from src.protocol.journal import (
    BoardChange,
    JournalParams,
    ParamChange,
    create_journal,
    create_payload,
    current_journals,
    lineage,
    spend_balance,
    spend_payload,
)
from src.protocol.state import journal_account


def members(world, *names):
    return frozenset(world.person(n) for n in names)


class TestCreate:
    def test_all_founders_sign(self, world):
        jid = world.create_journal("alice", "bob", "carol")
        journal = world.state.journal(jid)
        assert journal.members == members(world, "alice", "bob", "carol")
        assert journal.ancestor is None
        assert world.journal_balance(jid) == 0

    def test_missing_founder_signature(self, world):
        founders = members(world, "alice", "bob", "carol")
        params = JournalParams()
        payload = create_payload(founders, params)
        signatures = [sign(k, payload) for k in world.key_list("alice", "bob")]
        with pytest.raises(MissingFounderSignature):
            create_journal(world.state, founders, params, signatures, 0)

    def test_m_j_must_exceed_p_j(self, world):
        with pytest.raises(BadParams):
            world.create_journal("alice", "bob", m_j=Fraction(1, 2), p_j=Fraction(1, 2))

    def test_unvalidated_founder(self, world):
        world.add("mallory", validated=False)
        with pytest.raises(NotValidated):
            world.create_journal("alice", "mallory")

    def test_duplicate(self, world):
        world.create_journal("alice", "bob")
        with pytest.raises(DuplicateJournal):
            world.create_journal("bob", "alice")

    def test_params_parse(self):
        params = JournalParams.parse("f_j=0.25, n_j=5, a_j=true")
        assert params.f_j == Fraction(1, 4)
        assert params.n_j == 5
        assert params.a_j
        with pytest.raises(BadParams):
            JournalParams.parse("x_j=1")


class TestModify:
    def test_qualified_majority(self, world):
        jid = world.create_journal("alice", "bob", "carol", m_j=0.66)
        change = BoardChange(add=members(world, "dave"))
        new_id = world.client.modify_journal(world.keys["alice"], jid, change, world.key_list("alice", "bob"))
        assert world.state.journal(new_id).members == members(world, "alice", "bob", "carol", "dave")
        assert world.state.journal(new_id).ancestor == jid
        assert not world.state.is_current(jid)

    def test_unilateral_leave(self, world):
        jid = world.create_journal("alice", "bob", "carol")
        new_id = world.client.leave_journal(world.keys["carol"], jid)
        assert world.state.journal(new_id).members == members(world, "alice", "bob")

    def test_param_change_lacking_quorum(self, world):
        jid = world.create_journal("alice", "bob", "carol", m_j=0.66)
        change = ParamChange(JournalParams(m_j=0.66, f_j=Fraction(1, 10)))
        with pytest.raises(QuorumNotMet):
            world.client.modify_journal(world.keys["alice"], jid, change, world.key_list("alice"))

    def test_param_change(self, world):
        jid = world.create_journal("alice", "bob", "carol")
        change = ParamChange(JournalParams(t_j=10))
        new_id = world.client.modify_journal(world.keys["alice"], jid, change, world.key_list("alice", "bob"))
        assert world.state.journal(new_id).params.t_j == 10

    def test_ancestor_is_frozen(self, world):
        jid = world.create_journal("alice", "bob", "carol")
        world.client.leave_journal(world.keys["carol"], jid)
        with pytest.raises(AlreadySuperseded):
            world.client.leave_journal(world.keys["bob"], jid)

    def test_cannot_empty_board(self, world):
        jid = world.create_journal("alice")
        with pytest.raises(EmptyBoardResult):
            world.client.leave_journal(world.keys["alice"], jid)

    def test_cannot_add_member_twice(self, world):
        jid = world.create_journal("alice", "bob")
        change = BoardChange(add=members(world, "bob"))
        with pytest.raises(AlreadyMember):
            world.client.modify_journal(world.keys["alice"], jid, change, world.key_list("alice", "bob"))

    def test_lineage(self, world):
        j0 = world.create_journal("alice", "bob", "carol")
        j1 = world.client.leave_journal(world.keys["carol"], j0)
        j2 = world.client.leave_journal(world.keys["bob"], j1)
        assert lineage(world.state, j1) == [j0, j1, j2]
        assert [j.id for j in current_journals(world.state)] == [j2]


class TestJoin:
    def test_accepted(self, world):
        jid = world.create_journal("alice", "bob", "carol")
        before = world.balance("dave")
        world.client.join_bid(world.keys["dave"], jid, 100)
        new_id = world.client.decide_join(world.keys["alice"], jid, world.key_list("alice", "bob"))
        assert world.journal_balance(new_id) == 100
        assert world.balance("dave") == before - 100
        assert world.person("dave") in world.state.journal(new_id).members

    def test_rejected_refunds(self, world):
        jid = world.create_journal("alice", "bob", "carol")
        before = world.balance("dave")
        world.client.join_bid(world.keys["dave"], jid, 100)
        assert world.balance("dave") == before - 100
        assert world.client.decide_join(world.keys["alice"], jid, world.key_list("alice")) is None
        assert world.balance("dave") == before
        assert world.state.is_current(jid)

    def test_zero_bid(self, world):
        jid = world.create_journal("alice", "bob", "carol")
        world.client.join_bid(world.keys["dave"], jid, 0)
        new_id = world.client.decide_join(world.keys["alice"], jid, world.key_list("alice", "bob"))
        assert world.journal_balance(new_id) == 0
        assert world.person("dave") in world.state.journal(new_id).members

    def test_expired_bid_refunds(self, world):
        jid = world.create_journal("alice", "bob", "carol")
        before = world.balance("dave")
        world.client.join_bid(world.keys["dave"], jid, 100)
        world.client.day = world.state.rules.proposal_expiry_days + 1
        assert world.client.decide_join(world.keys["alice"], jid, world.key_list("alice", "bob", "carol")) is None
        assert world.balance("dave") == before

    def test_pending_bid_blocks_modification(self, world):
        jid = world.create_journal("alice", "bob", "carol")
        world.client.join_bid(world.keys["dave"], jid, 10)
        with pytest.raises(PendingProposal):
            world.client.leave_journal(world.keys["carol"], jid)
        with pytest.raises(PendingProposal):
            world.client.join_bid(world.keys["erin"], jid, 10)

    def test_bid_beyond_wallet(self, world):
        jid = world.create_journal("alice", "bob", "carol")
        with pytest.raises(InsufficientFunds):
            world.client.join_bid(world.keys["dave"], jid, world.balance("dave") + 1)


@pytest.fixture
def funded(world):
    """Journal {alice, bob, carol, dave} whose wallet holds dave's 90 joining fee."""
    j0 = world.create_journal("alice", "bob", "carol")
    world.client.join_bid(world.keys["dave"], j0, 90)
    j1 = world.client.decide_join(world.keys["alice"], j0, world.key_list("alice", "bob"))
    return j0, j1


class TestBalance:
    def test_spend_beyond_balance(self, world, funded):
        _, j1 = funded
        with pytest.raises(InsufficientFunds):
            world.client.spend(world.keys["alice"], j1, 91, world.person("erin"),
                               world.key_list("alice", "bob", "carol", "dave"))

    def test_spend(self, world, funded):
        _, j1 = funded
        before = world.balance("erin")
        world.client.spend(world.keys["alice"], j1, 60, world.person("erin"), world.key_list("alice", "bob"))
        assert world.journal_balance(j1) == 30
        assert world.balance("erin") == before + 60

    def test_spend_quorum_on_five_members(self, world):
        jid = world.create_journal("alice", "bob", "carol", "dave", "erin", p_j=Fraction(1, 2))
        world.state.balances[journal_account(jid)] = 100
        recipient = world.person("xavier")
        payload = spend_payload(jid, 50, recipient, world.ledger.next_seq)
        three = [sign(k, payload) for k in world.key_list("alice", "bob", "carol")]
        settlement = spend_balance(world.state, jid, 50, recipient, three, world.ledger.next_seq)
        assert settlement["amount"] == 50
        with pytest.raises(QuorumNotMet):
            spend_balance(world.state, jid, 50, recipient, three[:2], world.ledger.next_seq)

    def test_transfer_to_descendant(self, world, funded):
        _, j1 = funded
        j2 = world.client.modify_journal(
            world.keys["alice"], j1, BoardChange(add=members(world, "erin")), world.key_list("alice", "bob", "carol")
        )
        world.client.transfer(world.keys["alice"], j1, j2, world.key_list("alice", "bob"))
        assert world.journal_balance(j1) == 0
        assert world.journal_balance(j2) == 90

    def test_transfer_needs_ancestor_board(self, world, funded):
        _, j1 = funded
        j2 = world.client.modify_journal(
            world.keys["alice"], j1, BoardChange(add=members(world, "erin")), world.key_list("alice", "bob", "carol")
        )
        with pytest.raises(QuorumNotMet):
            world.client.transfer(world.keys["erin"], j1, j2, world.key_list("erin"))

    def test_transfer_unrelated(self, world, funded):
        j0, j1 = funded
        j2 = world.client.leave_journal(world.keys["dave"], j1)
        with pytest.raises(NotDescendant):
            world.client.transfer(world.keys["alice"], j0, j2, world.key_list("alice", "bob"))
