import itertools
from dataclasses import replace
from fractions import Fraction

import numpy as np
import pytest

from conftest import blob
from src.protocol.errors import (
    NoFeasibleMatch,
    NotEnoughReviewers,
    NotMatched,
    PreconditionFailed,
    SelfScore,
    WrongStatus,
)
from src.protocol.identity import person_id_for
from src.protocol.market import (
    FieldThresholds,
    MarketSubmission,
    ScientistProfile,
    SubmissionStatus,
    public_record,
    score_reports,
    settle,
    suggest_fair_bid,
    updated_rs,
)

REVIEWERS = ("alice", "bob", "carol")


@pytest.fixture
def market(world):
    for name in REVIEWERS:
        world.client.market_ask(world.keys[name], 10, ["ml"], 2)
    return world


def submit(world, label, bid, keywords=("ml",)):
    paper = world.publish(label, "xavier", keywords=keywords)
    return world.client.market_submit(world.keys["xavier"], paper, bid, keywords)


def key_of(world, person):
    return next(k for k in world.keys.values() if k.person_id == person)


def run_review(world, sid, paper_scores, given):
    """``given[i][j]``: score reviewer i gives reviewer j's report (in reviewer order)."""
    client = world.client
    reviewers = world.state.submission(sid).reviewers
    keys = [key_of(world, r) for r in reviewers]
    for key, score in zip(keys, paper_scores):
        client.market_review(key, sid, score, blob(f"report-{key.person_id.short}"))
    for i, key in enumerate(keys):
        client.market_rate(key, sid, {reviewers[j]: given[i][j] for j in range(len(keys)) if j != i})
    client.market_settle(client_key(world), sid)
    return reviewers


def client_key(world):
    return world.keys["xavier"]


def test_ask_creates_profile(market):
    profile = market.state.profiles[market.person("alice")]
    assert profile.ask == 10
    assert profile.capacity == 2
    assert profile.rs == market.state.rules.initial_rs


def test_settlement_pays_well_rated_reviewers(market):
    before = market.balance("xavier")
    sid = submit(market, "paper", 30)
    market.client.market_match(client_key(market), sid)
    submission = market.state.submission(sid)
    assert submission.status == SubmissionStatus.MATCHED
    assert set(submission.reviewers) == {market.person(n) for n in REVIEWERS}

    # The third reviewer's report is rated 2 by the others
    given = [[None, 4, 2], [4, None, 2], [4, 4, None]]
    reviewers = run_review(market, sid, [4, 4, 5], given)

    settled = market.state.submission(sid)
    assert settled.status == SubmissionStatus.SETTLED
    result = settled.settlement
    assert [result.payments[r] for r in reviewers] == [10, 10, 0]
    assert result.refund == 10
    assert result.accepted
    assert market.balance("xavier") == before - 20
    assert [market.state.profiles[r].rs for r in reviewers] == [5.0, 5.0, 3.0]
    assert all(market.state.profiles[r].active == 0 for r in reviewers)
    assert market.state.balance(settled.escrow) == 0


def test_rejected_paper_is_withdrawn(market):
    sid = submit(market, "weak", 30)
    market.client.market_match(client_key(market), sid)
    given = [[None, 4, 4], [4, None, 4], [4, 4, None]]
    run_review(market, sid, [2, 3, 3], given)
    submission = market.state.submission(sid)
    assert submission.status == SubmissionStatus.WITHDRAWN
    assert not submission.settlement.accepted
    assert submission.settlement.refund == 0


def test_reviewers_learn_keywords(market):
    sid = submit(market, "cross", 30, keywords=("ml", "stats"))
    market.client.market_match(client_key(market), sid)
    run_review(market, sid, [4, 4, 4], [[None, 4, 4], [4, None, 4], [4, 4, None]])
    assert "stats" in market.state.profiles[market.person("alice")].keywords


def test_bid_below_asks_stays_queued(market):
    sid = submit(market, "cheap", 25)
    with pytest.raises(NoFeasibleMatch):
        market.client.market_match(client_key(market), sid)
    assert market.client.market_sweep(client_key(market)) == []
    assert market.state.submission(sid).status == SubmissionStatus.SUBMITTED


def test_sweep_matches_in_order(market):
    cheap = submit(market, "cheap", 25)
    fair = submit(market, "fair", 30)
    assert market.client.market_sweep(client_key(market)) == [fair]
    assert market.state.submission(cheap).status == SubmissionStatus.SUBMITTED


def test_payer_withdraws_queued_submission(market):
    before = market.balance("xavier")
    sid = submit(market, "cheap", 25)
    with pytest.raises(PreconditionFailed):
        market.client.market_withdraw(market.keys["alice"], sid)
    market.client.market_withdraw(client_key(market), sid)
    submission = market.state.submission(sid)
    assert submission.status == SubmissionStatus.EXPIRED
    assert market.balance("xavier") == before
    assert market.state.balance(submission.escrow) == 0


def test_stalled_review_expires_with_full_refund(market):
    before = market.balance("xavier")
    sid = submit(market, "stalled", 30)
    market.client.market_match(client_key(market), sid)
    reviewers = market.state.submission(sid).reviewers
    market.client.market_review(key_of(market, reviewers[0]), sid, 4, blob("only-report"))

    days = market.state.rules.market_review_days
    market.client.day = days
    with pytest.raises(PreconditionFailed):
        market.client.market_withdraw(market.keys["alice"], sid)
    assert market.client.market_expire(market.registrar) == []

    market.client.day = days + 1
    assert market.client.market_expire(market.registrar) == [sid]
    assert market.state.submission(sid).status == SubmissionStatus.EXPIRED
    assert market.balance("xavier") == before
    assert all(market.state.profiles[r].active == 0 for r in reviewers)
    with pytest.raises(WrongStatus):
        market.client.market_withdraw(client_key(market), sid)


def test_authors_do_not_review_their_paper(market):
    market.client.market_ask(market.keys["xavier"], 0, ["ml"], 2)
    sid = submit(market, "own", 30)
    market.client.market_match(client_key(market), sid)
    assert market.person("xavier") not in market.state.submission(sid).reviewers


def test_journal_bid_on_certified_paper(market):
    journal = market.create_journal("dave", "erin")
    sid = submit(market, "good", 30)
    market.client.market_match(client_key(market), sid)
    run_review(market, sid, [5, 5, 5], [[None, 4, 4], [4, None, 4], [4, 4, None]])
    market.client.market_journal_bid(market.keys["dave"], sid, journal, 500)
    record = public_record(market.state, market.state.submission(sid))
    assert record["journal_bids"][0]["offer"] == 500
    assert record["accepted"]


def profile(label, rs=1.0, ask=10, keywords=("ml",), capacity=2):
    return ScientistProfile(person_id_for(label.encode("utf-8").ljust(32, b".")), frozenset(keywords), rs, ask, capacity)


def profiles_of(*items):
    return {p.person: p for p in items}


def test_fair_bid_suggestion():
    profiles = profiles_of(profile("a"), profile("b"), profile("c"), profile("d", ask=50))
    assert suggest_fair_bid(profiles, ["ml"]) == 33
    free = profiles_of(profile("a", ask=0), profile("b", ask=0), profile("c", ask=0))
    assert suggest_fair_bid(free, ["ml"]) == 0
    with pytest.raises(NotEnoughReviewers):
        suggest_fair_bid(profiles_of(profile("a"), profile("b")), ["ml"])
    with pytest.raises(NotEnoughReviewers):
        suggest_fair_bid(profiles, ["physics"])


def test_field_thresholds():
    thresholds = FieldThresholds({"ml": 3.5, "graphs": 4.0}, default=3.0)
    assert thresholds.for_keywords({"ml"}) == 3.5
    assert thresholds.for_keywords({"ml", "graphs"}) == 4.0
    assert thresholds.for_keywords({"biology"}) == 3.0


def test_rs_update_modes():
    assert updated_rs(1.0, Fraction(4), "additive", 0.5) == 5.0
    assert updated_rs(1.0, Fraction(5), "ema", 0.5) == 3.0


def scored_submission(reviewers, asks, bid, paper_scores, given, keywords=("ml",)):
    report_scores = {
        reviewers[i]: {reviewers[j]: given[i][j] for j in range(len(reviewers)) if j != i}
        for i in range(len(reviewers))
    }
    return MarketSubmission(
        id=blob("submission"),
        paper=blob("paper"),
        payer=person_id_for(b"author".ljust(32, b".")),
        authors=frozenset(),
        keywords=frozenset(keywords),
        bid=bid,
        seq=1,
        created_at=0,
        status=SubmissionStatus.REPORT_SCORED,
        reviewers=tuple(reviewers),
        asks=dict(zip(reviewers, asks)),
        paper_scores=dict(zip(reviewers, paper_scores)),
        report_scores=report_scores,
    )


def test_self_score_rejected():
    people = profiles_of(profile("a"), profile("b"), profile("c"))
    reviewers = sorted(people)
    submission = scored_submission(reviewers, [10] * 3, 30, [4] * 3, [[4] * 3] * 3)
    open_step = replace(submission, status=SubmissionStatus.SCORED, report_scores={})
    with pytest.raises(SelfScore):
        score_reports(open_step, reviewers[0], {reviewers[0]: 5, reviewers[1]: 5})
    with pytest.raises(NotMatched):
        score_reports(open_step, reviewers[0], {reviewers[1]: 5})


def test_random_settlements_conserve_bid():
    rng = np.random.default_rng(3)
    people = profiles_of(profile("a"), profile("b"), profile("c"))
    reviewers = sorted(people)
    for _ in range(1000):
        asks = [int(x) for x in rng.integers(0, 100, size=3)]
        bid = sum(asks) + int(rng.integers(0, 50))
        given = [[int(x) for x in rng.integers(1, 6, size=3)] for _ in range(3)]
        paper_scores = [int(x) for x in rng.integers(1, 6, size=3)]
        submission = scored_submission(reviewers, asks, bid, paper_scores, given)
        result = settle(submission, people, FieldThresholds(), 3.0)
        assert result.total == bid
        for reviewer, ask in zip(reviewers, asks):
            assert result.payments[reviewer] in (0, ask)


def test_payment_independent_of_scores_given():
    people = profiles_of(profile("a"), profile("b"), profile("c"))
    reviewers = sorted(people)
    payments = set()
    for row in itertools.product(range(1, 6), repeat=3):
        given = [list(row), [4, 4, 4], [2, 2, 2]]
        submission = scored_submission(reviewers, [10, 20, 30], 60, [4, 4, 4], given)
        payments.add(settle(submission, people, FieldThresholds(), 3.0).payments[reviewers[0]])
    assert len(payments) == 1


def test_rs_grows_with_good_reports():
    people = profiles_of(profile("a"), profile("b"), profile("c"))
    reviewers = sorted(people)
    given = [[5, 5, 5]] * 3
    for k in range(1, 5):
        submission = scored_submission(reviewers, [10] * 3, 30, [4] * 3, given)
        result = settle(submission, people, FieldThresholds(), 3.0)
        people = {r: replace(people[r], rs=result.rs_after[r]) for r in reviewers}
        assert all(people[r].rs == 1.0 + 5 * k for r in reviewers)
