"""
Deterministic agent-based scenario engine.

Each simulated day the engine applies supply shocks, lets every agent act in
PersonId order, advances open journal review rounds, sweeps the market and
decides pending join bids. All randomness comes from per-agent (or
per-round) streams, so a scenario always produces the same ledger.
"""
import hashlib
import logging
from dataclasses import dataclass, field, replace

from src.analysis.metrics import PeriodCounters, metrics_frame, sample_metrics
from src.protocol.canonical import canonicalize
from src.protocol.client import ProtocolClient
from src.protocol.errors import LedgerError, NotEnoughReviewers, PreconditionFailed, ScenarioError
from src.protocol.identity import content_hash, derive_seed, keygen
from src.protocol.journal import JournalParams, current_journals
from src.protocol.ledger import Ledger, head_summary
from src.protocol.market import SubmissionStatus, suggest_fair_bid
from src.protocol.review import RoundStatus
from src.protocol.state import Rules, person_account
from src.simulation.policies import AgentPolicy
from src.simulation.rng import split_rng
from src.utils.config import Config

logger = logging.getLogger(__name__)

ENGINE_VERSION = "1"


@dataclass(frozen=True)
class Agent:
    name: str
    group: str
    role: str
    key: object
    policy: AgentPolicy
    keywords: tuple
    wallet: int
    journal: str | None = None

    @property
    def person(self):
        return self.key.person_id


@dataclass
class SimulationResult:
    ledger: Ledger
    metrics: object
    summary: list = field(default_factory=list)


def build_agents(scenario):
    """Agents of every group, keyed deterministically by (seed, group, index), in PersonId order."""
    agents = []
    for group in scenario.groups:
        for index in range(group.count):
            key = keygen(derive_seed(f"{scenario.seed}/{group.name}/{index}"), scenario.signature_scheme)
            agents.append(Agent(
                name=f"{group.name}-{index}",
                group=group.name,
                role=group.role,
                key=key,
                policy=group.policy,
                keywords=group.keywords,
                wallet=group.wallet,
                journal=group.journal,
            ))
    return sorted(agents, key=lambda a: a.person)


class Simulation:
    """
    One scenario run.

    Args:
        scenario: Scenario from src.data.loader
        config: Config; scenario thresholds and seed are layered on top
        check_invariants: Verify money conservation after every event and
            capacity limits after every day
        record_digests: Keep the ledger state digest after every event
    """

    def __init__(self, scenario, config=None, check_invariants=False, record_digests=False):
        base = config or Config()
        self.scenario = scenario
        self.seed = scenario.seed if base.seed is None else base.seed
        self.config = replace(
            base,
            thresholds={**base.thresholds, **scenario.thresholds},
            default_threshold=(
                scenario.default_threshold if scenario.default_threshold is not None else base.default_threshold
            ),
            signature_scheme=scenario.signature_scheme,
            seed=self.seed,
        )
        self.check_invariants = check_invariants
        self.agents = build_agents(replace(scenario, seed=self.seed))
        self.by_person = {a.person: a for a in self.agents}
        self.registrar = keygen(derive_seed(f"{self.seed}/registrar"), scenario.signature_scheme)
        self.keys = {a.person: a.key for a in self.agents}
        self.keys[self.registrar.person_id] = self.registrar

        salt = hashlib.sha256(f"principia-sim-salt/{self.seed}".encode("utf-8")).digest()
        self.ledger = Ledger(salt, record_digests=record_digests, check_conservation=check_invariants)
        self.client = ProtocolClient(self.ledger)

        self.specs = {spec.name: spec for spec in scenario.journals}
        self.root_spec = {}
        self.quality = {}
        self.withdrawn = set()
        self.counters = PeriodCounters()
        self.rows = []

    @property
    def state(self):
        return self.ledger.state

    def _try(self, action, *args, **kwargs):
        """Run a protocol step; a refused step is skipped, integrity failures propagate."""
        try:
            return action(*args, **kwargs)
        except LedgerError:
            raise
        except PreconditionFailed as exc:
            logger.debug("Skipped %s: %s", getattr(action, "__name__", action), exc)
            return None

    def policy_of(self, person):
        agent = self.by_person.get(person)
        return agent.policy if agent is not None else AgentPolicy()

    def spec_of(self, journal_id):
        root = journal_id
        while self.state.journal(root).ancestor is not None:
            root = self.state.journal(root).ancestor
        return self.root_spec[root]

    # Setup

    def setup(self):
        self.client.day = 0
        self.client.genesis(self.registrar, Rules.from_config(self.config))
        for agent in self.agents:
            self.client.register_key(self.registrar, agent.key.public, agent.key.scheme, validated=True)
            if agent.wallet:
                self.client.mint(self.registrar, agent.person, agent.wallet)

        for spec in self.scenario.journals:
            board = [a.key for a in self.agents if a.journal == spec.name]
            try:
                journal_id = self.client.create_journal(board[0], board[1:], JournalParams(**spec.params))
            except PreconditionFailed as exc:
                raise ScenarioError(str(exc), file=self.scenario.source, section=f"journal:{spec.name}") from exc
            self.root_spec[journal_id] = spec

        for agent in self.agents:
            if agent.role == "reviewer":
                ask = agent.policy.reviewer_ask(self.config.initial_rs)
                self.client.market_ask(agent.key, ask, agent.keywords, agent.policy.capacity)

    # Daily steps

    def apply_shocks(self, day):
        for shock in sorted(self.scenario.shocks, key=lambda s: s.name):
            if shock.day != day:
                continue
            group = [a.person for a in self.agents if a.group == shock.group and a.role == "reviewer"]
            group = [p for p in group if p not in self.withdrawn]
            count = round(shock.fraction * len(group))
            if not count:
                continue
            rng = split_rng(self.seed, ["shock", shock.name], day)
            picks = rng.choice(len(group), size=count, replace=False)
            self.withdrawn.update(group[int(i)] for i in picks)
            logger.info("Shock %s: %d reviewers withdraw on day %d", shock.name, count, day)

    def author_day(self, agent, rng, day):
        policy = agent.policy
        if rng.random() >= policy.paper_rate:
            return
        paper = content_hash(canonicalize(["sim-paper", agent.person, day]))
        quality = policy.draw_quality(rng)
        published = sorted(self.state.publications)
        cites = []
        if published:
            k = min(len(published), int(rng.integers(0, 4)))
            if k:
                cites = [published[int(i)] for i in sorted(rng.choice(len(published), size=k, replace=False))]
        if self._try(self.client.publish_paper, agent.key, paper, [agent.key], agent.keywords, cites) is None:
            return
        self.quality[paper] = quality
        self.counters.submitted += 1
        balance = self.state.balance(person_account(agent.person))

        if rng.random() < self.scenario.market_share:
            try:
                fair = suggest_fair_bid(
                    self.state.profiles, agent.keywords, self.config.fair_bid_factor,
                    exclude={agent.person}, n=self.state.rules.market_reviewers,
                )
            except NotEnoughReviewers:
                fair = None
            if fair is not None:
                bid = min(policy.author_bid(fair), balance)
                self._try(self.client.market_submit, agent.key, paper, bid, agent.keywords)
                return

        venues = [
            j for j in sorted(current_journals(self.state), key=lambda j: j.id)
            if not self.spec_of(j.id).keywords or set(self.spec_of(j.id).keywords) & set(agent.keywords)
        ]
        if not venues:
            return
        journal = venues[int(rng.integers(0, len(venues)))]
        fee = min(policy.author_bid(self.spec_of(journal.id).review_fee), balance)
        if self._try(self.client.review_bid, agent.key, paper, journal.id, fee) is not None:
            self.counters.review_fees.append(fee)

    def reviewer_day(self, agent, rng, day):
        profile = self.state.profiles.get(agent.person)
        if agent.person in self.withdrawn:
            # Finish current reviews, take no new ones
            if profile is not None and profile.capacity != profile.active:
                self._try(self.client.market_ask, agent.key, profile.ask, profile.keywords, profile.active)
            return
        if profile is not None:
            ask = agent.policy.reviewer_ask(profile.rs, profile.active, profile.capacity)
            if ask != profile.ask:
                self._try(self.client.market_ask, agent.key, ask, profile.keywords, profile.capacity)

        if agent.policy.join_rate and rng.random() < agent.policy.join_rate:
            options = [
                j for j in sorted(current_journals(self.state), key=lambda j: j.id)
                if agent.person not in j.members and j.id not in self.state.pending_joins
            ]
            if not options:
                return
            journal = options[int(rng.integers(0, len(options)))]
            fee = agent.policy.joining_fee(self.state.balance(person_account(agent.person)))
            if self._try(self.client.join_bid, agent.key, journal.id, fee) is not None:
                self.counters.joining_fees.append(fee)

    def advance_round(self, review_round, day):
        state = self.state
        journal = state.journal(review_round.journal)
        actor = self.keys[journal.board[0]]
        rng = split_rng(self.seed, review_round.id, day)
        quality = self.quality.get(review_round.paper, 3.0)
        status = review_round.status

        if status == RoundStatus.BID:
            approvers = [
                self.keys[m] for m in journal.board
                if rng.random() < self.policy_of(m).vote_probability(quality)
            ]
            self._try(self.client.accept_for_review, actor, review_round.id, approvers, self.keys[review_round.payer])
        elif status == RoundStatus.ACCEPTED_FOR_REVIEW:
            self._try(self.client.assign_reviewers, actor, review_round.id)
        elif status == RoundStatus.UNDER_REVIEW:
            for reviewer in review_round.reviewers:
                policy = self.policy_of(reviewer)
                if reviewer in review_round.scores or day > review_round.deadline or not policy.works_today(rng):
                    continue
                report = content_hash(canonicalize(["sim-report", review_round.id, reviewer]))
                self._try(self.client.submit_review, self.keys[reviewer], review_round.id,
                          policy.review_score(quality, rng), report)
            updated = state.round(review_round.id)
            if len(updated.scores) == len(updated.reviewers) or day > updated.deadline:
                self._try(self.client.decide, actor, review_round.id)
        elif status == RoundStatus.DECIDED:
            if review_round.decision:
                version = content_hash(canonicalize(["sim-final", review_round.paper]))
                self._try(self.client.final_version, self.keys[review_round.payer], review_round.id, version)
            else:
                self._try(self.client.settle_round, actor, review_round.id)
        elif status == RoundStatus.FINAL_VOTE:
            for reviewer in review_round.reviewers:
                if reviewer not in review_round.final_votes:
                    approve = self.policy_of(reviewer).final_approval(quality, rng)
                    self._try(self.client.final_vote, self.keys[reviewer], review_round.id, approve)
            if self._try(self.client.settle_round, actor, review_round.id) is not None:
                if review_round.paper in state.publications:
                    self.counters.accepted += 1

    def advance_submission(self, submission, day):
        rng = split_rng(self.seed, submission.id, day)
        registrar = self.registrar
        if submission.status == SubmissionStatus.MATCHED:
            quality = self.quality.get(submission.paper, 3.0)
            for reviewer in submission.reviewers:
                policy = self.policy_of(reviewer)
                if reviewer in submission.paper_scores or not policy.works_today(rng):
                    continue
                report = content_hash(canonicalize(["sim-market-report", submission.id, reviewer]))
                self._try(self.client.market_review, self.keys[reviewer], submission.id,
                          policy.review_score(quality, rng), report)
        elif submission.status == SubmissionStatus.SCORED:
            for scorer in submission.reviewers:
                if scorer in submission.report_scores:
                    continue
                policy = self.policy_of(scorer)
                scores = {
                    other: policy.report_score(self.policy_of(other).diligence, rng)
                    for other in submission.reviewers if other != scorer
                }
                self._try(self.client.market_rate, self.keys[scorer], submission.id, scores)
        elif submission.status == SubmissionStatus.REPORT_SCORED:
            if self._try(self.client.market_settle, registrar, submission.id) is not None:
                if self.state.submission(submission.id).status == SubmissionStatus.SETTLED:
                    self.counters.accepted += 1

    def market_day(self, day):
        matched = self._try(self.client.market_sweep, self.registrar) or []
        for submission_id in matched:
            self.counters.matched_fees.append(sum(self.state.submission(submission_id).asks.values()))
        active = (SubmissionStatus.MATCHED, SubmissionStatus.SCORED, SubmissionStatus.REPORT_SCORED)
        for submission in sorted(self.state.submissions.values(), key=lambda s: s.seq):
            if submission.status in active:
                self.advance_submission(submission, day)
        # Capacity freed by an expiry is offered from the next day on
        self._try(self.client.market_expire, self.registrar)

    def join_day(self, day):
        for journal_id, pending in sorted(self.state.pending_joins.items()):
            journal = self.state.journal(journal_id)
            spec = self.spec_of(journal_id)
            approvers = [self.keys[m] for m in journal.board] if pending.bid >= spec.min_join_fee else []
            self._try(self.client.decide_join, self.keys[journal.board[0]], journal_id, approvers)

    def step(self, day):
        self.client.day = day
        self.apply_shocks(day)
        for agent in self.agents:
            rng = split_rng(self.seed, agent.person, day)
            if agent.role == "author":
                self.author_day(agent, rng, day)
            else:
                self.reviewer_day(agent, rng, day)

        open_rounds = sorted(
            (r for r in self.state.rounds.values() if r.status not in (RoundStatus.SETTLED, RoundStatus.FAILED)),
            key=lambda r: (r.created_at, r.id),
        )
        for review_round in open_rounds:
            self.advance_round(review_round, day)
        self.market_day(day)
        self.join_day(day)

        if self.check_invariants:
            check_invariants(self.state)
        if day % self.scenario.sample_every == 0 or day == self.scenario.horizon_days:
            self.rows.append(sample_metrics(self.state, day, self.counters, self.config, frozenset(self.withdrawn)))
            self.counters = PeriodCounters()

    def summary(self):
        state = self.state
        pairs = [
            ("scenario", self.scenario.source),
            ("engine_version", ENGINE_VERSION),
            ("seed", self.seed),
            ("horizon_days", self.scenario.horizon_days),
            ("agents", len(self.agents)),
            ("journals", len(state.journals)),
            ("papers", len(state.papers)),
            ("journal_publications", len(state.publications)),
            ("market_certified", sum(1 for s in state.submissions.values() if s.status == SubmissionStatus.SETTLED)),
        ]
        pairs.extend(head_summary(self.ledger).items())
        pairs.extend(self.config.describe())
        return pairs

    def run(self):
        self.setup()
        for day in range(1, self.scenario.horizon_days + 1):
            self.step(day)
        logger.info("Scenario %s finished: %d events", self.scenario.source, len(self.ledger))
        return SimulationResult(ledger=self.ledger, metrics=metrics_frame(self.rows), summary=self.summary())


def check_invariants(state):
    """Protocol invariants that must hold after every simulated day."""
    if state.total_money() != state.minted:
        raise LedgerError("money not conserved", total=state.total_money(), minted=state.minted)
    for account, balance in state.balances.items():
        if balance < 0:
            raise LedgerError("negative balance", account=account)
    for person, profile in state.profiles.items():
        if profile.active > profile.capacity:
            raise LedgerError("capacity exceeded", person=person.short)
    for review_round in state.rounds.values():
        if review_round.payout is not None and review_round.payout.total != review_round.fee:
            raise LedgerError("review fee not conserved", round=review_round.id.hex[:12])


def run(scenario, config=None, check_invariants=False, record_digests=False):
    """Run a scenario; returns SimulationResult with ``ledger`` and ``metrics``."""
    return Simulation(scenario, config, check_invariants, record_digests).run()
