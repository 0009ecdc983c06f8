"""
Parametric agent behaviour.

Every rule is a pure function of the agent's parameters, what it can observe
on the ledger, and its own RNG stream.
"""
import math
from dataclasses import dataclass

import numpy as np

from src.protocol.review import MAX_SCORE, MIN_SCORE


@dataclass(frozen=True)
class AgentPolicy:
    """
    Policy parameters of one agent group.

    Authors:
        paper_rate: Probability of writing a paper on a given day
        quality_mean / quality_spread: Latent paper quality on the 1..5 scale
        bid_fraction: Bid as a fraction of the suggested fair bid (market)
            or of the journal's posted review fee
    Reviewers:
        base_price: Ask of a reviewer with RS 1, in micro-credits
        ask_markup: Multiplier over the RS-implied price
        demand_weight: Extra markup per unit of capacity in use
        capacity: Maximum concurrent market reviews
        diligence: Probability of working on an open review on a given day;
            also drives report quality
        noise: Standard deviation of reviewing noise
        join_rate: Daily probability of bidding to join a board
        join_fee: Joining fee offered
    Board members:
        vote_slope: Steepness of the accept-for-review vote in paper quality
    """

    paper_rate: float = 0.1
    quality_mean: float = 3.0
    quality_spread: float = 1.0
    bid_fraction: float = 1.0
    base_price: int = 10_000
    ask_markup: float = 1.0
    demand_weight: float = 0.5
    capacity: int = 3
    diligence: float = 0.8
    noise: float = 0.5
    join_rate: float = 0.0
    join_fee: int = 0
    vote_slope: float = 2.0

    def draw_quality(self, rng):
        return float(np.clip(rng.normal(self.quality_mean, self.quality_spread), MIN_SCORE, MAX_SCORE))

    def author_bid(self, reference_fee):
        """Bid for review: a fraction of the fair bid or posted fee."""
        return max(0, math.floor(reference_fee * self.bid_fraction))

    def reviewer_ask(self, rs, active=0, capacity=None):
        """Markup over an RS-implied price, rising with the share of capacity in use."""
        capacity = self.capacity if capacity is None else capacity
        utilisation = active / capacity if capacity else 1.0
        price = self.base_price * math.sqrt(max(rs, 0.0))
        return max(0, math.ceil(price * self.ask_markup * (1 + self.demand_weight * utilisation)))

    def vote_probability(self, quality):
        """Probability that a board member accepts a paper for review."""
        return 1.0 / (1.0 + math.exp(-self.vote_slope * (quality - 3.0)))

    def review_score(self, quality, rng):
        return int(np.clip(round(quality + rng.normal(0.0, self.noise)), MIN_SCORE, MAX_SCORE))

    def report_score(self, scoree_diligence, rng):
        """How this reviewer rates a colleague's report."""
        expected = MIN_SCORE + (MAX_SCORE - MIN_SCORE) * scoree_diligence
        return int(np.clip(round(expected + rng.normal(0.0, self.noise)), MIN_SCORE, MAX_SCORE))

    def final_approval(self, quality, rng):
        return bool(rng.random() < self.vote_probability(quality + 1.0))

    def joining_fee(self, wallet):
        return max(0, min(self.join_fee, wallet))

    def works_today(self, rng):
        return bool(rng.random() < self.diligence)
