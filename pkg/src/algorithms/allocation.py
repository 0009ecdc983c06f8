from dataclasses import dataclass, field
from fractions import Fraction
import math

from src.protocol.errors import PreconditionFailed

# Midpoint of the 1..5 review scale; scores near it are non-committal
NEUTRAL_SCORE = 3


def as_fraction(value):
    """
    Exact rational value of a protocol fraction.

    Floats are read through their shortest repr, so 0.34 becomes 17/50
    rather than the nearest binary double.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise TypeError("booleans are not fractions")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ValueError("fraction must be finite")
        return Fraction(repr(value))
    return Fraction(str(value))


def quorum_required(q, board_size):
    """Approvals needed for a qualified majority: ceil(q * |board|)."""
    return math.ceil(as_fraction(q) * board_size)


def apportion(total, exact_amounts):
    """
    Round exact shares to integers with the largest-remainder method.

    Args:
        total: Integer amount to distribute
        exact_amounts: Non-negative Fractions summing exactly to ``total``

    Returns:
        List of integers summing to ``total``; ties go to the lower index
    """
    if sum(exact_amounts, Fraction(0)) != total:
        raise ValueError("exact amounts must sum to the total")
    floors = [math.floor(amount) for amount in exact_amounts]
    leftover = total - sum(floors)

    # Hand out the remaining units to the largest fractional parts
    order = sorted(
        range(len(exact_amounts)),
        key=lambda i: (-(exact_amounts[i] - floors[i]), i),
    )
    for i in order[:leftover]:
        floors[i] += 1
    return floors


def review_shares(scores):
    """
    Repaired fee-split shares for a list of integer scores.

    share_u = 1/n + 1/2 * D_u - 1/2 * A_u, where D_u rewards distance from the
    neutral score and A_u penalises distance from the mean. A term whose
    denominator is zero is replaced by the uniform 1/n. Shares sum to 1 and
    may be negative.
    """
    n = len(scores)
    if n == 0:
        raise PreconditionFailed("fee split needs at least one score")
    uniform = Fraction(1, n)
    mean = Fraction(sum(scores), n)

    decisiveness = [abs(Fraction(s) - NEUTRAL_SCORE) for s in scores]
    disagreement = [abs(Fraction(s) - mean) for s in scores]
    decisiveness_total = sum(decisiveness, Fraction(0))
    disagreement_total = sum(disagreement, Fraction(0))

    shares = []
    for d, a in zip(decisiveness, disagreement):
        d_term = d / decisiveness_total if decisiveness_total else uniform
        a_term = a / disagreement_total if disagreement_total else uniform
        shares.append(uniform + d_term / 2 - a_term / 2)
    return shares


@dataclass(frozen=True)
class Payout:
    reviewer_amounts: dict = field(default_factory=dict)
    journal_share: int = 0
    refund_to_authors: int = 0

    @property
    def total(self):
        return self.journal_share + sum(self.reviewer_amounts.values()) + self.refund_to_authors


def split_review_fee(fee, f_j, scores):
    """
    Split a review fee between the journal wallet and the reviewers.

    Args:
        fee: Review fee f_r in micro-credits
        f_j: Fraction of the fee kept by the journal
        scores: Mapping reviewer -> integer score 1..5 (submitted reviews only)

    Returns:
        Payout with journal_share + sum(reviewer_amounts) == fee
    """
    if fee < 0:
        raise PreconditionFailed("fee must be non-negative", fee=fee)
    reviewers = sorted(scores)
    shares = review_shares([scores[r] for r in reviewers])

    keep = as_fraction(f_j)
    if not 0 <= keep <= 1:
        raise PreconditionFailed("f_j must lie in [0, 1]", f_j=f_j)
    pool = fee * (1 - keep)

    # Negative shares are clipped to zero; the positive ones are rescaled so
    # the reviewers never receive more than the pool
    clipped = [max(Fraction(0), share) for share in shares]
    clipped_total = sum(clipped, Fraction(0))
    exact = [pool * share / clipped_total for share in clipped]

    journal_exact = fee - sum(exact, Fraction(0))
    amounts = apportion(fee, [journal_exact] + exact)
    return Payout(
        reviewer_amounts=dict(zip(reviewers, amounts[1:])),
        journal_share=amounts[0],
        refund_to_authors=0,
    )


def split_failed_round(fee, f_j):
    """Journal keeps f_j * fee; the rest returns to the authors."""
    journal_exact = fee * as_fraction(f_j)
    journal_share, refund = apportion(fee, [journal_exact, fee - journal_exact])
    return Payout(reviewer_amounts={}, journal_share=journal_share, refund_to_authors=refund)
