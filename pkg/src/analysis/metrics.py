import logging
from dataclasses import asdict, dataclass, field

import numpy as np
import pandas as pd

from src.analysis.reputation import compute_reputation

logger = logging.getLogger(__name__)

RS_QUANTILES = (0.25, 0.5, 0.75)


@dataclass
class PeriodCounters:
    """Activity accumulated between two samples."""

    submitted: int = 0
    accepted: int = 0
    review_fees: list = field(default_factory=list)
    matched_fees: list = field(default_factory=list)
    joining_fees: list = field(default_factory=list)


@dataclass(frozen=True)
class MetricsRow:
    day: int
    papers_submitted: int
    papers_accepted: int
    mean_review_fee: float
    mean_matched_fee: float
    mean_joining_fee: float
    reviewer_supply: int
    rs_q25: float
    rs_median: float
    rs_q75: float
    journal_score_mean: float
    journal_score_max: float


def _mean(values):
    return float(np.mean(values)) if values else 0.0


def reviewer_supply(state, withdrawn=frozenset()):
    """Spare market review capacity of reviewers still active."""
    return sum(
        max(0, p.capacity - p.active)
        for person, p in state.profiles.items()
        if person not in withdrawn
    )


def rs_quantiles(state):
    scores = [p.rs for p in state.profiles.values()]
    if not scores:
        return (0.0,) * len(RS_QUANTILES)
    return tuple(float(q) for q in np.quantile(scores, RS_QUANTILES))


def sample_metrics(state, day, counters, config, withdrawn=frozenset()):
    """
    One metrics row for the period ending on ``day``.

    Args:
        state: ProtocolState after the day's events
        day: Sampling day
        counters: PeriodCounters of the period
        config: Config (reputation settings)
        withdrawn: Reviewers removed by a supply shock

    Returns:
        MetricsRow
    """
    reputation = compute_reputation(state, config, at_day=day)
    current = [j for j in reputation.journal_score if state.is_current(j)]
    scores = [reputation.journal_score[j] for j in current]
    q25, median, q75 = rs_quantiles(state)
    return MetricsRow(
        day=day,
        papers_submitted=counters.submitted,
        papers_accepted=counters.accepted,
        mean_review_fee=_mean(counters.review_fees),
        mean_matched_fee=_mean(counters.matched_fees),
        mean_joining_fee=_mean(counters.joining_fees),
        reviewer_supply=reviewer_supply(state, withdrawn),
        rs_q25=q25,
        rs_median=median,
        rs_q75=q75,
        journal_score_mean=_mean(scores),
        journal_score_max=float(max(scores)) if scores else 0.0,
    )


def metrics_frame(rows):
    columns = list(MetricsRow.__dataclass_fields__)
    return pd.DataFrame([asdict(r) for r in rows], columns=columns)
