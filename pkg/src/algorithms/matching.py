import math
from dataclasses import dataclass

import numpy as np

from src.protocol.errors import NoFeasibleMatch


@dataclass(frozen=True)
class Candidate:
    person: object
    rs: float
    ask: int


def mixing_threshold(candidates):
    """Required RS spread of a pool: one standard deviation of the eligible RS."""
    if not candidates:
        return 0.0
    return float(np.std([c.rs for c in candidates]))


def _better(total, people, best):
    if best is None:
        return True
    best_total, best_people = best
    return total > best_total or (total == best_total and people < best_people)


def _search(candidates, budget, n, min_spread):
    # Highest RS first so the running bound can stop the scan early
    ordered = sorted(candidates, key=lambda c: (-c.rs, c.person))
    best = None
    best_pool = None

    def visit(start, chosen, ask_sum):
        nonlocal best, best_pool
        if len(chosen) == n:
            scores = [c.rs for c in chosen]
            if min_spread is not None and max(scores) - min(scores) < min_spread:
                return
            total = math.fsum(scores)
            people = tuple(sorted(c.person for c in chosen))
            if _better(total, people, best):
                best = (total, people)
                best_pool = list(chosen)
            return

        need = n - len(chosen)
        for i in range(start, len(ordered) - need + 1):
            candidate = ordered[i]
            if best is not None:
                bound = math.fsum([c.rs for c in chosen] + [c.rs for c in ordered[i:i + need]])
                if bound < best[0]:
                    break
            if ask_sum + candidate.ask > budget:
                continue
            visit(i + 1, chosen + [candidate], ask_sum + candidate.ask)

    visit(0, [], 0)
    return best_pool


def select_reviewers(candidates, budget, n=3):
    """
    Choose the pool of ``n`` reviewers maximising total RS within the budget.

    The pool must have "mixed" RS (max - min at least one standard deviation
    of the eligible RS) whenever such a pool fits the budget; otherwise the
    mixing requirement is dropped. Ties go to the lexicographically smallest
    set of person ids.

    Args:
        candidates: Eligible Candidate records (keywords and capacity already checked)
        budget: The authors' bid R_p in micro-credits
        n: Pool size

    Returns:
        selected: List of Candidate, sorted by person id
        results: Dictionary with additional information
    """
    if len(candidates) < n:
        raise NoFeasibleMatch("not enough eligible reviewers", eligible=len(candidates), needed=n)

    spread = mixing_threshold(candidates)
    pool = _search(candidates, budget, n, spread)
    mixed = pool is not None
    if pool is None:
        pool = _search(candidates, budget, n, None)
    if pool is None:
        raise NoFeasibleMatch("no pool fits the bid", bid=budget, needed=n)

    selected = sorted(pool, key=lambda c: c.person)
    total_ask = sum(c.ask for c in selected)
    results = {
        "total_rs": math.fsum(c.rs for c in selected),
        "total_ask": total_ask,
        "leftover": budget - total_ask,
        "spread_required": spread,
        "mixed": mixed,
        "eligible": len(candidates),
    }
    return selected, results
