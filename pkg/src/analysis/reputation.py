"""
Journal, user and editorial-board scores.

journal score  = citations into the journal's papers, each weighted by the
                 board score of the citing paper's journal, per paper
user score     = service-time-weighted mean of the journal scores of the
                 boards a person served on
board score    = mean user score of the board

The three definitions are mutually recursive, so they are solved together as
a damped fixed point over the user scores.
"""
import logging
from dataclasses import dataclass, field

import networkx as nx
import numpy as np
import pandas as pd
from scipy import sparse

from src.algorithms.fixedpoint import damped_iteration
from src.utils.config import PROTOCOL_DEFAULTS

logger = logging.getLogger(__name__)


@dataclass
class CitationGraph:
    """Published papers (nodes, with their publishing journal) and declared citations."""

    graph: nx.DiGraph = field(default_factory=nx.DiGraph)

    def add_paper(self, paper, journal):
        self.graph.add_node(paper, journal=journal)

    def add_citation(self, citing, cited):
        # Citations from or to papers outside any journal carry no weight
        if citing in self.graph and cited in self.graph:
            self.graph.add_edge(citing, cited)

    def journal_of(self, paper):
        return self.graph.nodes[paper]["journal"]

    def papers_of(self, journal):
        return [p for p, j in self.graph.nodes(data="journal") if j == journal]

    def paper_counts(self):
        counts = {}
        for _, journal in self.graph.nodes(data="journal"):
            counts[journal] = counts.get(journal, 0) + 1
        return counts

    def citing_journals(self, journal):
        """Journal of every citing paper, once per citation into ``journal``'s papers."""
        return [
            self.journal_of(citing)
            for citing, cited in self.graph.edges()
            if self.journal_of(cited) == journal
        ]

    @classmethod
    def from_state(cls, state, at_day=None, window=None):
        """
        Build the graph as of ``at_day``.

        Args:
            state: ProtocolState
            at_day: Evaluation day (defaults to the ledger day)
            window: Only citations declared in the last ``window`` days count (None = all-time)
        """
        at_day = state.day if at_day is None else at_day
        citation_graph = cls()
        for publication in state.publications.values():
            if publication.day <= at_day:
                citation_graph.add_paper(publication.paper, publication.journal)
        for citing in sorted(state.citations):
            for cited, day in sorted(state.citations[citing].items()):
                if day > at_day or (window is not None and at_day - day > window):
                    continue
                citation_graph.add_citation(citing, cited)
        return citation_graph


@dataclass
class ReputationState:
    journal_score: dict
    user_score: dict
    board_score: dict
    papers: dict
    citations: dict
    iterations: int
    residual: float
    converged: bool

    def journal_table(self):
        rows = [
            {
                "journal": journal.hex,
                "papers": self.papers.get(journal, 0),
                "citations": self.citations.get(journal, 0),
                "journal_score": self.journal_score[journal],
                "board_score": self.board_score[journal],
            }
            for journal in sorted(self.journal_score)
        ]
        return pd.DataFrame(rows, columns=["journal", "papers", "citations", "journal_score", "board_score"])

    def person_table(self):
        rows = [{"person": person.hex, "user_score": score} for person, score in sorted(self.user_score.items())]
        return pd.DataFrame(rows, columns=["person", "user_score"])


# Single-score definitions

def journal_score(journal, graph, board_scores):
    """Citation-weighted score per published paper; 0 for a journal without papers."""
    papers = len(graph.papers_of(journal))
    if papers == 0:
        return 0.0
    return sum(board_scores.get(c, 0.0) for c in graph.citing_journals(journal)) / papers


def user_score(person, intervals, journal_scores, at_day, default=PROTOCOL_DEFAULTS['default_user_score']):
    """Service-time-weighted mean of journal scores; ``default`` without (positive) service."""
    weighted = 0.0
    total = 0
    for interval in intervals:
        if interval.person != person:
            continue
        duration = interval.duration(at_day)
        weighted += duration * journal_scores.get(interval.journal, 0.0)
        total += duration
    return weighted / total if total else default


def board_score(board, user_scores, default=PROTOCOL_DEFAULTS['default_user_score']):
    if not board:
        return 0.0
    return float(np.mean([user_scores.get(person, default) for person in board]))


# Coupled solution

def _matrices(graph, intervals, boards, journals, persons, at_day):
    journal_index = {j: i for i, j in enumerate(journals)}
    person_index = {p: i for i, p in enumerate(persons)}

    # C[j, c]: citations into journal j's papers from papers published by c
    rows, cols = [], []
    for citing, cited in graph.graph.edges():
        target, source = graph.journal_of(cited), graph.journal_of(citing)
        if target in journal_index and source in journal_index:
            rows.append(journal_index[target])
            cols.append(journal_index[source])
    citations = sparse.csr_matrix(
        (np.ones(len(rows)), (rows, cols)), shape=(len(journals), len(journals))
    )

    counts = graph.paper_counts()
    papers = np.array([counts.get(j, 0) for j in journals], dtype=float)

    # W[u, j]: days person u served on journal j
    rows, cols, data = [], [], []
    for interval in intervals:
        duration = interval.duration(at_day)
        if duration > 0 and interval.journal in journal_index and interval.person in person_index:
            rows.append(person_index[interval.person])
            cols.append(journal_index[interval.journal])
            data.append(float(duration))
    service = sparse.csr_matrix((data, (rows, cols)), shape=(len(persons), len(journals)))

    # M[j, u] = 1 / |board_j| for every member u
    rows, cols, data = [], [], []
    for j in journals:
        board = boards[j]
        for person in board:
            rows.append(journal_index[j])
            cols.append(person_index[person])
            data.append(1.0 / len(board))
    membership = sparse.csr_matrix((data, (rows, cols)), shape=(len(journals), len(persons)))
    return citations, papers, service, membership


def solve_fixed_point(graph, intervals, boards, at_day, damping=PROTOCOL_DEFAULTS['damping'],
                      tol=PROTOCOL_DEFAULTS['tolerance'], max_iter=PROTOCOL_DEFAULTS['max_iterations'],
                      default=PROTOCOL_DEFAULTS['default_user_score']):
    """
    Solve the three coupled scores.

    Args:
        graph: CitationGraph of published papers
        intervals: ServiceInterval list
        boards: Mapping journal id -> board (iterable of PersonId)
        at_day: Evaluation day for service durations
        damping: Damping factor alpha
        tol: Max-abs residual for convergence
        max_iter: Iteration limit
        default: User score of persons without service

    Returns:
        ReputationState; ``converged`` is False when the iteration did not settle
    """
    journals = sorted(boards)
    if not journals:
        return ReputationState({}, {}, {}, {}, {}, iterations=1, residual=0.0, converged=True)
    persons = sorted(
        {p for board in boards.values() for p in board}
        | {iv.person for iv in intervals if iv.journal in boards}
    )
    citations, papers, service, membership = _matrices(graph, intervals, boards, journals, persons, at_day)
    served = np.asarray(service.sum(axis=1)).ravel()

    def journal_scores(board_scores):
        return np.divide(citations @ board_scores, papers, out=np.zeros(len(journals)), where=papers > 0)

    def step(users):
        scores = journal_scores(membership @ users)
        return np.divide(service @ scores, served, out=np.full(len(persons), float(default)), where=served > 0)

    users, results = damped_iteration(step, np.ones(len(persons)), damping, tol, max_iter)
    boards_vec = membership @ users
    journals_vec = journal_scores(boards_vec)

    citation_counts = np.asarray(citations.sum(axis=1)).ravel()
    state = ReputationState(
        journal_score={j: float(journals_vec[i]) for i, j in enumerate(journals)},
        user_score={p: float(users[i]) for i, p in enumerate(persons)},
        board_score={j: float(boards_vec[i]) for i, j in enumerate(journals)},
        papers={j: int(papers[i]) for i, j in enumerate(journals)},
        citations={j: int(citation_counts[i]) for i, j in enumerate(journals)},
        iterations=results["iterations"],
        residual=results["residual"],
        converged=results["converged"],
    )
    logger.info(
        "Reputation solved for %d journals and %d persons in %d iterations (converged=%s)",
        len(journals), len(persons), state.iterations, state.converged,
    )
    return state


def compute_reputation(state, config, at_day=None):
    """Reputation of every journal snapshot and board member known to the ledger as of ``at_day``."""
    at_day = state.day if at_day is None else at_day
    boards = {j.id: j.board for j in state.journals.values() if j.created_at <= at_day}
    graph = CitationGraph.from_state(state, at_day, config.citation_window_days)
    intervals = [iv for iv in state.intervals if iv.from_day <= at_day]
    return solve_fixed_point(
        graph,
        intervals,
        boards,
        at_day,
        damping=config.damping,
        tol=config.tolerance,
        max_iter=config.max_iterations,
        default=config.default_user_score,
    )
