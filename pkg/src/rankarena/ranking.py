"""Scoring and total ordering of candidate documents for a query.

Ships an Okapi BM25 scorer, an embedding cosine scorer, and two deterministic
mock scorers used for offline runs and oracle tests. The ranker itself only
sees scores; tie handling is an explicit, configurable policy because any
real ranking function must output a total order.
"""

from __future__ import annotations

import math
import random
from collections import Counter
from dataclasses import dataclass
from typing import Callable, Sequence

from .corpus import CorpusStats, Query, tokenize
from .providers import Embedder

TIE_DETERMINISTIC = "deterministic"
TIE_SEEDED_RANDOM = "seeded-random"
TIE_POLICIES = (TIE_DETERMINISTIC, TIE_SEEDED_RANDOM)


@dataclass(frozen=True)
class ScoredDoc:
    doc_id: str
    agent_id: str
    score: float

    def __post_init__(self) -> None:
        if not math.isfinite(self.score):
            raise ValueError(f"non-finite score for doc {self.doc_id!r}")


@dataclass(frozen=True)
class Ranking:
    """Scored documents for one (query, round), best first. Ranks are 1-based."""

    query_id: str
    round: int
    entries: tuple[ScoredDoc, ...]

    def __post_init__(self) -> None:
        scores = [e.score for e in self.entries]
        if any(a < b for a, b in zip(scores, scores[1:])):
            raise ValueError("ranking entries must be sorted non-increasing by score")
        agent_ids = [e.agent_id for e in self.entries]
        if len(set(agent_ids)) != len(agent_ids):
            raise ValueError("ranking entries must have distinct agent ids")

    def rank_of(self, agent_id: str) -> int:
        for position, entry in enumerate(self.entries, start=1):
            if entry.agent_id == agent_id:
                return position
        raise KeyError(f"agent {agent_id!r} not in ranking")

    def score_of(self, agent_id: str) -> float:
        return self.entries[self.rank_of(agent_id) - 1].score

    @property
    def top(self) -> ScoredDoc:
        return self.entries[0]

    @property
    def bottom(self) -> ScoredDoc:
        return self.entries[-1]


def bm25_score(
    query: Query,
    doc_text: str,
    stats: CorpusStats,
    k1: float = 1.2,
    b: float = 0.75,
) -> float:
    """Okapi BM25 score of a document for a query.

    idf(t) = ln((N - df + 0.5) / (df + 0.5) + 1), the +1-smoothed form, so
    terms absent from the corpus (df = 0) still contribute non-negatively.
    Summation runs over the query token multiset.
    """
    if k1 < 0:
        raise ValueError("k1 must be >= 0")
    if not 0 <= b <= 1:
        raise ValueError("b must be in [0, 1]")
    query_terms = tokenize(query.text)
    if not query_terms:
        return 0.0
    doc_terms = tokenize(doc_text)
    tf = Counter(doc_terms)
    doc_len = len(doc_terms)
    n = stats.doc_count
    score = 0.0
    for term in query_terms:
        term_tf = tf.get(term, 0)
        if term_tf == 0:
            continue
        df = stats.doc_frequencies.get(term, 0)
        idf = math.log((n - df + 0.5) / (df + 0.5) + 1.0)
        denom = term_tf + k1 * (1.0 - b + b * doc_len / stats.avg_doc_len)
        score += idf * term_tf * (k1 + 1.0) / denom
    return score


def cosine(a: Sequence[float], b: Sequence[float]) -> float:
    if len(a) != len(b):
        raise ValueError(f"vector length mismatch: {len(a)} vs {len(b)}")
    norm_a = math.sqrt(sum(x * x for x in a))
    norm_b = math.sqrt(sum(x * x for x in b))
    if norm_a == 0.0 or norm_b == 0.0:
        raise ValueError("cosine undefined for zero-norm vector")
    dot = sum(x * y for x, y in zip(a, b))
    return dot / (norm_a * norm_b)


def embed_score(query: Query, doc_text: str, embedder: Embedder) -> float:
    """Cosine similarity between the query and document embeddings."""
    return cosine(embedder.embed(query.text), embedder.embed(doc_text))


Scorer = Callable[[Query, str], float]


class Bm25Scorer:
    def __init__(self, stats: CorpusStats, k1: float = 1.2, b: float = 0.75):
        self.stats = stats
        self.k1 = k1
        self.b = b

    def __call__(self, query: Query, doc_text: str) -> float:
        return bm25_score(query, doc_text, self.stats, self.k1, self.b)


class EmbeddingScorer:
    def __init__(self, embedder: Embedder):
        self.embedder = embedder

    def __call__(self, query: Query, doc_text: str) -> float:
        return embed_score(query, doc_text, self.embedder)


class TermFrequencyScorer:
    """Counts occurrences of (unique) query terms in the document.

    Deterministic mock; strictly increases when query terms are appended,
    which makes keyword stuffing provably win. Oracle use only.
    """

    def __call__(self, query: Query, doc_text: str) -> float:
        query_terms = set(tokenize(query.text))
        if not query_terms:
            return 0.0
        tf = Counter(tokenize(doc_text))
        return float(sum(tf[t] for t in query_terms))


class ConstantScorer:
    """Scores every document identically; ordering falls to the tie policy."""

    def __init__(self, value: float = 0.0):
        self.value = value

    def __call__(self, query: Query, doc_text: str) -> float:
        return self.value


def rank(
    query: Query,
    docs: Sequence[tuple[str, str, str]],
    scorer: Scorer,
    tie_policy: str = TIE_DETERMINISTIC,
    seed: int = 0,
    round: int = 0,
) -> Ranking:
    """Totally order candidate documents by score, one per agent.

    ``docs`` holds (agent_id, doc_id, text) triples. Ties are broken per
    policy: ``deterministic`` orders tied agents by ascending agent id;
    ``seeded-random`` shuffles each tied group with the given seed. Both
    policies are independent of input order, so permuting ``docs`` never
    changes the result.
    """
    if not docs:
        raise ValueError("rank requires at least one document")
    if tie_policy not in TIE_POLICIES:
        raise ValueError(f"unknown tie policy {tie_policy!r}")
    agent_ids = [agent_id for agent_id, _, _ in docs]
    if len(set(agent_ids)) != len(agent_ids):
        raise ValueError("duplicate agent_id in rank input")

    scored = [(agent_id, doc_id, float(scorer(query, text))) for agent_id, doc_id, text in docs]
    for agent_id, doc_id, score in scored:
        if not math.isfinite(score):
            raise ValueError(f"scorer returned non-finite score for agent {agent_id!r}")

    groups: dict[float, list[tuple[str, str, float]]] = {}
    for item in scored:
        groups.setdefault(item[2], []).append(item)

    rng = random.Random(seed)
    entries: list[ScoredDoc] = []
    for score in sorted(groups, reverse=True):
        group = sorted(groups[score], key=lambda item: item[0])
        if tie_policy == TIE_SEEDED_RANDOM and len(group) > 1:
            rng.shuffle(group)
        entries.extend(ScoredDoc(doc_id=d, agent_id=a, score=s) for a, d, s in group)
    return Ranking(query_id=query.id, round=round, entries=tuple(entries))
