"""Topic loading, text normalization, and corpus statistics for sparse ranking."""

from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping


class TopicFileError(ValueError):
    """Malformed or inconsistent topic / corpus file."""


@dataclass(frozen=True)
class Query:
    """A competition topic: agents compete for rank on this query."""

    id: str
    text: str

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("query id must be non-empty")
        if not self.text.strip():
            raise ValueError(f"query {self.id!r} has empty text")


@dataclass(frozen=True)
class SeedDocument:
    """The shared initial document every agent starts a game from."""

    query_id: str
    text: str
    word_count: int

    @classmethod
    def from_text(cls, query_id: str, text: str) -> "SeedDocument":
        return cls(query_id=query_id, text=text, word_count=len(text.split()))

    def __post_init__(self) -> None:
        if self.word_count != len(self.text.split()):
            raise ValueError(
                f"seed for {self.query_id!r}: word_count {self.word_count} does not "
                f"match text ({len(self.text.split())} words)"
            )


@dataclass(frozen=True)
class CorpusStats:
    """Document frequencies and length statistics backing BM25 scoring."""

    doc_count: int
    doc_frequencies: Mapping[str, int]
    avg_doc_len: float

    def __post_init__(self) -> None:
        if self.doc_count <= 0:
            raise ValueError("doc_count must be positive")
        if self.avg_doc_len <= 0:
            raise ValueError("avg_doc_len must be positive")
        bad = [t for t, df in self.doc_frequencies.items() if df <= 0 or df > self.doc_count]
        if bad:
            raise ValueError(f"document frequencies out of range for terms: {bad[:5]}")


_WORD_RE = re.compile(r"[^\W_]+", re.UNICODE)
_VOWELS = frozenset("aeiou")
# Consonants that commonly double before -ing/-ed (run/running); ll, ss, ff,
# zz are usually part of the stem (fall, miss) and are left alone.
_UNDOUBLE = frozenset("bdgkmnprt")


def _has_vowel(s: str) -> bool:
    return any(c in _VOWELS for c in s)


def _undouble(stem: str) -> str:
    if len(stem) >= 2 and stem[-1] == stem[-2] and stem[-1] in _UNDOUBLE:
        return stem[:-1]
    return stem


def stem(word: str) -> str:
    """Reduce an inflected English word to its stem.

    Dictionary-free variant of Krovetz-style inflectional stemming: plural,
    past-tense, and -ing suffixes only. Without a lexicon we cannot verify
    that a removal yields a real word, so the past-tense step keeps only
    self-verifying removals (consonant undoubling, -ied); plain "-ed" forms
    such as "unsupervised" are left intact. Derivational suffixes (-er,
    -ness, ...) are never touched. Idempotent: stem(stem(w)) == stem(w).
    """
    w = word
    if len(w) <= 3 or any(c.isdigit() for c in w):
        return w

    # plural
    if w.endswith("ies") and len(w) > 4:
        w = w[:-3] + "y"
    elif w.endswith("es") and w[:-2].endswith(("ss", "x", "z", "ch", "sh")):
        w = w[:-2]
    elif w.endswith("s") and not w.endswith(("ss", "us", "is")):
        w = w[:-1]

    # past tense (self-verifying removals only)
    if w.endswith("ied") and len(w) > 4:
        w = w[:-3] + "y"
    elif w.endswith("ed") and len(w) > 4:
        base = w[:-2]
        if len(base) >= 2 and base[-1] == base[-2] and base[-1] in _UNDOUBLE:
            w = base[:-1]

    # -ing
    if w.endswith("ing") and len(w) > 4:
        base = w[:-3]
        if _has_vowel(base):
            undoubled = _undouble(base)
            if undoubled != base:
                w = undoubled
            elif (
                3 <= len(base) <= 4
                and base[-1] not in _VOWELS
                and base[-2] in _VOWELS
                and base[-3] not in _VOWELS
            ):
                # short consonant-vowel-consonant stem lost a final e (mak -> make)
                w = base + "e"
            elif len(base) == 2 and base[0] in _VOWELS and base[1] not in _VOWELS:
                w = base + "e"
            else:
                w = base

    return w


def tokenize(text: str) -> list[str]:
    """Lowercase, split on whitespace/punctuation (hyphens split), and stem.

    Deterministic; empty input yields an empty list.
    """
    return [stem(tok) for tok in _WORD_RE.findall(text.lower())]


def load_topics(path: str | Path) -> list[tuple[Query, SeedDocument]]:
    """Load a JSON Lines topic file with fields query_id, query, seed_doc.

    Rejects duplicate query ids; parse failures report the offending line.
    """
    path = Path(path)
    topics: list[tuple[Query, SeedDocument]] = []
    seen: set[str] = set()
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise TopicFileError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from exc
            if not isinstance(record, dict):
                raise TopicFileError(f"{path}:{lineno}: expected a JSON object")
            missing = [k for k in ("query_id", "query", "seed_doc") if k not in record]
            if missing:
                raise TopicFileError(f"{path}:{lineno}: missing fields {missing}")
            qid = str(record["query_id"])
            if qid in seen:
                raise TopicFileError(f"{path}:{lineno}: duplicate query_id {qid!r}")
            seen.add(qid)
            try:
                query = Query(id=qid, text=str(record["query"]))
                seed = SeedDocument.from_text(qid, str(record["seed_doc"]))
            except ValueError as exc:
                raise TopicFileError(f"{path}:{lineno}: {exc}") from exc
            topics.append((query, seed))
    return topics


def load_corpus_texts(path: str | Path) -> list[str]:
    """Load a JSON Lines corpus file with a `text` field per line."""
    path = Path(path)
    texts: list[str] = []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise TopicFileError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from exc
            if not isinstance(record, dict) or "text" not in record:
                raise TopicFileError(f"{path}:{lineno}: expected object with a `text` field")
            texts.append(str(record["text"]))
    return texts


def compute_stats(docs: Iterable[str]) -> CorpusStats:
    """Compute document frequencies and mean length over raw document texts.

    Frequencies count documents containing a term, not occurrences.
    """
    docs = list(docs)
    if not docs:
        raise ValueError("corpus is empty")
    df: Counter[str] = Counter()
    total_len = 0
    for text in docs:
        terms = tokenize(text)
        total_len += len(terms)
        df.update(set(terms))
    avg = total_len / len(docs)
    if avg <= 0:
        raise ValueError("corpus has no tokens")
    return CorpusStats(doc_count=len(docs), doc_frequencies=dict(df), avg_doc_len=avg)
