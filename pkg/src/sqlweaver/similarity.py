"""Text similarity scoring for schema recall and exemplar retrieval.

The default scorer is a deterministic lexical one: cosine similarity over
character-trigram TF-IDF vectors of lowercased text. It keeps the whole
pipeline hermetic; heavyweight embedding models can be plugged in through
the same ``score`` interface.
"""

from __future__ import annotations

import math
from collections import Counter
from typing import Iterable, Protocol


class SimilarityScorer(Protocol):
    """Symmetric similarity in [0, 1] with score(x, x) == 1 for non-empty x."""

    def score(self, a: str, b: str) -> float: ...


def _normalize(text: str) -> str:
    return " ".join(text.lower().split())


def char_trigrams(text: str) -> list[str]:
    """Character trigrams of the normalized text.

    Strings shorter than three characters contribute themselves as a single
    gram so short identifiers still compare non-trivially.
    """
    norm = _normalize(text)
    if not norm:
        return []
    if len(norm) < 3:
        return [norm]
    return [norm[i : i + 3] for i in range(len(norm) - 2)]


def trigram_jaccard(a: str, b: str) -> float:
    """Jaccard overlap of trigram sets; used for identifier name matching."""
    ta, tb = set(char_trigrams(a)), set(char_trigrams(b))
    if not ta or not tb:
        return 0.0
    return len(ta & tb) / len(ta | tb)


class TrigramTfidfScorer:
    """Cosine over character-trigram TF-IDF vectors.

    Without a fitted corpus every gram has weight 1 (plain TF cosine). When
    constructed with a corpus, grams are weighted by smoothed inverse
    document frequency, sharpening retrieval over a knowledge base.
    """

    def __init__(self, corpus: Iterable[str] = ()) -> None:
        self._idf: dict[str, float] = {}
        docs = [set(char_trigrams(d)) for d in corpus]
        n = len(docs)
        if n:
            df: Counter[str] = Counter()
            for grams in docs:
                df.update(grams)
            for gram, count in df.items():
                self._idf[gram] = math.log((1 + n) / (1 + count)) + 1.0

    def _weight(self, gram: str) -> float:
        return self._idf.get(gram, 1.0)

    def _vector(self, text: str) -> dict[str, float]:
        counts = Counter(char_trigrams(text))
        return {g: c * self._weight(g) for g, c in counts.items()}

    def score(self, a: str, b: str) -> float:
        va, vb = self._vector(a), self._vector(b)
        if not va or not vb:
            return 0.0
        dot = sum(w * vb[g] for g, w in va.items() if g in vb)
        norm = math.sqrt(sum(w * w for w in va.values())) * math.sqrt(
            sum(w * w for w in vb.values())
        )
        if norm == 0.0:
            return 0.0
        return min(1.0, dot / norm)


DEFAULT_SCORER = TrigramTfidfScorer()
