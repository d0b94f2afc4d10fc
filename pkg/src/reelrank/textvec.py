"""Sparse text vectorization: term counts, TF-IDF weighting and cosine similarity.

Shared by the metadata recommender and the sentiment classifiers. The weighting
is deliberately plain: idf_i = ln(n_docs / df_i) with no smoothing, and the term
frequency is the raw in-document count. Both choices are pinned by golden tests;
any fixed log base only rescales idf uniformly and leaves cosine rankings intact.
"""

from __future__ import annotations

import hashlib
import json
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Sequence

from .errors import DataError

__all__ = [
    "SparseVector",
    "TfIdfModel",
    "fit_tfidf",
    "transform",
    "count_vector",
    "cosine_similarity",
]


@dataclass
class SparseVector:
    """Sparse real vector: term-index -> weight, plus the ambient dimension.

    Zero weights are never stored; ``entries`` only holds indices < ``dimension``.
    """

    entries: Dict[int, float] = field(default_factory=dict)
    dimension: int = 0

    def __post_init__(self) -> None:
        self.entries = {i: w for i, w in self.entries.items() if w != 0.0}
        for i in self.entries:
            if not 0 <= i < self.dimension:
                raise ValueError(f"index {i} out of range for dimension {self.dimension}")

    def dot(self, other: "SparseVector") -> float:
        a, b = self.entries, other.entries
        if len(b) < len(a):
            a, b = b, a
        return sum(w * b[i] for i, w in a.items() if i in b)

    def norm(self) -> float:
        return math.sqrt(sum(w * w for w in self.entries.values()))

    def scale(self, factor: float) -> "SparseVector":
        return SparseVector({i: w * factor for i, w in self.entries.items()}, self.dimension)

    def __len__(self) -> int:
        return len(self.entries)


@dataclass
class TfIdfModel:
    """Fitted vocabulary with document frequencies and idf weights.

    Invariant: ``idf[i] == ln(n_docs / doc_freq[i])`` and
    ``1 <= doc_freq[i] <= n_docs`` for every vocabulary term.
    """

    vocabulary: Dict[str, int]
    doc_freq: List[int]
    n_docs: int
    idf: List[float] = field(default_factory=list)

    def __post_init__(self) -> None:
        if not self.idf:
            self.idf = [math.log(self.n_docs / df) for df in self.doc_freq]

    @property
    def dimension(self) -> int:
        return len(self.vocabulary)

    def vocabulary_hash(self) -> str:
        """Stable digest of the fitted vocabulary, for model-file integrity checks."""
        payload = json.dumps(sorted(self.vocabulary.items()), separators=(",", ":"))
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()

    def to_dict(self) -> dict:
        return {
            "vocabulary": self.vocabulary,
            "doc_freq": self.doc_freq,
            "n_docs": self.n_docs,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TfIdfModel":
        return cls(
            vocabulary={str(t): int(i) for t, i in data["vocabulary"].items()},
            doc_freq=[int(x) for x in data["doc_freq"]],
            n_docs=int(data["n_docs"]),
        )

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, sort_keys=True)

    @classmethod
    def load(cls, path) -> "TfIdfModel":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def fit_tfidf(documents: Sequence[Iterable[str]]) -> TfIdfModel:
    """Fit vocabulary, document frequencies and idf over tokenized documents.

    Raises DataError when the corpus is empty or contains no tokens at all.
    Vocabulary indices follow sorted term order so fitting is order-independent.
    """
    docs = [list(doc) for doc in documents]
    if not docs or all(len(d) == 0 for d in docs):
        raise DataError("cannot fit TF-IDF on an empty corpus")

    df: Counter = Counter()
    for doc in docs:
        df.update(set(doc))

    vocabulary = {term: i for i, term in enumerate(sorted(df))}
    doc_freq = [0] * len(vocabulary)
    for term, count in df.items():
        doc_freq[vocabulary[term]] = count
    return TfIdfModel(vocabulary=vocabulary, doc_freq=doc_freq, n_docs=len(docs))


def count_vector(model: TfIdfModel, document: Iterable[str]) -> SparseVector:
    """Raw term counts over the model vocabulary; out-of-vocabulary tokens ignored."""
    counts = Counter(document)
    entries = {
        model.vocabulary[t]: float(c) for t, c in counts.items() if t in model.vocabulary
    }
    return SparseVector(entries, model.dimension)


def transform(model: TfIdfModel, document: Iterable[str]) -> SparseVector:
    """TF-IDF weights: raw count times idf per term. Zero weights are dropped."""
    counts = count_vector(model, document)
    entries = {i: c * model.idf[i] for i, c in counts.entries.items()}
    return SparseVector(entries, model.dimension)


def cosine_similarity(a: SparseVector, b: SparseVector) -> float:
    """Cosine of the angle between two sparse vectors.

    Returns 0.0 when either vector has zero norm, so empty documents compare
    as maximally dissimilar instead of raising.
    """
    if a.dimension != b.dimension:
        raise ValueError(f"dimension mismatch: {a.dimension} != {b.dimension}")
    denom = a.norm() * b.norm()
    if denom == 0.0:
        return 0.0
    return a.dot(b) / denom
