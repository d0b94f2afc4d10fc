"""Metadata recommender: top-k cosine-nearest movies for a reference title."""

from __future__ import annotations

from dataclasses import dataclass
from typing import List

from . import textvec
from .corpus import MovieCorpus, MovieRecord, build_combination, preprocess_text
from .errors import DataError
from .textvec import TfIdfModel

__all__ = ["Recommendation", "fit_metadata_model", "recommend"]


@dataclass
class Recommendation:
    movie_id: str
    title: str
    metadata_similarity: float


def combination_tokens(record: MovieRecord) -> List[str]:
    return preprocess_text(build_combination(record), mode="metadata")


def fit_metadata_model(corpus: MovieCorpus) -> TfIdfModel:
    """Fit TF-IDF over the combination strings, one document per movie."""
    return textvec.fit_tfidf([combination_tokens(r) for r in corpus.records])


def recommend(
    corpus: MovieCorpus,
    model: TfIdfModel,
    title: str,
    k: int = 5,
) -> List[Recommendation]:
    """Top-k movies by cosine similarity to the reference combination vector.

    The reference never appears in its own results. Ties break by descending
    vote count, then ascending title, then id, so the ordering is a function
    of content alone and survives corpus row permutation.
    """
    if k <= 0:
        raise ValueError("k must be positive")
    if k >= len(corpus):
        raise DataError(f"k={k} must be smaller than the corpus size {len(corpus)}")
    reference = corpus.lookup(title)
    ref_vec = textvec.transform(model, combination_tokens(reference))

    scored = []
    for rec in corpus.records:
        if rec.id == reference.id:
            continue
        sim = textvec.cosine_similarity(
            ref_vec, textvec.transform(model, combination_tokens(rec))
        )
        scored.append((rec, sim))
    scored.sort(key=lambda item: (-item[1], -item[0].vote_count, item[0].title.lower(), item[0].id))
    return [
        Recommendation(movie_id=rec.id, title=rec.title, metadata_similarity=sim)
        for rec, sim in scored[:k]
    ]
