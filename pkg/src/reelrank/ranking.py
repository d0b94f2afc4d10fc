"""Composite scoring and ranking.

The composite score is a weighted mean of the visual similarity score and the
sentiment positivity score (0.5/0.5 by default). The comparison baseline is
the Bayesian weighted rating (r*v + c*m)/(v + m) combined with inverse
normalized popularity: lower popularity values mean a more popular movie, so
the baseline rewards small ones.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

from .corpus import MovieRecord

EPSILON = 1e-9  # floor for normalized popularity before inversion


@dataclass
class BaselineInputs:
    rating: float          # r: average rating of the movie
    vote_count: float      # v: number of ratings
    corpus_mean: float     # c: mean rating across the corpus
    min_votes: float       # m: minimum votes required to be listed
    popularity: float

    def __post_init__(self) -> None:
        if self.vote_count < 0 or self.min_votes < 0:
            raise ValueError("vote counts must be non-negative")
        if self.vote_count + self.min_votes <= 0:
            raise ValueError("v + m must be positive")
        if self.popularity <= 0:
            raise ValueError("popularity must be positive")


@dataclass
class CandidateScores:
    movie_id: str
    title: str
    vss: Optional[float]
    sentiment: float
    baseline_inputs: Optional[BaselineInputs] = None
    sentiment_only: bool = False


@dataclass
class ScoreRow:
    movie_id: str
    title: str
    vss: Optional[float]
    sentiment: float
    composite: float
    baseline: Optional[float]
    proposed_rank: int = 0
    baseline_rank: int = 0
    sentiment_only: bool = False


@dataclass
class ScoreReport:
    reference_id: str
    reference_title: str
    rows: List[ScoreRow]
    weight: float = 0.5
    seeds: Dict[str, int] = field(default_factory=dict)


def movie_similarity_score(vss: float, sentiment: float, weight: float = 0.5) -> float:
    """weight * vss + (1 - weight) * sentiment, all arguments in [0, 1]."""
    for name, value in (("vss", vss), ("sentiment", sentiment), ("weight", weight)):
        if not 0.0 <= value <= 1.0:
            raise ValueError(f"{name} must lie in [0, 1], got {value}")
    return weight * vss + (1.0 - weight) * sentiment


def imdb_weighted_rating(inputs: BaselineInputs) -> float:
    """Bayesian weighted rating (r*v + c*m) / (v + m)."""
    return (
        inputs.rating * inputs.vote_count + inputs.corpus_mean * inputs.min_votes
    ) / (inputs.vote_count + inputs.min_votes)


def _minmax(values: Sequence[float]) -> List[float]:
    lo, hi = min(values), max(values)
    if hi == lo:
        # Degenerate spread: every candidate normalizes to 1.
        return [1.0] * len(values)
    return [(v - lo) / (hi - lo) for v in values]


def baseline_final_scores(inputs: Sequence[BaselineInputs]) -> List[float]:
    """Baseline score per candidate: 0.5 * W + 0.5 * (1 / P).

    W is the min-max normalized weighted rating over the candidate set; P is
    the min-max normalized popularity floored at a small epsilon before
    inversion (lower raw popularity means a more popular movie).
    """
    if not inputs:
        raise ValueError("baseline scoring needs at least one candidate")
    if len(inputs) == 1:
        return [1.0]
    weighted = _minmax([imdb_weighted_rating(b) for b in inputs])
    popularity = [max(p, EPSILON) for p in _minmax([b.popularity for b in inputs])]
    return [0.5 * w + 0.5 * (1.0 / p) for w, p in zip(weighted, popularity)]


def baseline_final_score(
    weighted: float, popularity: float, candidates: Sequence[BaselineInputs]
) -> float:
    """Score of the candidate whose weighted rating / popularity are given,
    normalized against the full candidate set."""
    if len(candidates) <= 1:
        return 1.0
    ratings = [imdb_weighted_rating(b) for b in candidates]
    lo_r, hi_r = min(ratings), max(ratings)
    w = 1.0 if hi_r == lo_r else (weighted - lo_r) / (hi_r - lo_r)
    pops = [b.popularity for b in candidates]
    lo_p, hi_p = min(pops), max(pops)
    p = 1.0 if hi_p == lo_p else max((popularity - lo_p) / (hi_p - lo_p), EPSILON)
    return 0.5 * w + 0.5 * (1.0 / p)


def _assign_ranks(rows: List[ScoreRow], key, attr: str) -> None:
    order = sorted(rows, key=lambda r: (-key(r), r.title.lower(), r.movie_id))
    for position, row in enumerate(order, start=1):
        setattr(row, attr, position)


def rank_and_compare(
    reference: MovieRecord,
    candidates: Sequence[CandidateScores],
    weight: float = 0.5,
) -> ScoreReport:
    """Score every candidate both ways and assign both rank columns.

    Candidates flagged sentiment-only (no trailer available) score on
    sentiment alone and stay visibly flagged in the report. Ties break by
    ascending title.
    """
    if not candidates:
        raise ValueError("rank_and_compare needs at least one candidate")
    rows: List[ScoreRow] = []
    baseline_pool = [c.baseline_inputs for c in candidates if c.baseline_inputs is not None]
    baseline_by_id: Dict[str, float] = {}
    if baseline_pool and len(baseline_pool) == len(candidates):
        scores = baseline_final_scores(baseline_pool)
        baseline_by_id = {c.movie_id: s for c, s in zip(candidates, scores)}

    for cand in candidates:
        if cand.sentiment_only or cand.vss is None:
            # No trailer: the composite falls back to sentiment alone.
            composite = movie_similarity_score(0.0, cand.sentiment, weight=0.0)
            vss = None
            flagged = True
        else:
            composite = movie_similarity_score(cand.vss, cand.sentiment, weight=weight)
            vss = cand.vss
            flagged = False
        rows.append(
            ScoreRow(
                movie_id=cand.movie_id,
                title=cand.title,
                vss=vss,
                sentiment=cand.sentiment,
                composite=composite,
                baseline=baseline_by_id.get(cand.movie_id),
                sentiment_only=flagged,
            )
        )

    _assign_ranks(rows, lambda r: r.composite, "proposed_rank")
    if baseline_by_id:
        _assign_ranks(rows, lambda r: r.baseline, "baseline_rank")
    rows.sort(key=lambda r: r.proposed_rank)
    return ScoreReport(
        reference_id=reference.id,
        reference_title=reference.title,
        rows=rows,
        weight=weight,
    )
