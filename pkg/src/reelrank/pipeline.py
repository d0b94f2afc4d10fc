"""End-to-end orchestration with cached intermediates.

Stage order per reference movie: metadata recommendation -> keyframes ->
feature extraction -> reference clustering -> visual similarity per candidate
-> sentiment positivity per candidate -> combined ranking. Expensive
intermediates (keyframes, feature vectors) are cached under
``<out>/cache`` keyed by content digests, so a warm rerun recomputes nothing
and produces byte-identical reports.

Every random choice derives from the single config seed; the derived seeds
are embedded in the report for audit.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from . import report as report_mod
from . import sentiment as sentiment_mod
from . import visual
from .corpus import MovieCorpus, MovieRecord, load_movies, load_reviews
from .errors import ConfigError, DataError, PipelineStageError
from .keyframes import KeyframeOptions, extract_keyframes, save_keyframes, sample_frames
from .ranking import BaselineInputs, CandidateScores, ScoreReport, rank_and_compare
from .recommend import fit_metadata_model, recommend

logger = logging.getLogger(__name__)


@dataclass
class PipelineConfig:
    movies_path: str = ""
    reviews_path: str = ""            # labeled training reviews (CSV/JSON)
    sentiment_model_path: str = ""    # pretrained model JSON; wins over reviews_path
    sentiment_kind: str = "linear_svm"
    movie_reviews_dir: str = ""       # per-movie review files: <movie_id>.csv
    trailers_dir: str = ""            # per-movie frame dirs / videos: <movie_id>
    extractor: str = "mock"
    list_delimiter: str = "|"
    k_recommendations: int = 5
    stride: int = 2
    hist_threshold: float = 0.85
    dedup_threshold: float = 0.9
    blur_threshold: float = 2.0
    flat_dark: int = 33
    flat_bright: int = 215
    flat_fraction: float = 0.80
    bar_intensity: int = 10
    trim_transitions: bool = False
    content_threshold: float = 27.0
    clusters: int = 5
    seed: int = 42
    sample_size: int = 50
    runs: int = 10
    weight: float = 0.5
    min_votes: Optional[float] = None  # default: 90th percentile of corpus vote counts
    out_dir: str = "out"
    jobs: int = 1
    figures: bool = True

    def validate(self) -> None:
        if not self.movies_path:
            raise ConfigError("movies_path is required")
        for name in ("hist_threshold", "dedup_threshold", "flat_fraction", "weight"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1], got {value}")
        if self.stride < 1:
            raise ConfigError("stride must be >= 1")
        if self.blur_threshold < 0:
            raise ConfigError("blur_threshold must be non-negative")
        if not 0 <= self.flat_dark <= 255 or not 0 <= self.flat_bright <= 255:
            raise ConfigError("flat-frame intensities must lie in [0, 255]")
        if self.clusters < 1:
            raise ConfigError("clusters must be >= 1")
        if self.k_recommendations < 1:
            raise ConfigError("k_recommendations must be >= 1")
        if self.sample_size < 1 or self.runs < 1:
            raise ConfigError("sample_size and runs must be >= 1")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")
        if self.seed is None:
            raise ConfigError("a seed is required; no stage may run unseeded")

    def keyframe_options(self) -> KeyframeOptions:
        return KeyframeOptions(
            stride=self.stride,
            hist_threshold=self.hist_threshold,
            dedup_threshold=self.dedup_threshold,
            blur_threshold=self.blur_threshold,
            flat_dark=self.flat_dark,
            flat_bright=self.flat_bright,
            flat_fraction=self.flat_fraction,
            bar_intensity=self.bar_intensity,
            trim_transitions=self.trim_transitions,
            content_threshold=self.content_threshold,
        )

    @classmethod
    def from_file(cls, path) -> "PipelineConfig":
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        if path.suffix.lower() == ".json":
            with open(path, "r", encoding="utf-8") as fh:
                data = json.load(fh)
        else:
            try:
                import tomllib  # py311+
            except ImportError:
                import tomli as tomllib
            with open(path, "rb") as fh:
                data = tomllib.load(fh)
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        return cls(**data)

    def with_overrides(self, overrides: Dict[str, object]) -> "PipelineConfig":
        """Flag overrides win over file values; None means 'not given'."""
        updates = {k: v for k, v in overrides.items() if v is not None}
        return dataclasses.replace(self, **updates)


def derive_seed(master: int, label: str) -> int:
    """Stable per-stage/per-movie child seed from the master seed."""
    digest = hashlib.sha256(f"{master}:{label}".encode("utf-8")).digest()
    return int.from_bytes(digest[:4], "little")


class _Cache:
    def __init__(self, root: Path):
        self.root = root
        self.root.mkdir(parents=True, exist_ok=True)
        self.hits: Dict[str, int] = {}
        self.misses: Dict[str, int] = {}
        self._lock = threading.Lock()

    def note(self, stage: str, hit: bool) -> None:
        with self._lock:
            bucket = self.hits if hit else self.misses
            bucket[stage] = bucket.get(stage, 0) + 1


def _source_digest(source: Path, opts: KeyframeOptions) -> str:
    digest = hashlib.sha256()
    digest.update(repr(opts).encode())
    if source.is_dir():
        for item in sorted(source.iterdir()):
            if item.is_file():
                digest.update(item.name.encode())
                digest.update(item.read_bytes())
    else:
        digest.update(source.read_bytes())
    return digest.hexdigest()[:16]


def _keyframes_cached(cache: _Cache, source: Path, opts: KeyframeOptions, movie_id: str):
    key = _source_digest(source, opts)
    kf_dir = cache.root / f"keyframes_{movie_id}_{key}"
    if (kf_dir / "stats.json").is_file():
        cache.note("keyframes", hit=True)
        with open(kf_dir / "stats.json", "r", encoding="utf-8") as fh:
            sidecar = json.load(fh)
        frames = sample_frames(kf_dir, stride=1)
        # Restore original source indices from the file names.
        from .keyframes import KeyFrameSet

        restored = []
        pngs = sorted(p for p in kf_dir.iterdir() if p.suffix == ".png")
        for path, frame in zip(pngs, frames):
            frame.index = int(path.stem.split("_")[1])
            restored.append(frame)
        return KeyFrameSet(frames=restored, source_id=movie_id, stats=sidecar["stats"])
    cache.note("keyframes", hit=False)
    keyframes = extract_keyframes(source, opts, source_id=movie_id)
    if keyframes.frames:
        save_keyframes(keyframes, kf_dir)
    return keyframes


def _features_cached(cache: _Cache, extractor, keyframes, movie_id: str):
    key = visual.frames_digest(keyframes.frames)[:16]
    path = cache.root / f"features_{movie_id}_{extractor.name}_{key}.bin"
    if path.is_file():
        cache.note("features", hit=True)
        vectors = visual.load_features(path)
        for vec, frame in zip(vectors, keyframes.frames):
            vec.frame_index = frame.index
        return vectors
    cache.note("features", hit=False)
    vectors = visual.extract_features(extractor, keyframes)
    visual.save_features(path, vectors)
    return vectors


def _trailer_source(config: PipelineConfig, record: MovieRecord) -> Optional[Path]:
    if record.trailer_path:
        path = Path(record.trailer_path)
        if not path.is_absolute():
            path = Path(config.movies_path).parent / path
        return path if path.exists() else None
    if config.trailers_dir:
        base = Path(config.trailers_dir) / record.id
        if base.exists():
            return base
    return None


def _movie_reviews(config: PipelineConfig, movie_id: str):
    base = Path(config.movie_reviews_dir)
    for suffix in (".csv", ".json"):
        path = base / f"{movie_id}{suffix}"
        if path.is_file():
            return load_reviews(path, default_movie_id=movie_id)
    raise DataError(f"no review file for movie '{movie_id}' under {base}")


def _sentiment_model(config: PipelineConfig) -> sentiment_mod.SentimentModel:
    if config.sentiment_model_path:
        return sentiment_mod.SentimentModel.load(config.sentiment_model_path)
    if not config.reviews_path:
        raise ConfigError("either sentiment_model_path or reviews_path is required")
    labeled = load_reviews(config.reviews_path)
    options = sentiment_mod.TrainOptions(seed=derive_seed(config.seed, "sentiment-train"))
    return sentiment_mod.train(config.sentiment_kind, labeled, options)


def run_pipeline(config: PipelineConfig, reference_title: str) -> ScoreReport:
    """Execute the whole flow and write report + manifest under config.out_dir."""
    config.validate()
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cache = _Cache(out / "cache")
    timers: Dict[str, float] = {}

    def timed(stage: str, movie_id: str, fn, *args):
        start = time.perf_counter()
        try:
            result = fn(*args)
        except ConfigError:
            raise
        except PipelineStageError:
            raise
        except Exception as exc:
            raise PipelineStageError(stage, movie_id, exc) from exc
        timers[f"{stage}/{movie_id}"] = timers.get(f"{stage}/{movie_id}", 0.0) + (
            time.perf_counter() - start
        )
        return result

    corpus, warnings = timed("load-movies", "-", load_movies, config.movies_path, None,
                             config.list_delimiter)
    reference = corpus.lookup(reference_title)
    metadata_model = timed("fit-metadata", "-", fit_metadata_model, corpus)
    recommendations = timed(
        "recommend", reference.id, recommend, corpus, metadata_model,
        reference_title, config.k_recommendations,
    )

    extractor = visual.make_extractor(config.extractor)
    opts = config.keyframe_options()
    kmeans_seed = derive_seed(config.seed, "kmeans")

    # Reference trailer: without it every candidate downgrades to sentiment-only.
    ref_source = _trailer_source(config, reference)
    ref_model = None
    ref_distribution = None
    if ref_source is None:
        logger.warning(
            "no trailer for reference '%s'; all candidates downgrade to sentiment-only",
            reference.id,
        )
    else:
        ref_keyframes = timed("keyframes", reference.id, _keyframes_cached,
                              cache, ref_source, opts, reference.id)
        ref_features = timed("features", reference.id, _features_cached,
                             cache, extractor, ref_keyframes, reference.id)
        ref_model = timed("cluster", reference.id, visual.kmeans_fit,
                          ref_features, config.clusters, kmeans_seed)
        ref_distribution = visual.distribution_vector(ref_model, ref_features)

    sentiment_model = timed("sentiment-model", "-", _sentiment_model, config)

    corpus_mean = float(np.mean([r.rating for r in corpus.records]))
    min_votes = (
        config.min_votes
        if config.min_votes is not None
        else float(np.percentile([r.vote_count for r in corpus.records], 90))
    )

    seeds: Dict[str, int] = {
        "master": config.seed,
        "kmeans": kmeans_seed,
        "sentiment_train": derive_seed(config.seed, "sentiment-train"),
    }

    def score_candidate(rec_movie_id: str, rec_title: str) -> CandidateScores:
        record = corpus.by_id[rec_movie_id]
        vss: Optional[float] = None
        if ref_model is not None:
            source = _trailer_source(config, record)
            if source is None:
                logger.warning("no trailer for candidate '%s'; sentiment-only", record.id)
            else:
                keyframes = timed("keyframes", record.id, _keyframes_cached,
                                  cache, source, opts, record.id)
                features = timed("features", record.id, _features_cached,
                                 cache, extractor, keyframes, record.id)
                dist = visual.distribution_vector(ref_model, features)
                vss = visual.visual_similarity(ref_distribution, dist)
        movie_seed = derive_seed(config.seed, f"sentiment:{record.id}")
        seeds[f"sentiment:{record.id}"] = movie_seed
        reviews = timed("reviews", record.id, _movie_reviews, config, record.id)
        positivity = timed(
            "positivity", record.id, sentiment_mod.positivity_score,
            sentiment_model, reviews, config.sample_size, config.runs,
            movie_seed, record.id,
        )
        return CandidateScores(
            movie_id=record.id,
            title=record.title,
            vss=vss,
            sentiment=positivity.score,
            baseline_inputs=BaselineInputs(
                rating=record.rating,
                vote_count=record.vote_count,
                corpus_mean=corpus_mean,
                min_votes=min_votes,
                popularity=record.popularity,
            ),
            sentiment_only=vss is None,
        )

    if config.jobs > 1:
        with ThreadPoolExecutor(max_workers=config.jobs) as pool:
            candidates = list(
                pool.map(lambda r: score_candidate(r.movie_id, r.title), recommendations)
            )
    else:
        candidates = [score_candidate(r.movie_id, r.title) for r in recommendations]

    score_report = rank_and_compare(reference, candidates, weight=config.weight)
    score_report.seeds = dict(sorted(seeds.items()))

    written = report_mod.write_report_files(score_report, out, figures=config.figures)
    manifest = {
        "reference": reference.id,
        "config": dataclasses.asdict(config),
        "corpus_rows": len(corpus),
        "corpus_warnings": warnings,
        "outputs": [p.name for p in written],
        "cache": {"hits": cache.hits, "misses": cache.misses},
        "timers_seconds": {k: round(v, 6) for k, v in sorted(timers.items())},
    }
    with open(out / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    return score_report
