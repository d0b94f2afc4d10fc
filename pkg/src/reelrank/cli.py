"""Command line interface.

Each pipeline stage is an independently invocable subcommand; ``run`` chains
them with cached intermediates. Exit codes: 0 success, 2 config error,
3 data error, 4 backend error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import report as report_mod
from . import sentiment as sentiment_mod
from . import visual
from .corpus import MovieRecord, load_movies, load_reviews
from .errors import BackendError, ConfigError, DataError, PipelineStageError
from .keyframes import KeyframeOptions, extract_keyframes, save_keyframes
from .pipeline import PipelineConfig, run_pipeline
from .ranking import BaselineInputs, CandidateScores, rank_and_compare
from .recommend import fit_metadata_model, recommend

logger = logging.getLogger(__name__)


def _add_keyframe_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--stride", type=int, default=2)
    parser.add_argument("--hist-threshold", type=float, default=0.85)
    parser.add_argument("--dedup-threshold", type=float, default=0.9)
    parser.add_argument("--blur", type=float, default=2.0, help="Laplacian variance cutoff")
    parser.add_argument("--flat-dark", type=int, default=33)
    parser.add_argument("--flat-bright", type=int, default=215)
    parser.add_argument("--flat-fraction", type=float, default=0.80)
    parser.add_argument("--bar-intensity", type=int, default=10)
    parser.add_argument("--trim-transitions", action="store_true")
    parser.add_argument("--content-threshold", type=float, default=27.0)


def _keyframe_options(args: argparse.Namespace) -> KeyframeOptions:
    return KeyframeOptions(
        stride=args.stride,
        hist_threshold=args.hist_threshold,
        dedup_threshold=args.dedup_threshold,
        blur_threshold=args.blur,
        flat_dark=args.flat_dark,
        flat_bright=args.flat_bright,
        flat_fraction=args.flat_fraction,
        bar_intensity=args.bar_intensity,
        trim_transitions=args.trim_transitions,
        content_threshold=args.content_threshold,
    )


def _cmd_recommend(args: argparse.Namespace) -> int:
    corpus, _ = load_movies(args.movies, args.format, args.list_delim)
    model = fit_metadata_model(corpus)
    results = recommend(corpus, model, args.title, args.k)
    payload = [
        {"movie_id": r.movie_id, "title": r.title, "metadata_similarity": r.metadata_similarity}
        for r in results
    ]
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def _cmd_keyframes(args: argparse.Namespace) -> int:
    keyframes = extract_keyframes(args.in_path, _keyframe_options(args))
    save_keyframes(keyframes, args.out)
    sys.stdout.write(json.dumps(keyframes.stats, sort_keys=True) + "\n")
    return 0


def _cmd_features(args: argparse.Namespace) -> int:
    from .keyframes import sample_frames

    frames = sample_frames(args.in_path, stride=1)
    extractor = visual.make_extractor(args.extractor)
    vectors = visual.extract_features(extractor, frames)
    visual.save_features(args.out, vectors)
    sys.stdout.write(f"wrote {len(vectors)} feature vectors to {args.out}\n")
    return 0


def _cmd_visualsim(args: argparse.Namespace) -> int:
    extractor = visual.make_extractor(args.extractor)
    opts = _keyframe_options(args)
    ref_frames = extract_keyframes(args.reference, opts, source_id="reference")
    query_frames = extract_keyframes(args.query, opts, source_id="query")
    ref_features = visual.extract_features(extractor, ref_frames)
    query_features = visual.extract_features(extractor, query_frames)
    model = visual.kmeans_fit(ref_features, k=args.k, seed=args.seed)
    ref_dist = visual.distribution_vector(model, ref_features)
    query_dist = visual.distribution_vector(model, query_features)
    vss = visual.visual_similarity(ref_dist, query_dist)
    payload = {
        "vss": vss,
        "k": args.k,
        "seed": args.seed,
        "wcss": model.wcss,
        "reference_distribution": ref_dist.fractions.tolist(),
        "query_distribution": query_dist.fractions.tolist(),
        "reference_stats": ref_frames.stats,
        "query_stats": query_frames.stats,
    }
    sys.stdout.write(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "vss.json", "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
        report_mod.render_distribution_figure(
            ref_dist, {"query": query_dist}, out / "distributions.png"
        )
    return 0


def _cmd_sentiment_train(args: argparse.Namespace) -> int:
    reviews = load_reviews(args.data)
    options = sentiment_mod.TrainOptions(seed=args.seed)
    model = sentiment_mod.train(args.kind, reviews, options)
    model.save(args.out)
    sys.stdout.write(f"trained {args.kind} on {len(reviews)} reviews -> {args.out}\n")
    return 0


def _cmd_sentiment_score(args: argparse.Namespace) -> int:
    model = sentiment_mod.SentimentModel.load(args.model)
    reviews = load_reviews(args.reviews)
    score = sentiment_mod.positivity_score(
        model, reviews, sample_size=args.sample_size, runs=args.runs, seed=args.seed
    )
    payload = {
        "movie_id": score.movie_id,
        "per_run": score.per_run,
        "score": score.score,
        "seed": score.seed,
    }
    sys.stdout.write(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return 0


def _cmd_rank(args: argparse.Namespace) -> int:
    with open(args.scores, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    ref_info = data.get("reference", {})
    reference = MovieRecord(
        id=str(ref_info.get("id") or args.reference),
        title=str(ref_info.get("title") or args.reference),
    )
    candidates = []
    for row in data["candidates"]:
        baseline = None
        if "baseline" in row:
            b = row["baseline"]
            baseline = BaselineInputs(
                rating=float(b["rating"]),
                vote_count=float(b["vote_count"]),
                corpus_mean=float(b["corpus_mean"]),
                min_votes=float(b["min_votes"]),
                popularity=float(b["popularity"]),
            )
        candidates.append(
            CandidateScores(
                movie_id=str(row.get("movie_id") or row["title"]),
                title=str(row["title"]),
                vss=None if row.get("vss") is None else float(row["vss"]),
                sentiment=float(row["sentiment"]),
                baseline_inputs=baseline,
                sentiment_only=bool(row.get("sentiment_only", row.get("vss") is None)),
            )
        )
    score_report = rank_and_compare(reference, candidates, weight=args.weight)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    report_mod.write_json(score_report, out)
    report_mod.write_csv(score_report, out.with_suffix(".csv"))
    report_mod.write_table(score_report, out.with_suffix(".txt"))
    if not args.no_figures:
        report_mod.render_score_figure(score_report, out.with_suffix(".png"))
    sys.stdout.write(report_mod.format_table(score_report))
    return 0


def _cmd_run(args: argparse.Namespace) -> int:
    config = PipelineConfig.from_file(args.config) if args.config else PipelineConfig()
    overrides = {
        "movies_path": args.movies,
        "extractor": args.extractor,
        "seed": args.seed,
        "k_recommendations": args.k,
        "out_dir": args.out,
        "jobs": args.jobs,
        "weight": args.weight,
        "figures": False if args.no_figures else None,
    }
    config = config.with_overrides(overrides)
    score_report = run_pipeline(config, args.reference)
    sys.stdout.write(report_mod.format_table(score_report))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="reelrank",
        description="Rank content-based movie recommendations by trailer visuals and review sentiment",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("recommend", help="top-k metadata-similar movies")
    p.add_argument("--movies", required=True)
    p.add_argument("--format", choices=("csv", "json"), default=None)
    p.add_argument("--list-delim", default="|")
    p.add_argument("--title", required=True)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_recommend)

    p = sub.add_parser("keyframes", help="extract filtered keyframes from a trailer")
    p.add_argument("--in", dest="in_path", required=True)
    p.add_argument("--out", required=True)
    _add_keyframe_flags(p)
    p.set_defaults(func=_cmd_keyframes)

    p = sub.add_parser("features", help="feature vectors for every frame in a directory")
    p.add_argument("--in", dest="in_path", required=True)
    p.add_argument("--extractor", default="mock", help="mock or onnx:<path>")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_features)

    p = sub.add_parser("visualsim", help="visual similarity between two trailers")
    p.add_argument("--reference", required=True)
    p.add_argument("--query", required=True)
    p.add_argument("--extractor", default="mock")
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--out", default=None)
    _add_keyframe_flags(p)
    p.set_defaults(func=_cmd_visualsim)

    p = sub.add_parser("sentiment-train", help="train a review-sentiment model")
    p.add_argument("--data", required=True)
    p.add_argument("--kind", choices=sentiment_mod.KINDS, default="linear_svm")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_sentiment_train)

    p = sub.add_parser("sentiment-score", help="positivity score for a review file")
    p.add_argument("--model", required=True)
    p.add_argument("--reviews", required=True)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--sample-size", type=int, default=50)
    p.add_argument("--runs", type=int, default=10)
    p.set_defaults(func=_cmd_sentiment_score)

    p = sub.add_parser("rank", help="combined + baseline ranking from a scores file")
    p.add_argument("--reference", required=True)
    p.add_argument("--scores", required=True)
    p.add_argument("--weight", type=float, default=0.5)
    p.add_argument("--out", required=True)
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=_cmd_rank)

    p = sub.add_parser("run", help="full pipeline for one reference movie")
    p.add_argument("--config", default=None)
    p.add_argument("--reference", required=True)
    p.add_argument("--movies", default=None)
    p.add_argument("--extractor", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--weight", type=float, default=None)
    p.add_argument("--jobs", type=int, default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=_cmd_run)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except ConfigError as exc:
        logger.error("config error: %s", exc)
        return 2
    except (DataError,) as exc:
        logger.error("data error: %s", exc)
        return 3
    except BackendError as exc:
        logger.error("backend error: %s", exc)
        return 4
    except PipelineStageError as exc:
        cause = exc.cause
        logger.error("%s", exc)
        if isinstance(cause, ConfigError):
            return 2
        if isinstance(cause, BackendError):
            return 4
        return 3
    except ValueError as exc:
        logger.error("invalid argument: %s", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
