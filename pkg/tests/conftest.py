import csv
import shutil
from pathlib import Path

import pytest

from reelrank import synth


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One pass/fail line per acceptance criterion at the end of the run."""
    lines = []
    for status in ("passed", "failed", "skipped"):
        for report in terminalreporter.stats.get(status, []):
            nodeid = getattr(report, "nodeid", "")
            if "test_acceptance" in nodeid and "::" in nodeid:
                name = nodeid.split("::")[-1]
                lines.append((name, status.upper()))
    if lines:
        terminalreporter.write_sep("-", "acceptance criteria")
        for name, status in sorted(lines):
            terminalreporter.write_line(f"{status:7s} {name}")

REPO_ROOT = Path(__file__).resolve().parent.parent
DEMO_DIR = REPO_ROOT / "data" / "demo"
FIXTURES_DIR = REPO_ROOT / "data" / "fixtures"


@pytest.fixture(scope="session")
def demo_env(tmp_path_factory):
    """Full demo environment: corpus CSVs, per-movie reviews, synthetic
    trailers, and a pipeline config dict pointing at all of them."""
    root = tmp_path_factory.mktemp("demo")
    shutil.copytree(DEMO_DIR, root / "demo")
    demo = root / "demo"
    with open(demo / "movies.csv", newline="", encoding="utf-8") as fh:
        movie_ids = [row["id"] for row in csv.DictReader(fh)]
    trailers = demo / "trailers"
    for i, movie_id in enumerate(movie_ids):
        clip = synth.trailer_clip(seed=1000 + i, n_scenes=8 + (i % 3), frames_per_scene=6)
        synth.write_frames(clip, trailers / movie_id)
    return {
        "root": root,
        "movies": demo / "movies.csv",
        "train_reviews": demo / "train_reviews.csv",
        "reviews_dir": demo / "reviews",
        "trailers_dir": trailers,
        "movie_ids": movie_ids,
    }


@pytest.fixture
def demo_config(demo_env, tmp_path):
    from reelrank.pipeline import PipelineConfig

    return PipelineConfig(
        movies_path=str(demo_env["movies"]),
        reviews_path=str(demo_env["train_reviews"]),
        movie_reviews_dir=str(demo_env["reviews_dir"]),
        trailers_dir=str(demo_env["trailers_dir"]),
        extractor="mock",
        stride=1,
        sample_size=12,
        runs=5,
        seed=42,
        out_dir=str(tmp_path / "out"),
    )
