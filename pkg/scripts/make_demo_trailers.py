#!/usr/bin/env python3
"""Generate deterministic synthetic trailer frame directories for the demo
corpus (data/demo/trailers/<movie_id>/). Real trailers cannot ship with the
repo; these clips exercise the exact same pipeline."""

import csv
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "src"))

from reelrank import synth  # noqa: E402


def main() -> int:
    demo = ROOT / "data" / "demo"
    out_root = demo / "trailers"
    with open(demo / "movies.csv", newline="", encoding="utf-8") as fh:
        movie_ids = [row["id"] for row in csv.DictReader(fh)]
    for i, movie_id in enumerate(movie_ids):
        clip = synth.trailer_clip(
            seed=1000 + i,
            n_scenes=8 + (i % 3),
            frames_per_scene=6,
        )
        synth.write_frames(clip, out_root / movie_id)
        print(f"{movie_id}: {len(clip)} frames")
    return 0


if __name__ == "__main__":
    sys.exit(main())
