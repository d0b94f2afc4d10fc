#!/usr/bin/env python3
"""Regenerate the bundled demo corpus (data/demo). Deterministic; run once."""

import csv
import sys
from pathlib import Path

import numpy as np

ROOT = Path(__file__).resolve().parent.parent
DEMO = ROOT / "data" / "demo"

MOVIES = [
    # id, title, overview, genres, keywords, cast, director, rating, votes, popularity
    ("starfall", "Starfall", "A stranded survey crew rides a dying star's flare home",
     "scifi|adventure", "space|rescue|star", "Mira Voss|Ty Okafor", "Lena Hartmann",
     7.9, 2400, 1.3),
    ("voidrunner", "Void Runner", "A smuggler races rival crews through collapsing space lanes",
     "scifi|thriller", "space|race|smuggler", "Ty Okafor|Jun Park", "Omar Reyes",
     7.1, 1800, 2.1),
    ("solarwake", "Solar Wake", "Engineers chase a signal inside the sun's magnetic wake",
     "scifi|mystery", "space|signal|sun", "Mira Voss|Ada Lindqvist", "Lena Hartmann",
     7.5, 1500, 2.8),
    ("quietorbit", "Quiet Orbit", "A lone technician keeps a derelict station alive for one last visitor",
     "scifi|drama", "space|station|isolation", "Jun Park|Noa Berg", "Priya Nandakumar",
     8.2, 900, 4.0),
    ("tidebound", "Tidebound", "Two rival divers map a drowned city before the tide seals it",
     "adventure|drama", "ocean|diving|ruins", "Noa Berg|Selim Acar", "Rosa Medina",
     6.8, 1100, 5.5),
    ("driftwood", "Driftwood", "A ferry mechanic rebuilds a storm-wrecked harbor town",
     "drama", "ocean|storm|harbor", "Selim Acar|Ada Lindqvist", "Rosa Medina",
     6.4, 700, 7.2),
    ("glasscity", "Glass City", "An auditor unravels a skyline of mirrored fraud",
     "thriller|noir", "city|fraud|mirror", "Ivo Krall|Dana Whitfield", "Omar Reyes",
     7.0, 1300, 3.4),
    ("emberline", "Ember Line", "Wildfire wardens hold a ridge while the valley evacuates",
     "drama|thriller", "fire|ridge|rescue", "Dana Whitfield|Mira Voss", "Priya Nandakumar",
     7.7, 600, 6.1),
]

POSITIVE_PHRASES = [
    "an absolute delight from the first frame",
    "the cast is superb and the pacing never drags",
    "gorgeous photography and a moving final act",
    "smart, tense, and surprisingly warm",
    "a brilliant score carries every scene",
    "easily the most rewarding watch this year",
    "charming characters and a clever script",
    "it earns every minute of its runtime",
]
NEGATIVE_PHRASES = [
    "a dull slog with cardboard characters",
    "the plot collapses long before the ending",
    "flat dialogue and a tedious middle hour",
    "awful pacing ruins a promising premise",
    "the leads have no chemistry at all",
    "clumsy editing and a hollow finale",
    "boring, loud, and instantly forgettable",
    "a dreadful waste of a good cast",
]

# Target positivity per demo movie, loosely tracking its rating.
POSITIVITY = {
    "starfall": 0.8, "voidrunner": 0.6, "solarwake": 0.7, "quietorbit": 0.85,
    "tidebound": 0.55, "driftwood": 0.4, "glasscity": 0.6, "emberline": 0.75,
}


def main() -> int:
    DEMO.mkdir(parents=True, exist_ok=True)
    (DEMO / "reviews").mkdir(exist_ok=True)
    rng = np.random.default_rng(20260808)

    with open(DEMO / "movies.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([
            "id", "title", "overview", "genres", "keywords", "cast", "director",
            "rating", "vote_count", "popularity",
        ])
        writer.writerows(MOVIES)

    with open(DEMO / "train_reviews.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["text", "label"])
        for _ in range(30):
            writer.writerow([rng.choice(POSITIVE_PHRASES), "positive"])
            writer.writerow([rng.choice(NEGATIVE_PHRASES), "negative"])

    for movie_id, *_ in MOVIES:
        with open(DEMO / "reviews" / f"{movie_id}.csv", "w", newline="",
                  encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["text"])
            for _ in range(16):
                positive = rng.random() < POSITIVITY[movie_id]
                pool = POSITIVE_PHRASES if positive else NEGATIVE_PHRASES
                writer.writerow([rng.choice(pool)])
    print(f"wrote demo corpus under {DEMO}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
