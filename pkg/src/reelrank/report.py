"""Report serialization: JSON, delimited CSV, an aligned text table, and
matplotlib figures rendered next to the data files.

Report files must be byte-identical across reruns with the same inputs, so
nothing time- or environment-dependent is ever written here.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import List, Optional

from .ranking import ScoreReport

_COLUMNS = (
    "proposed_rank", "title", "movie_id", "vss", "sentiment",
    "composite", "baseline", "baseline_rank", "sentiment_only",
)


def _fmt(value: Optional[float]) -> str:
    return "" if value is None else f"{value:.6f}"


def report_to_dict(report: ScoreReport) -> dict:
    return {
        "reference_id": report.reference_id,
        "reference_title": report.reference_title,
        "weight": report.weight,
        "seeds": report.seeds,
        "rows": [
            {
                "movie_id": r.movie_id,
                "title": r.title,
                "vss": r.vss,
                "sentiment": r.sentiment,
                "composite": r.composite,
                "baseline": r.baseline,
                "proposed_rank": r.proposed_rank,
                "baseline_rank": r.baseline_rank,
                "sentiment_only": r.sentiment_only,
            }
            for r in report.rows
        ],
    }


def write_json(report: ScoreReport, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(report_to_dict(report), fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_csv(report: ScoreReport, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(_COLUMNS)
        for r in report.rows:
            writer.writerow([
                r.proposed_rank, r.title, r.movie_id, _fmt(r.vss), _fmt(r.sentiment),
                _fmt(r.composite), _fmt(r.baseline), r.baseline_rank or "",
                "yes" if r.sentiment_only else "",
            ])


def format_table(report: ScoreReport) -> str:
    header = ["#", "title", "vss", "sentiment", "composite", "baseline", "base#"]
    body: List[List[str]] = []
    for r in report.rows:
        title = r.title + (" [sentiment only]" if r.sentiment_only else "")
        body.append([
            str(r.proposed_rank), title, _fmt(r.vss) or "-", _fmt(r.sentiment),
            _fmt(r.composite), _fmt(r.baseline) or "-",
            str(r.baseline_rank) if r.baseline_rank else "-",
        ])
    widths = [max(len(row[i]) for row in [header] + body) for i in range(len(header))]
    lines = [f"reference: {report.reference_title} ({report.reference_id})"]
    lines.append("  ".join(h.ljust(w) for h, w in zip(header, widths)))
    lines.append("  ".join("-" * w for w in widths))
    for row in body:
        lines.append("  ".join(cell.ljust(w) for cell, w in zip(row, widths)))
    return "\n".join(lines) + "\n"


def write_table(report: ScoreReport, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(format_table(report))


def render_score_figure(report: ScoreReport, path) -> None:
    """Grouped bar chart of composite vs baseline score per candidate."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    import numpy as np

    rows = report.rows
    x = np.arange(len(rows))
    width = 0.38
    fig, ax = plt.subplots(figsize=(max(6.0, 1.6 * len(rows)), 4.0))
    ax.bar(x - width / 2, [r.composite for r in rows], width, label="composite")
    have_baseline = [r.baseline for r in rows if r.baseline is not None]
    if have_baseline:
        peak = max(have_baseline)
        scaled = [(r.baseline / peak if peak else 0.0) if r.baseline is not None else 0.0
                  for r in rows]
        ax.bar(x + width / 2, scaled, width, label="baseline (scaled)")
    ax.set_xticks(x)
    ax.set_xticklabels([r.title for r in rows], rotation=20, ha="right", fontsize=8)
    ax.set_ylabel("score")
    ax.set_title(f"ranking for {report.reference_title}")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=100, metadata={"Software": "reelrank"})
    plt.close(fig)


def render_distribution_figure(reference, queries: dict, path) -> None:
    """Bar chart of per-cluster keyframe fractions: reference vs queries."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    import numpy as np

    k = reference.k
    names = ["reference"] + list(queries)
    dists = [reference.fractions] + [q.fractions for q in queries.values()]
    x = np.arange(k)
    width = 0.8 / len(dists)
    fig, ax = plt.subplots(figsize=(max(6.0, 1.2 * k), 4.0))
    for i, (name, dist) in enumerate(zip(names, dists)):
        ax.bar(x + (i - (len(dists) - 1) / 2) * width, dist, width, label=name)
    ax.set_xticks(x)
    ax.set_xticklabels([f"cluster {i}" for i in range(k)])
    ax.set_ylabel("keyframe fraction")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=100, metadata={"Software": "reelrank"})
    plt.close(fig)


def write_report_files(report: ScoreReport, out_dir, figures: bool = True) -> List[Path]:
    """Write report.json / report.csv / report.txt (+ scores.png) under out_dir."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for name, writer in (
        ("report.json", write_json),
        ("report.csv", write_csv),
        ("report.txt", write_table),
    ):
        writer(report, out / name)
        written.append(out / name)
    if figures:
        render_score_figure(report, out / "scores.png")
        written.append(out / "scores.png")
    return written
