"""Dataset ingestion and text normalization.

Loads movie metadata and review files (CSV with a header row, or a JSON array
of objects), builds the per-movie combination string that feeds the metadata
recommender, and tokenizes raw text. Missing text fields are stored as empty
strings, never as absent values, so downstream string handling has no optional
branches.

Expected movie columns: ``title``, ``overview``, ``genres``, ``keywords``,
``cast``, ``director`` (values may be empty), plus optional ``id``, ``tagline``,
``rating``, ``vote_count``, ``popularity``, ``trailer_path`` and free-form
passthrough columns (runtime, language, writers, production companies, release
date, budget, revenue). List-valued columns are split on a configurable
delimiter, ``|`` by default.
"""

from __future__ import annotations

import csv
import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from .errors import DataError
from .stemming import normalize_token
from .stopwords import STOP_WORDS

logger = logging.getLogger(__name__)

REQUIRED_MOVIE_FIELDS = ("title", "overview", "genres", "keywords", "cast", "director")

DEFAULT_LABEL_ALIASES = {
    "positive": 1, "pos": 1, "1": 1, "p": 1,
    "negative": 0, "neg": 0, "0": 0, "n": 0,
}


@dataclass
class MovieRecord:
    """One movie row. Text fields default to empty strings, lists to empty lists."""

    id: str
    title: str
    overview: str = ""
    genres: List[str] = field(default_factory=list)
    keywords: List[str] = field(default_factory=list)
    cast: List[str] = field(default_factory=list)
    director: str = ""
    tagline: str = ""
    rating: float = 0.0
    vote_count: int = 0
    popularity: float = 1.0
    trailer_path: Optional[str] = None
    extra: Dict[str, str] = field(default_factory=dict)


@dataclass
class ReviewRecord:
    movie_id: str
    text: str
    label: Optional[int] = None


class MovieCorpus:
    """Read-only collection of MovieRecord with a case-insensitive title index."""

    def __init__(self, records: Sequence[MovieRecord]):
        self.records: List[MovieRecord] = list(records)
        self.by_id: Dict[str, MovieRecord] = {}
        self.index: Dict[str, str] = {}
        title_seen: Dict[str, int] = {}
        for rec in self.records:
            if rec.id in self.by_id:
                raise DataError(f"duplicate movie id: {rec.id}")
            self.by_id[rec.id] = rec
            key = rec.title.strip().lower()
            n = title_seen.get(key, 0) + 1
            title_seen[key] = n
            # First record owns the plain title key; later duplicates stay
            # reachable via "title (n)" so the index covers every record.
            self.index[key if n == 1 else f"{key} ({n})"] = rec.id

    def __len__(self) -> int:
        return len(self.records)

    def lookup(self, title: str) -> MovieRecord:
        key = title.strip().lower()
        if key not in self.index:
            raise DataError(f"unknown title: {title!r}")
        return self.by_id[self.index[key]]

    def save_json(self, path) -> None:
        rows = []
        for r in self.records:
            rows.append({
                "id": r.id,
                "title": r.title,
                "overview": r.overview,
                "genres": r.genres,
                "keywords": r.keywords,
                "cast": r.cast,
                "director": r.director,
                "tagline": r.tagline,
                "rating": r.rating,
                "vote_count": r.vote_count,
                "popularity": r.popularity,
                "trailer_path": r.trailer_path,
                "extra": r.extra,
            })
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(rows, fh, sort_keys=True)


def _slugify(title: str) -> str:
    slug = re.sub(r"[^a-z0-9]+", "-", title.strip().lower()).strip("-")
    return slug or "untitled"


def _split_list(value: str, delimiter: str) -> List[str]:
    if not value:
        return []
    return [part.strip() for part in value.split(delimiter) if part.strip()]


def _parse_float(value: str, default: float) -> float:
    value = (value or "").strip()
    return float(value) if value else default


def _parse_int(value: str, default: int) -> int:
    value = (value or "").strip()
    return int(float(value)) if value else default


_CORE_COLUMNS = {
    "id", "title", "overview", "genres", "keywords", "cast", "director",
    "tagline", "rating", "vote_count", "popularity", "trailer_path",
}


def _record_from_row(row: Dict[str, object], row_num: int, delimiter: str) -> MovieRecord:
    def text(name: str) -> str:
        value = row.get(name)
        return str(value).strip() if value is not None else ""

    title = text("title")
    if not title:
        raise DataError(f"row {row_num}: missing title")

    def as_list(name: str) -> List[str]:
        value = row.get(name)
        if isinstance(value, list):
            return [str(v).strip() for v in value if str(v).strip()]
        return _split_list(text(name), delimiter)

    try:
        rating = _parse_float(text("rating"), 0.0)
        vote_count = _parse_int(text("vote_count"), 0)
        popularity = _parse_float(text("popularity"), 1.0)
    except ValueError as exc:
        raise DataError(f"row {row_num}: bad numeric field ({exc})") from None
    if popularity <= 0:
        raise DataError(f"row {row_num}: popularity must be positive")

    extra_value = row.get("extra")
    extra = {str(k): str(v) for k, v in extra_value.items()} if isinstance(extra_value, dict) else {}
    extra.update(
        (k, str(v)) for k, v in row.items()
        if k not in _CORE_COLUMNS and k != "extra" and v is not None and str(v).strip()
    )
    return MovieRecord(
        id=text("id") or _slugify(title),
        title=title,
        overview=text("overview"),
        genres=as_list("genres"),
        keywords=as_list("keywords"),
        cast=as_list("cast"),
        director=text("director"),
        tagline=text("tagline"),
        rating=rating,
        vote_count=vote_count,
        popularity=popularity,
        trailer_path=text("trailer_path") or None,
        extra=extra,
    )


def _read_rows(path: Path, fmt: str) -> List[Dict[str, object]]:
    if fmt == "csv":
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None:
                raise DataError(f"{path}: empty CSV file")
            return [dict(row) for row in reader]
    if fmt == "json":
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
        if not isinstance(data, list):
            raise DataError(f"{path}: JSON dataset must be an array of objects")
        return [dict(row) for row in data]
    raise DataError(f"unknown dataset format: {fmt!r}")


def _detect_format(path: Path, fmt: Optional[str]) -> str:
    if fmt:
        return fmt
    return "json" if path.suffix.lower() == ".json" else "csv"


def load_movies(
    path,
    fmt: Optional[str] = None,
    list_delimiter: str = "|",
) -> Tuple[MovieCorpus, int]:
    """Load a movie dataset file into a corpus.

    Returns ``(corpus, warnings)`` where ``warnings`` counts malformed rows
    that were skipped (each is logged with its row number). Duplicate titles
    are kept; a colliding derived id gets a numeric suffix.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"dataset file not found: {path}")
    rows = _read_rows(path, _detect_format(path, fmt))

    missing = [c for c in REQUIRED_MOVIE_FIELDS if rows and c not in rows[0]]
    if missing:
        raise DataError(f"{path}: missing required columns: {', '.join(missing)}")

    records: List[MovieRecord] = []
    seen_ids: Dict[str, int] = {}
    warnings = 0
    for row_num, row in enumerate(rows, start=2 if path.suffix.lower() != ".json" else 1):
        try:
            rec = _record_from_row(row, row_num, list_delimiter)
        except DataError as exc:
            warnings += 1
            logger.warning("skipping malformed row: %s", exc)
            continue
        n = seen_ids.get(rec.id, 0) + 1
        seen_ids[rec.id] = n
        if n > 1:
            rec.id = f"{rec.id}-{n}"
        records.append(rec)
    if not records:
        raise DataError(f"{path}: no usable rows")
    return MovieCorpus(records), warnings


def load_reviews(
    path,
    fmt: Optional[str] = None,
    label_aliases: Optional[Dict[str, int]] = None,
    default_movie_id: str = "",
) -> List[ReviewRecord]:
    """Load review rows with a ``text`` column and an optional ``label`` column.

    Labels normalize to {positive=1, negative=0}; an unrecognized label token
    raises. Rows whose text is empty after stripping are dropped.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"review file not found: {path}")
    aliases = {k.lower(): v for k, v in (label_aliases or DEFAULT_LABEL_ALIASES).items()}
    rows = _read_rows(path, _detect_format(path, fmt))
    if not rows:
        raise DataError(f"{path}: empty review file")

    reviews: List[ReviewRecord] = []
    for row in rows:
        getter = {str(k).strip().lower(): v for k, v in row.items()}
        text = str(getter.get("text") or getter.get("review") or "").strip()
        if not text:
            continue
        label: Optional[int] = None
        raw_label = getter.get("label", getter.get("sentiment"))
        if raw_label is not None and str(raw_label).strip() != "":
            token = str(raw_label).strip().lower()
            if token not in aliases:
                raise DataError(f"{path}: unknown label token {token!r}")
            label = aliases[token]
        movie_id = str(getter.get("movie_id") or default_movie_id)
        reviews.append(ReviewRecord(movie_id=movie_id, text=text, label=label))
    if not reviews:
        raise DataError(f"{path}: no non-empty reviews")
    return reviews


def _collapse(name: str) -> str:
    # "Christopher Nolan" -> "christophernolan": one atomic token per entity.
    return re.sub(r"\s+", "", name.strip().lower())


def build_combination(record: MovieRecord) -> str:
    """Join keywords, cast, genres, director and overview into one string.

    Multi-word keywords, cast members and the director collapse into single
    tokens so the vectorizer treats entities atomically; genres and the
    overview pass through as plain lowercased text.
    """
    parts: List[str] = []
    parts.extend(_collapse(k) for k in record.keywords if k.strip())
    parts.extend(_collapse(c) for c in record.cast if c.strip())
    parts.extend(g.strip().lower() for g in record.genres if g.strip())
    if record.director.strip():
        parts.append(_collapse(record.director))
    if record.overview.strip():
        parts.append(record.overview.strip().lower())
    return " ".join(parts)


_HTML_TAG = re.compile(r"<[^>]*>")
_NON_ALNUM = re.compile(r"[^a-z0-9]+")


def preprocess_text(text: str, mode: str = "metadata") -> List[str]:
    """Tokenize raw text for vectorization.

    mode="review": lowercase, strip HTML tags and punctuation, drop
    single-character tokens, collapse whitespace.
    mode="metadata": lowercase, strip punctuation, remove stop words, apply
    suffix-stripping normalization (stop words are re-checked afterwards so
    the function is idempotent).
    """
    if mode not in ("metadata", "review"):
        raise ValueError(f"unknown preprocessing mode: {mode!r}")
    lowered = text.lower()
    if mode == "review":
        lowered = _HTML_TAG.sub(" ", lowered)
        tokens = _NON_ALNUM.sub(" ", lowered).split()
        return [t for t in tokens if len(t) > 1]

    tokens = _NON_ALNUM.sub(" ", lowered).split()
    tokens = [t for t in tokens if t not in STOP_WORDS]
    normalized = [normalize_token(t) for t in tokens]
    return [t for t in normalized if t and t not in STOP_WORDS]
