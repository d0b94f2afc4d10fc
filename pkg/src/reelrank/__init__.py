"""reelrank: content-based movie recommendations re-ranked by a composite of
trailer visual similarity and review-sentiment positivity."""

__version__ = "0.1.0"
