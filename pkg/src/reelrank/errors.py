"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: ConfigError -> 2, DataError -> 3,
BackendError -> 4. Anything else is a bug and exits 1.
"""


class ReelRankError(Exception):
    """Base class for all package errors."""


class ConfigError(ReelRankError):
    """Invalid configuration: bad threshold, missing seed, unknown option."""


class DataError(ReelRankError):
    """Unusable input data: unreadable file, unknown title, empty corpus."""


class BackendError(ReelRankError):
    """A pluggable backend (video decoder, model file) is missing or broken."""


class PipelineStageError(ReelRankError):
    """Wraps a failure with the stage name and movie id where it happened."""

    def __init__(self, stage: str, movie_id: str, cause: Exception):
        self.stage = stage
        self.movie_id = movie_id
        self.cause = cause
        super().__init__(f"stage '{stage}' failed for movie '{movie_id}': {cause}")
