"""Exception types shared across the package.

Plain ``ValueError`` is used for local domain errors (zero vectors,
dimension mismatches, bad metric arguments); the classes here cover the
cases callers need to tell apart, e.g. for HTTP status mapping.
"""


class CorpusError(Exception):
    """A corpus file or record set was rejected at ingest."""


class FormatError(CorpusError):
    """Malformed embedding file. Carries the byte offset of the failure."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class NotFoundError(Exception):
    """Unknown image id or session id."""


class ProviderUnavailableError(Exception):
    """The embedding provider could not be reached. Retryable."""


class FeedbackError(ValueError):
    """Feedback referenced ids outside the session's candidate pool."""

    def __init__(self, rejected_ids: list[str]):
        super().__init__(f"ids not in candidate pool: {', '.join(rejected_ids)}")
        self.rejected_ids = rejected_ids
