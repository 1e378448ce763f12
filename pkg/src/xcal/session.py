"""Interactive retrieval sessions: query, feedback, retrain, re-rank.

A session pins its candidate pool at creation (the initial top-K) and
every finetune re-ranks exactly that pool. Judgments accumulate across
rounds with later-wins semantics per id, and each finetune retrains the
SVM from scratch on the full cumulative set.
"""

from __future__ import annotations

import time
import threading
import uuid
from dataclasses import dataclass, field

import numpy as np

from .errors import FeedbackError, NotFoundError
from .store import Corpus, ImageRecord, RankedList, initial_retrieval, normalize
from .svm import KernelSVC, rank_by_confidence

QUERY_PREFIX = "a photo of a "

DEFAULT_RETRIEVAL_LIMIT = 2500


@dataclass(frozen=True)
class Query:
    """Either a text query or an image query (by corpus id or raw bytes)."""

    modality: str  # "text" | "image"
    text: str | None = None
    image_id: str | None = None
    image_bytes: bytes | None = None
    prefix_enabled: bool = False

    def __post_init__(self):
        if self.modality == "text":
            if not self.text or self.image_id is not None or self.image_bytes is not None:
                raise ValueError("text query requires non-empty text and no image reference")
        elif self.modality == "image":
            has_id = self.image_id is not None
            has_bytes = self.image_bytes is not None
            if self.text is not None or has_id == has_bytes:
                raise ValueError("image query requires exactly one of image_id or image_bytes")
        else:
            raise ValueError(f"modality must be 'text' or 'image', got {self.modality!r}")


@dataclass(frozen=True)
class Judgment:
    image_id: str
    relevant: bool


@dataclass
class Session:
    session_id: str
    query: Query
    query_vector: np.ndarray
    pool: RankedList
    current_ranking: RankedList
    judgments: dict[str, bool] = field(default_factory=dict)
    round: int = 0
    last_access: float = field(default_factory=time.monotonic)

    # Built once; reused by every re-rank over the fixed pool.
    pool_records: list[ImageRecord] = field(default_factory=list)
    pool_id_set: set[str] = field(default_factory=set)


@dataclass(frozen=True)
class ResultEntry:
    rank: int
    image_id: str
    score: float
    badge: str  # "relevant" | "non-relevant" | "none"


@dataclass(frozen=True)
class ResultPage:
    entries: list[ResultEntry]
    total: int


@dataclass(frozen=True)
class FinetuneOutcome:
    session: Session
    retrained: bool
    notice: str | None = None


def encode_query(query: Query, provider, corpus: Corpus) -> np.ndarray:
    """Resolve a query to a unit vector.

    Image-by-id queries return the stored corpus vector without touching
    the provider; text queries get the "a photo of a " prefix when
    enabled.
    """
    if query.modality == "image":
        if query.image_id is not None:
            return corpus.vector(query.image_id)
        return normalize(provider.embed_image(query.image_bytes))
    text = QUERY_PREFIX + query.text if query.prefix_enabled else query.text
    return normalize(provider.embed_text(text))


class SessionEngine:
    """Owns a corpus, a provider and the live sessions over them.

    Sessions are independent; a per-session lock serializes mutations
    when the engine is shared across threads (the HTTP service does
    this). Idle sessions are evicted lazily after ``session_ttl``
    seconds.
    """

    def __init__(
        self,
        corpus: Corpus,
        provider,
        svm_params: dict | None = None,
        retrieval_limit: int = DEFAULT_RETRIEVAL_LIMIT,
        session_ttl: float = 3600.0,
    ):
        self.corpus = corpus
        self.provider = provider
        self.svm_params = dict(svm_params or {})
        self.retrieval_limit = retrieval_limit
        self.session_ttl = session_ttl
        self.sessions: dict[str, Session] = {}
        self._locks: dict[str, threading.Lock] = {}
        self._registry_lock = threading.Lock()

    def start_session(self, query: Query, retrieval_limit: int | None = None) -> Session:
        if len(self.corpus) == 0:
            raise ValueError("cannot start a session over an empty corpus")
        limit = retrieval_limit if retrieval_limit is not None else self.retrieval_limit
        query_vector = encode_query(query, self.provider, self.corpus)
        pool = initial_retrieval(query_vector, self.corpus, limit)
        session = Session(
            session_id=uuid.uuid4().hex,
            query=query,
            query_vector=query_vector,
            pool=pool,
            current_ranking=pool,
            pool_records=[self.corpus.record(entry_id) for entry_id in pool.ids],
            pool_id_set=set(pool.ids),
        )
        with self._registry_lock:
            self.sessions[session.session_id] = session
            self._locks[session.session_id] = threading.Lock()
        return session

    def get_session(self, session_id: str) -> Session:
        self.evict_idle()
        try:
            session = self.sessions[session_id]
        except KeyError:
            raise NotFoundError(f"unknown session {session_id!r}") from None
        session.last_access = time.monotonic()
        return session

    def lock_for(self, session_id: str) -> threading.Lock:
        with self._registry_lock:
            if session_id not in self._locks:
                self._locks[session_id] = threading.Lock()
            return self._locks[session_id]

    def evict_idle(self) -> None:
        now = time.monotonic()
        with self._registry_lock:
            stale = [
                sid for sid, s in self.sessions.items()
                if now - s.last_access > self.session_ttl
            ]
            for sid in stale:
                del self.sessions[sid]
                self._locks.pop(sid, None)

    def submit_feedback(self, session: Session, judgments: list[Judgment]) -> Session:
        """Merge judgments (later wins per id). Rejects atomically on unknown ids."""
        unknown = [j.image_id for j in judgments if j.image_id not in session.pool_id_set]
        if unknown:
            raise FeedbackError(unknown)
        for judgment in judgments:
            session.judgments[judgment.image_id] = judgment.relevant
        return session

    def finetune(self, session: Session) -> FinetuneOutcome:
        """Retrain on the cumulative judgments and re-rank the whole pool.

        Needs at least one relevant and one non-relevant id; otherwise
        the ranking and round counter stay untouched and a notice is
        returned.
        """
        positives = [i for i, relevant in session.judgments.items() if relevant]
        negatives = [i for i, relevant in session.judgments.items() if not relevant]
        if not positives or not negatives:
            return FinetuneOutcome(
                session,
                retrained=False,
                notice="insufficient feedback: need at least one relevant and one non-relevant image",
            )
        X = np.vstack(
            [self.corpus.vector(i) for i in positives]
            + [self.corpus.vector(i) for i in negatives]
        )
        y = np.concatenate([np.ones(len(positives)), -np.ones(len(negatives))])
        model = KernelSVC(**self.svm_params).fit(X, y)
        session.current_ranking = rank_by_confidence(model, session.pool_records)
        session.round += 1
        return FinetuneOutcome(session, retrained=True)

    def get_results(self, session: Session, offset: int = 0, limit: int = 50) -> ResultPage:
        """Page of the current ranking with judgment badges."""
        if offset < 0:
            raise ValueError(f"offset must be >= 0, got {offset}")
        if limit < 1:
            raise ValueError(f"limit must be >= 1, got {limit}")
        entries = []
        for position, (entry_id, score) in enumerate(
            session.current_ranking.entries[offset : offset + limit], start=offset + 1
        ):
            if entry_id in session.judgments:
                badge = "relevant" if session.judgments[entry_id] else "non-relevant"
            else:
                badge = "none"
            entries.append(ResultEntry(position, entry_id, score, badge))
        return ResultPage(entries, total=len(session.current_ranking))
