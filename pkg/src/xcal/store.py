"""Immutable in-memory embedding store and cosine top-K retrieval.

Vectors are unit-normalized once at ingest so that cosine similarity
reduces to a dot product during scans. Ranking ties are broken by
ascending id to keep results reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CorpusError, NotFoundError

NORM_TOLERANCE = 1e-5

TAG_INITIAL = "initial-cosine"
TAG_SVM = "svm-confidence"


@dataclass(frozen=True)
class ImageRecord:
    """One corpus entry: unique id, unit vector, optional scene label and media path."""

    id: str
    vector: np.ndarray
    label: str | None = None
    media_path: str | None = None


@dataclass(frozen=True)
class RankedList:
    """Scored ids in non-increasing score order.

    ``produced_by`` records which stage emitted the ranking
    (``initial-cosine`` or ``svm-confidence``).
    """

    entries: list[tuple[str, float]]
    produced_by: str

    @property
    def ids(self) -> list[str]:
        return [entry_id for entry_id, _ in self.entries]

    def __len__(self) -> int:
        return len(self.entries)


def normalize(v) -> np.ndarray:
    """Return ``v`` scaled to unit Euclidean norm as float64.

    Raises ValueError for zero or non-finite input.
    """
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"expected a 1-d vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("vector contains NaN or Inf")
    norm = np.linalg.norm(arr)
    if norm == 0.0:
        raise ValueError("cannot normalize a zero vector")
    return arr / norm


def cosine_similarity(a, b) -> float:
    """Cosine similarity of two vectors, clamped to [-1, 1] against rounding."""
    va = np.asarray(a, dtype=np.float64)
    vb = np.asarray(b, dtype=np.float64)
    if va.shape != vb.shape:
        raise ValueError(f"dimension mismatch: {va.shape[0]} vs {vb.shape[0]}")
    na = np.linalg.norm(va)
    nb = np.linalg.norm(vb)
    if na == 0.0 or nb == 0.0:
        raise ValueError("cosine similarity undefined for zero vectors")
    return float(np.clip(np.dot(va, vb) / (na * nb), -1.0, 1.0))


class Corpus:
    """Immutable, dimension-checked store of image records.

    Vectors are normalized on construction and kept in one read-only
    float64 matrix (one row per record, in ingest order). The binary
    wire format stores float32; in memory float64 keeps downstream
    numerics (SVM training, metric sums) stable.
    """

    def __init__(
        self,
        dimension: int,
        ids: list[str],
        vectors,
        labels: list[str | None] | None = None,
        media_paths: list[str | None] | None = None,
    ):
        if dimension < 2:
            raise CorpusError(f"corpus dimension must be >= 2, got {dimension}")
        matrix = np.asarray(vectors, dtype=np.float64)
        if matrix.size == 0:
            matrix = matrix.reshape(0, dimension)
        if matrix.ndim != 2 or matrix.shape[1] != dimension:
            got = matrix.shape[-1] if matrix.ndim == 2 else "?"
            raise CorpusError(f"dimension mismatch: header says {dimension}, vectors have {got}")
        if len(ids) != matrix.shape[0]:
            raise CorpusError("ids and vectors disagree in length")
        if not np.all(np.isfinite(matrix)):
            bad = int(np.where(~np.isfinite(matrix).all(axis=1))[0][0])
            raise CorpusError(f"non-finite vector for id {ids[bad]!r}")
        norms = np.linalg.norm(matrix, axis=1)
        if np.any(norms == 0.0):
            bad = int(np.where(norms == 0.0)[0][0])
            raise CorpusError(f"zero vector for id {ids[bad]!r}")

        seen: set[str] = set()
        for record_id in ids:
            if not record_id:
                raise CorpusError("empty record id")
            if record_id in seen:
                raise CorpusError(f"duplicate record id {record_id!r}")
            seen.add(record_id)

        self.dimension = dimension
        self.ids = list(ids)
        self.matrix = matrix / norms[:, None]
        self.matrix.setflags(write=False)
        self.labels = list(labels) if labels is not None else [None] * len(ids)
        self.media_paths = list(media_paths) if media_paths is not None else [None] * len(ids)
        self._row: dict[str, int] = {record_id: i for i, record_id in enumerate(self.ids)}

    def __len__(self) -> int:
        return len(self.ids)

    def __contains__(self, record_id: str) -> bool:
        return record_id in self._row

    def row(self, record_id: str) -> int:
        try:
            return self._row[record_id]
        except KeyError:
            raise NotFoundError(f"unknown image id {record_id!r}") from None

    def vector(self, record_id: str) -> np.ndarray:
        return self.matrix[self.row(record_id)]

    def label(self, record_id: str) -> str | None:
        return self.labels[self.row(record_id)]

    def record(self, record_id: str) -> ImageRecord:
        i = self.row(record_id)
        return ImageRecord(self.ids[i], self.matrix[i], self.labels[i], self.media_paths[i])

    def records(self) -> list[ImageRecord]:
        return [
            ImageRecord(self.ids[i], self.matrix[i], self.labels[i], self.media_paths[i])
            for i in range(len(self.ids))
        ]

    def label_map(self) -> dict[str, str]:
        """id -> label for all labeled records."""
        return {
            record_id: lab
            for record_id, lab in zip(self.ids, self.labels)
            if lab is not None
        }


def initial_retrieval(query, corpus: Corpus, limit: int) -> RankedList:
    """Exhaustive cosine scan returning the top ``limit`` records.

    Scores are sorted descending; ties broken by ascending id. An empty
    corpus yields an empty list.
    """
    if limit < 1:
        raise ValueError(f"retrieval limit must be >= 1, got {limit}")
    if len(corpus) == 0:
        return RankedList([], TAG_INITIAL)
    q = np.asarray(query, dtype=np.float64)
    if q.shape != (corpus.dimension,):
        raise ValueError(
            f"query dimension {q.shape[-1] if q.ndim else '?'} does not match corpus dimension {corpus.dimension}"
        )
    qn = np.linalg.norm(q)
    if qn == 0.0:
        raise ValueError("cannot retrieve with a zero query vector")
    scores = corpus.matrix @ (q / qn)
    np.clip(scores, -1.0, 1.0, out=scores)
    ids_arr = np.asarray(corpus.ids)
    order = np.lexsort((ids_arr, -scores))[: min(limit, len(corpus))]
    entries = [(corpus.ids[i], float(scores[i])) for i in order]
    return RankedList(entries, TAG_INITIAL)
