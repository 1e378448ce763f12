"""Cut-off ranking metrics: Recall@K and Average Precision@K.

Both take the full ground-truth relevant set; relevant items missing
from the ranking still count in the denominators, so a truncated
candidate pool caps the achievable score.
"""

from __future__ import annotations

from collections.abc import Iterable, Set

from .store import RankedList


def _top_ids(ranking, k: int) -> list[str]:
    ids = ranking.ids if isinstance(ranking, RankedList) else list(ranking)
    return ids[:k]


def recall_at_k(ranking: RankedList | Iterable[str], relevant_ids: Set[str], k: int) -> float:
    """Fraction of the relevant set found in the top k."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if not relevant_ids:
        raise ValueError("relevant set must be non-empty")
    top = _top_ids(ranking, k)
    hits = sum(1 for entry_id in top if entry_id in relevant_ids)
    return hits / len(relevant_ids)


def average_precision_at_k(ranking: RankedList | Iterable[str], relevant_ids: Set[str], k: int) -> float:
    """AP@K with the min(|relevant|, k) normalizer.

    AP@K = sum over relevant ranks i <= k of Precision@i, divided by
    min(|relevant|, k).
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if not relevant_ids:
        raise ValueError("relevant set must be non-empty")
    top = _top_ids(ranking, k)
    hits = 0
    precision_sum = 0.0
    for i, entry_id in enumerate(top, start=1):
        if entry_id in relevant_ids:
            hits += 1
            precision_sum += hits / i
    return precision_sum / min(len(relevant_ids), k)
