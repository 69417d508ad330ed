"""Exact cosine top-K retrieval over an embedded gallery, plus recall metrics.

No approximate structures: galleries are desk scale and downstream mining
depends on exact ranks.  Ties are broken by ascending gallery insertion
index, which makes every ranking reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ArgumentError, DataError, DomainError, ShapeError
from .vectors import NORM_FLOOR, as_vector


@dataclass
class Gallery:
    """Immutable id-aligned embedding matrix with unit rows precomputed."""

    ids: list[str]
    embeddings: np.ndarray
    _unit: np.ndarray = field(repr=False, default=None)
    _pos: dict[str, int] = field(repr=False, default=None)

    @classmethod
    def build(cls, ids, embeddings) -> "Gallery":
        ids = [str(i) for i in ids]
        emb = np.ascontiguousarray(np.asarray(embeddings, dtype=np.float64))
        if emb.ndim != 2:
            raise ShapeError(f"embeddings must be 2-D, got shape {emb.shape}")
        if len(ids) != emb.shape[0]:
            raise ShapeError(f"{len(ids)} ids but {emb.shape[0]} embedding rows")
        if len(set(ids)) != len(ids):
            raise DataError("gallery ids contain duplicates")
        norms = np.linalg.norm(emb, axis=1)
        if len(ids) and norms.min() < NORM_FLOOR:
            raise DomainError("gallery contains a zero-norm embedding")
        unit = emb / norms[:, None] if len(ids) else emb
        return cls(ids=ids, embeddings=emb,
                   _unit=unit, _pos={i: k for k, i in enumerate(ids)})

    def __len__(self) -> int:
        return len(self.ids)

    @property
    def dim(self) -> int:
        return self.embeddings.shape[1]

    def position(self, item_id: str) -> int:
        try:
            return self._pos[item_id]
        except KeyError:
            raise DataError(f"id {item_id!r} not in gallery") from None

    def __contains__(self, item_id: str) -> bool:
        return item_id in self._pos


@dataclass
class RankedList:
    """Candidates for one query, scores descending, ties by gallery order."""

    query_id: str
    ids: list[str]
    scores: list[float]


def _descending_order(scores: np.ndarray) -> np.ndarray:
    # Stable sort on negated scores keeps ascending insertion index on ties.
    return np.argsort(-scores, kind="stable")


def rank_all(gallery: Gallery, query_embedding, k: int, *,
             query_id: str = "", exclude=()) -> RankedList:
    """Exact top-k of the gallery by cosine similarity to the query.

    Args:
        gallery: embedded candidate pool.
        query_embedding: query vector, same dim as the gallery.
        k: number of results to keep, >= 1.
        query_id: label copied into the result.
        exclude: ids dropped from the ranking (e.g. the reference image).
    """
    if k < 1:
        raise ArgumentError(f"k must be >= 1, got {k}")
    if len(gallery) == 0:
        raise ArgumentError("cannot rank an empty gallery")
    q = as_vector(query_embedding, "query_embedding")
    if q.shape[0] != gallery.dim:
        raise ShapeError(f"query dim {q.shape[0]} != gallery dim {gallery.dim}")
    norm = np.linalg.norm(q)
    if norm < NORM_FLOOR:
        raise DomainError("query embedding has zero norm")
    scores = gallery._unit @ (q / norm)
    order = _descending_order(scores)
    skip = set(exclude)
    ids, kept = [], []
    for idx in order:
        item = gallery.ids[idx]
        if item in skip:
            continue
        ids.append(item)
        kept.append(float(scores[idx]))
        if len(ids) == k:
            break
    return RankedList(query_id=query_id, ids=ids, scores=kept)


def rank_within_subset(gallery: Gallery, query_embedding, subset_ids, *,
                       query_id: str = "") -> RankedList:
    """Rank only the given subset of gallery ids; returns the full subset order."""
    if not subset_ids:
        raise ArgumentError("subset is empty")
    q = as_vector(query_embedding, "query_embedding")
    if q.shape[0] != gallery.dim:
        raise ShapeError(f"query dim {q.shape[0]} != gallery dim {gallery.dim}")
    norm = np.linalg.norm(q)
    if norm < NORM_FLOOR:
        raise DomainError("query embedding has zero norm")
    # Sorting candidate rows ascending keeps the insertion-index tie rule.
    rows = sorted(gallery.position(i) for i in subset_ids)
    scores = gallery._unit[rows] @ (q / norm)
    order = _descending_order(scores)
    return RankedList(
        query_id=query_id,
        ids=[gallery.ids[rows[i]] for i in order],
        scores=[float(scores[i]) for i in order],
    )


def recall_at_k(ranked: list[RankedList], ground_truth: dict, k: int) -> float:
    """Fraction of queries whose target id appears in the top k."""
    if k < 1:
        raise ArgumentError(f"k must be >= 1, got {k}")
    if not ranked:
        raise ArgumentError("no ranked lists given")
    hits = 0
    for rl in ranked:
        if rl.query_id not in ground_truth:
            raise DataError(f"query {rl.query_id!r} has no ground truth")
        if ground_truth[rl.query_id] in rl.ids[:k]:
            hits += 1
    return hits / len(ranked)


def recall_subset_at_k(ranked: list[RankedList], ground_truth: dict,
                       k: int) -> float:
    """recall_at_k over subset rankings; targets must appear in their subset.

    Pass untruncated subset rankings (every subset member present), or the
    membership check cannot be performed.
    """
    if k < 1:
        raise ArgumentError(f"k must be >= 1, got {k}")
    if not ranked:
        raise ArgumentError("no ranked lists given")
    hits = 0
    for rl in ranked:
        if rl.query_id not in ground_truth:
            raise DataError(f"query {rl.query_id!r} has no ground truth")
        target = ground_truth[rl.query_id]
        if target not in rl.ids:
            raise DataError(
                f"target {target!r} absent from the candidate subset "
                f"of query {rl.query_id!r}")
        if target in rl.ids[:k]:
            hits += 1
    return hits / len(ranked)


def avg_metric(r_at_5: float, r_subset_at_1: float) -> float:
    """Headline summary: arithmetic mean of R@5 and subset R@1."""
    return (r_at_5 + r_subset_at_1) / 2.0


@dataclass
class MetricsReport:
    """Recall fractions by K plus the averaged headline number.

    Values are stored as fractions in [0, 1] at full precision; rendering
    as percentages happens at the report boundary.
    """

    recall_at: dict[int, float]
    recall_subset_at: dict[int, float]
    avg: float

    def to_dict(self) -> dict:
        return {
            "recall_at": {str(k): v for k, v in sorted(self.recall_at.items())},
            "recall_subset_at": {str(k): v for k, v
                                 in sorted(self.recall_subset_at.items())},
            "avg": self.avg,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "MetricsReport":
        try:
            return cls(
                recall_at={int(k): float(v) for k, v in doc["recall_at"].items()},
                recall_subset_at={int(k): float(v) for k, v
                                  in doc["recall_subset_at"].items()},
                avg=float(doc["avg"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"malformed metrics report: {exc}") from exc


def compute_metrics(full_rankings: list[RankedList],
                    subset_rankings: list[RankedList],
                    ground_truth: dict,
                    ks=(1, 5, 10),
                    subset_ks=(1, 2, 3)) -> MetricsReport:
    """Assemble a MetricsReport from precomputed rankings."""
    recall = {k: recall_at_k(full_rankings, ground_truth, k) for k in ks}
    subset = {k: recall_subset_at_k(subset_rankings, ground_truth, k)
              for k in subset_ks}
    r5 = recall.get(5, recall[max(recall)])
    s1 = subset.get(1, subset[min(subset)])
    return MetricsReport(recall_at=recall, recall_subset_at=subset,
                         avg=avg_metric(r5, s1))
