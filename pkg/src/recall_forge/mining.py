"""Self-guided mining of informative false positives.

A frozen encoder ranks the gallery for every training query.  Queries
whose ground-truth target lands at rank 1 are successes and mine nothing;
each failure emits the up-to-top_k items ranked strictly above the
target.  A seeded random baseline samples from the top of the ranking
instead, for budget-matched comparisons.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .encoder import EncoderParameters, forward_query_batch
from .errors import ArgumentError, DataError
from .index import Gallery, rank_all
from .records import Triplet, read_jsonl, write_jsonl
from .world import World


@dataclass
class MiningConfig:
    top_k: int = 5
    exclude_reference_from_gallery: bool = True

    def validate(self) -> None:
        if self.top_k < 1:
            raise ArgumentError(f"top_k must be >= 1, got {self.top_k}")


@dataclass
class MiningRecord:
    """Outcome for one query: its target's rank and the mined distractors."""

    query_id: str
    gt_rank: int
    informative: list[str]

    def to_dict(self) -> dict:
        return {"query_id": self.query_id, "gt_rank": self.gt_rank,
                "informative": list(self.informative)}

    @classmethod
    def from_dict(cls, doc: dict) -> "MiningRecord":
        try:
            return cls(query_id=str(doc["query_id"]),
                       gt_rank=int(doc["gt_rank"]),
                       informative=[str(i) for i in doc["informative"]])
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"malformed mining record: {exc}") from exc


@dataclass
class MiningReport:
    records: list[MiningRecord] = field(default_factory=list)

    @property
    def failure_count(self) -> int:
        return sum(1 for r in self.records if r.gt_rank > 1)

    @property
    def mined_instance_count(self) -> int:
        return sum(len(r.informative) for r in self.records)

    def save(self, path) -> None:
        write_jsonl(path, (r.to_dict() for r in self.records))

    @classmethod
    def load(cls, path) -> "MiningReport":
        return cls(records=[MiningRecord.from_dict(d) for d in read_jsonl(path)])


def _query_embeddings(params: EncoderParameters, triplets, world: World) -> np.ndarray:
    return forward_query_batch(params, world.query_input_matrix(triplets))


def _ranked_ids(gallery: Gallery, embedding, triplet: Triplet,
                exclude_reference: bool) -> list[str]:
    if triplet.target_id not in gallery:
        raise DataError(
            f"target {triplet.target_id!r} of query {triplet.query_id!r} "
            "is not in the gallery")
    exclude = ()
    if exclude_reference and triplet.reference_id in gallery:
        exclude = (triplet.reference_id,)
    ranked = rank_all(gallery, embedding, k=len(gallery),
                      query_id=triplet.query_id, exclude=exclude)
    return ranked.ids


def mine(params: EncoderParameters, triplets: list[Triplet], gallery: Gallery,
         cfg: MiningConfig, *, world: World) -> MiningReport:
    """Diagnose failures and mine the items outranking each target.

    The world supplies raw query features (the gallery holds embeddings
    only).  Parameters are read-only; the report lists queries in input
    order.  Every mined id sits strictly above the ground truth in the
    ranking that produced it.
    """
    cfg.validate()
    embeddings = _query_embeddings(params, triplets, world)
    records = []
    for triplet, emb in zip(triplets, embeddings):
        ids = _ranked_ids(gallery, emb, triplet,
                          cfg.exclude_reference_from_gallery)
        gt_rank = ids.index(triplet.target_id) + 1
        informative = [] if gt_rank == 1 else ids[:min(cfg.top_k, gt_rank - 1)]
        records.append(MiningRecord(query_id=triplet.query_id,
                                    gt_rank=gt_rank, informative=informative))
    return MiningReport(records=records)


def random_mine(params: EncoderParameters, triplets: list[Triplet],
                gallery: Gallery, pool_k: int, sample_n: int, seed: int, *,
                world: World,
                exclude_reference: bool = True) -> MiningReport:
    """Baseline: sample distractors from the top of the ranking.

    Every query contributes (not only failures).  The ground truth is
    excluded from the candidate pool, then sample_n items are drawn
    uniformly without replacement from the top pool_k with a generator
    seeded once for the whole run.
    """
    if pool_k < sample_n:
        raise ArgumentError(f"pool_k ({pool_k}) smaller than sample_n ({sample_n})")
    if sample_n < 1:
        raise ArgumentError(f"sample_n must be >= 1, got {sample_n}")
    rng = np.random.default_rng(seed)
    embeddings = _query_embeddings(params, triplets, world)
    records = []
    for triplet, emb in zip(triplets, embeddings):
        ids = _ranked_ids(gallery, emb, triplet, exclude_reference)
        gt_rank = ids.index(triplet.target_id) + 1
        pool = [i for i in ids[:pool_k + 1] if i != triplet.target_id][:pool_k]
        if len(pool) < sample_n:
            raise DataError(
                f"query {triplet.query_id!r}: candidate pool of {len(pool)} "
                f"cannot supply {sample_n} samples")
        picks = rng.choice(len(pool), size=sample_n, replace=False)
        records.append(MiningRecord(query_id=triplet.query_id, gt_rank=gt_rank,
                                    informative=[pool[i] for i in picks]))
    return MiningReport(records=records)


def trim_to_budget(report: MiningReport, max_instances: int) -> MiningReport:
    """Cap the total mined-instance count, keeping earlier queries intact.

    Used to hold the data budget constant when comparing mining
    strategies.  Records keep their query order; once the budget is
    exhausted the remaining instance lists are emptied.
    """
    if max_instances < 0:
        raise ArgumentError("max_instances must be >= 0")
    remaining = max_instances
    trimmed = []
    for rec in report.records:
        take = rec.informative[:remaining]
        trimmed.append(MiningRecord(query_id=rec.query_id, gt_rank=rec.gt_rank,
                                    informative=list(take)))
        remaining -= len(take)
    return MiningReport(records=trimmed)
