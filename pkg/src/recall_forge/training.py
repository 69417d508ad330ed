"""Baseline adaptation and grouped contrastive refinement.

Both stages run the same deterministic loop: seeded batch sampling,
analytic gradients of the combined objective, plain gradient descent at a
fixed learning rate.  Stage 1 forces the hinge weight to zero; the
refinement stage co-locates each original triplet with its corrective
counterparts in micro-groups so the distractor and the true target are
contrasted inside a single update.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .encoder import EncoderParameters
from .errors import ArgumentError, DataError, TrainingDivergedError
from .losses import Gradients, LossBatch, LossConfig, total_loss
from .records import CorrectiveTriplet, Triplet, read_jsonl, write_jsonl
from .world import World

# Dedup can reject draws, so batch assembly gets a bounded retry budget.
DRAW_BUDGET_FACTOR = 8


@dataclass
class TrainConfig:
    learning_rate: float = 4e-5
    batch_size: int = 64
    steps: int = 200
    seed: int = 0
    loss: LossConfig = field(default_factory=LossConfig)
    micro_group_fraction: float = 0.5
    hard_negatives: bool = False

    def validate(self) -> None:
        if self.learning_rate < 0:
            raise ArgumentError("learning_rate must be >= 0")
        if self.batch_size < 1:
            raise ArgumentError("batch_size must be >= 1")
        if self.steps < 0:
            raise ArgumentError("steps must be >= 0")
        if not 0.0 <= self.micro_group_fraction <= 1.0:
            raise ArgumentError("micro_group_fraction must be in [0, 1]")
        self.loss.validate()


@dataclass
class TrainingLog:
    """Per-step loss records plus the snapshot id of the final parameters."""

    records: list[dict] = field(default_factory=list)
    final_snapshot_id: str = ""

    def save(self, path) -> None:
        write_jsonl(path, self.records)

    @classmethod
    def load(cls, path) -> "TrainingLog":
        return cls(records=read_jsonl(path))


@dataclass
class BatchEntry:
    """One query slot of a batch; its target occupies the same row index."""

    query_id: str
    reference_id: str
    instruction: str
    target_id: str
    is_corrective: bool = False
    parent_query_id: str = ""
    neg_rows: list[int] = field(default_factory=list)


@dataclass
class BatchPlan:
    """Feature-free description of a batch; the trainer materializes it.

    extra_targets lists (target_id, owner_entry_index) rows appended after
    the per-entry targets; they join the softmax denominator and serve as
    the owner's hinge negatives without owning a query (hard-negative
    mode).
    """

    entries: list[BatchEntry] = field(default_factory=list)
    extra_targets: list[tuple[str, int]] = field(default_factory=list)


def build_micro_batches(originals: list[Triplet],
                        correctives: list[CorrectiveTriplet],
                        cfg: TrainConfig, seed: int):
    """Endless stream of batch plans mixing micro-groups and plain triplets.

    A micro-group places an original and its correctives in consecutive
    entries; the original's hinge negatives are its correctives'
    informative instances.  Identical target ids within a batch are
    deduplicated by skipping the later entry.  Orphan correctives (no
    matching original) are a data error.
    """
    cfg.validate()
    if not originals:
        raise ArgumentError("no triplets to train on")
    by_id = {t.query_id: t for t in originals}
    grouped: dict[str, list[CorrectiveTriplet]] = {}
    for ct in correctives:
        if ct.parent_query_id not in by_id:
            raise DataError(
                f"corrective references unknown query {ct.parent_query_id!r}")
        grouped.setdefault(ct.parent_query_id, []).append(ct)
    group_units = [(by_id[t.query_id], grouped[t.query_id])
                   for t in originals if t.query_id in grouped]

    rng = np.random.default_rng(seed)
    want_grouped = int(round(cfg.batch_size * cfg.micro_group_fraction))

    def one_batch() -> BatchPlan:
        plan = BatchPlan()
        used: set[str] = set()
        grouped_entries = 0
        budget = DRAW_BUDGET_FACTOR * cfg.batch_size
        while len(plan.entries) < cfg.batch_size and budget > 0:
            budget -= 1
            if group_units and grouped_entries < want_grouped:
                original, cors = group_units[int(rng.integers(0, len(group_units)))]
                if original.target_id in used:
                    continue
                room = cfg.batch_size - len(plan.entries) - 1
                fit = cors if cfg.hard_negatives else cors[:room]
                keep = []
                for ct in fit:
                    if ct.informative_id in used or ct.informative_id == original.target_id:
                        continue
                    if any(k.informative_id == ct.informative_id for k in keep):
                        continue
                    keep.append(ct)
                owner = len(plan.entries)
                plan.entries.append(BatchEntry(
                    query_id=original.query_id,
                    reference_id=original.reference_id,
                    instruction=original.instruction,
                    target_id=original.target_id))
                used.add(original.target_id)
                grouped_entries += 1
                for ct in keep:
                    used.add(ct.informative_id)
                    if cfg.hard_negatives:
                        plan.extra_targets.append((ct.informative_id, owner))
                    else:
                        row = len(plan.entries)
                        plan.entries.append(BatchEntry(
                            query_id=f"{ct.parent_query_id}#c{row}",
                            reference_id=ct.reference_id,
                            instruction=ct.corrected_instruction,
                            target_id=ct.informative_id,
                            is_corrective=True,
                            parent_query_id=ct.parent_query_id))
                        plan.entries[owner].neg_rows.append(row)
                        grouped_entries += 1
            else:
                t = originals[int(rng.integers(0, len(originals)))]
                if t.target_id in used:
                    continue
                plan.entries.append(BatchEntry(
                    query_id=t.query_id, reference_id=t.reference_id,
                    instruction=t.instruction, target_id=t.target_id))
                used.add(t.target_id)
        if not plan.entries:
            raise DataError("could not assemble a non-empty batch")
        return plan

    while True:
        yield one_batch()


def materialize_batch(plan: BatchPlan, world: World) -> LossBatch:
    """Turn a batch plan into tower-ready feature arrays."""
    n = len(plan.entries)
    queries = np.stack([world.compose_query(e.reference_id, e.instruction)
                        for e in plan.entries])
    target_ids = [e.target_id for e in plan.entries]
    target_ids += [tid for tid, _ in plan.extra_targets]
    targets = np.stack([world.item(tid).image_feature for tid in target_ids])
    neg_indices: list[list[int]] = [list(e.neg_rows) for e in plan.entries]
    for offset, (_, owner) in enumerate(plan.extra_targets):
        neg_indices[owner].append(n + offset)
    return LossBatch(query_inputs=queries, target_inputs=targets,
                     positive_index=np.arange(n), neg_indices=neg_indices)


def _apply_gradients(params: EncoderParameters, grads: Gradients,
                     lr: float) -> None:
    for layer, g in zip(params.query_tower, grads.query_tower):
        layer.weights -= lr * g.weights
        layer.bias -= lr * g.bias
    for layer, g in zip(params.target_tower, grads.target_tower):
        layer.weights -= lr * g.weights
        layer.bias -= lr * g.bias


def _run(init: EncoderParameters, originals: list[Triplet],
         correctives: list[CorrectiveTriplet], cfg: TrainConfig,
         world: World) -> tuple[EncoderParameters, TrainingLog]:
    cfg.validate()
    params = init.copy()
    log = TrainingLog()
    stream = build_micro_batches(originals, correctives, cfg, cfg.seed)
    for step in range(cfg.steps):
        batch = materialize_batch(next(stream), world)
        grads = total_loss(params, batch, cfg.loss)
        if not np.isfinite(grads.loss_value):
            raise TrainingDivergedError(
                f"non-finite loss {grads.loss_value} at step {step}")
        log.records.append({"step": step,
                            "loss_total": grads.loss_value,
                            "loss_infonce": grads.loss_infonce,
                            "loss_triplet": grads.loss_triplet})
        _apply_gradients(params, grads, cfg.learning_rate)
    log.final_snapshot_id = params.snapshot_id()
    return params, log


def train_base(init_params: EncoderParameters, triplets: list[Triplet],
               cfg: TrainConfig, *,
               world: World) -> tuple[EncoderParameters, TrainingLog]:
    """Stage-1 adaptation: softmax contrastive objective only.

    The hinge weight is forced to zero so the objective is exactly the
    contrastive term regardless of the configured lambda.  Deterministic
    for a fixed seed; steps=0 returns the initial parameters unchanged.
    """
    stage_cfg = replace(cfg, loss=replace(cfg.loss, lam=0.0))
    return _run(init_params, triplets, [], stage_cfg, world)


def refine(base_params: EncoderParameters, originals: list[Triplet],
           kept_correctives: list[CorrectiveTriplet], cfg: TrainConfig, *,
           world: World) -> tuple[EncoderParameters, TrainingLog]:
    """Stage-4 refinement from a base snapshot on micro-group batches."""
    return _run(base_params, originals, list(kept_correctives), cfg, world)
