"""Corrective-triplet synthesis and consistency filtering.

For every mined distractor the oracle decomposes the original
instruction into atomic intents, verdicts them against the distractor,
and emits a corrected instruction.  A second oracle pass asks one yes/no
question per corrected edit; a triplet is kept only when every answer is
"yes" at or above the confidence threshold.  Malformed oracle output
discards the affected triplet instead of failing the run; transport
failures propagate after the client's own retries.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from .errors import ArgumentError, DataError, OracleProtocolError
from .mining import MiningReport
from .oracle import (OracleBackend, build_generate_request, build_vqa_request,
                     make_descriptor, parse_generate_response,
                     parse_vqa_response, question_for_edit)
from .records import YES, CorrectiveTriplet, FilterVerdict, Triplet
from .world import World, parse_instruction

log = logging.getLogger(__name__)

DEFAULT_VQA_THRESHOLD = 0.95


def generate_corrective(oracle: OracleBackend, reference: dict,
                        instruction: str, informative: dict,
                        parent_query_id: str = "") -> CorrectiveTriplet:
    """One oracle round trip producing an unfiltered corrective triplet.

    Raises OracleProtocolError on malformed oracle output (callers discard
    the triplet) and lets transport errors propagate.
    """
    request = build_generate_request(reference, instruction, informative)
    trace, corrected = parse_generate_response(oracle.handle(request))
    return CorrectiveTriplet(
        parent_query_id=parent_query_id,
        reference_id=str(reference["id"]),
        corrected_instruction=corrected,
        informative_id=str(informative["id"]),
        verification_trace=trace,
        filter=None,
    )


def vqa_filter(oracle: OracleBackend, candidate_triplets, threshold: float, *,
               describe, max_workers: int = 1):
    """Partition correctives into (kept, rejected) by oracle consistency.

    One question is posed per edit of the corrected instruction against
    the informative instance.  describe maps an item id to its wire
    descriptor.  Order is stable: kept + rejected is a permutation of the
    input that preserves relative order within each part.
    """
    if not 0.0 <= threshold <= 1.0:
        raise ArgumentError(f"threshold must be in [0, 1], got {threshold}")

    def check(ct: CorrectiveTriplet) -> FilterVerdict:
        # DataError covers corrected instructions outside the grammar:
        # no checkable questions can be derived, so the triplet is dropped.
        try:
            edits = parse_instruction(ct.corrected_instruction)
            questions = [question_for_edit(s, v) for s, v in edits]
            request = build_vqa_request(ct.corrected_instruction,
                                        describe(ct.informative_id), questions)
            answers = parse_vqa_response(oracle.handle(request), questions)
        except (DataError, OracleProtocolError) as exc:
            log.info("vqa check failed for %s/%s: %s",
                        ct.parent_query_id, ct.informative_id, exc)
            return FilterVerdict(passed=False, answers=(), reason=str(exc))
        passed = all(a.answer == YES and a.confidence >= threshold
                     for a in answers)
        return FilterVerdict(passed=passed, answers=answers)

    triplets = list(candidate_triplets)
    if max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            verdicts = list(pool.map(check, triplets))
    else:
        verdicts = [check(ct) for ct in triplets]

    kept, rejected = [], []
    for ct, verdict in zip(triplets, verdicts):
        ct.filter = verdict
        (kept if verdict.passed else rejected).append(ct)
    return kept, rejected


@dataclass
class CalibrationResult:
    """Everything Stage 3 produced, with filter bookkeeping."""

    kept: list[CorrectiveTriplet] = field(default_factory=list)
    rejected: list[CorrectiveTriplet] = field(default_factory=list)
    generation_failures: int = 0
    vqa_threshold: float = DEFAULT_VQA_THRESHOLD

    @property
    def generated_count(self) -> int:
        return len(self.kept) + len(self.rejected)

    @property
    def kept_count(self) -> int:
        return len(self.kept)

    def summary(self) -> dict:
        return {
            "generated": self.generated_count,
            "kept": self.kept_count,
            "rejected": len(self.rejected),
            "generation_failures": self.generation_failures,
            "vqa_threshold": self.vqa_threshold,
        }


def run_calibration(oracle: OracleBackend, world: World,
                    queries: list[Triplet], mining: MiningReport,
                    threshold: float = DEFAULT_VQA_THRESHOLD,
                    max_workers: int = 1) -> CalibrationResult:
    """Synthesize correctives for every mined instance, then filter them.

    Requests may fan out over max_workers threads; results are assembled
    in input order so the run is deterministic for a deterministic
    backend.
    """
    by_id = {t.query_id: t for t in queries}

    def describe(item_id: str) -> dict:
        item = world.item(item_id)
        return make_descriptor(item.id, item.attributes)

    jobs = []
    for record in mining.records:
        if not record.informative:
            continue
        triplet = by_id.get(record.query_id)
        if triplet is None:
            raise ArgumentError(
                f"mining record {record.query_id!r} has no matching query")
        for informative_id in record.informative:
            jobs.append((triplet, informative_id))

    def synthesize(job):
        triplet, informative_id = job
        try:
            return generate_corrective(
                oracle, describe(triplet.reference_id), triplet.instruction,
                describe(informative_id), parent_query_id=triplet.query_id)
        except OracleProtocolError as exc:
            log.info("generation discarded for %s/%s: %s",
                        triplet.query_id, informative_id, exc)
            return None

    if max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            outcomes = list(pool.map(synthesize, jobs))
    else:
        outcomes = [synthesize(job) for job in jobs]

    candidates = [ct for ct in outcomes if ct is not None]
    failures = len(outcomes) - len(candidates)
    if jobs and not candidates:
        # Tolerating per-triplet discards must not mask an oracle that never
        # speaks the protocol; with zero usable outputs the stage fails.
        raise OracleProtocolError(
            f"oracle produced no usable correctives: all {failures} "
            "generation attempts were discarded as malformed")
    kept, rejected = vqa_filter(oracle, candidates, threshold,
                                describe=describe, max_workers=max_workers)
    return CalibrationResult(kept=kept, rejected=rejected,
                             generation_failures=failures,
                             vqa_threshold=threshold)
