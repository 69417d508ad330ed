"""Supervision records and their JSONL persistence.

A Triplet is the unit of baseline supervision: reference image id,
instruction text, target image id.  A CorrectiveTriplet is a synthesized
counterpart pointing at a distractor the retriever preferred, carrying
the oracle's verification trace and the quality-filter verdict.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import DataError

VALID = "valid"
VIOLATED = "violated"
YES = "yes"
NO = "no"


def write_jsonl(path, rows) -> None:
    """Write dict rows to path, one compact sorted-key JSON object per line."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True, separators=(",", ":")))
            fh.write("\n")


def read_jsonl(path) -> list[dict]:
    path = Path(path)
    if not path.exists():
        raise DataError(f"file not found: {path}")
    rows = []
    with path.open() as fh:
        for n, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rows.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{n}: invalid JSON ({exc})") from exc
    return rows


@dataclass(frozen=True)
class Triplet:
    query_id: str
    reference_id: str
    instruction: str
    target_id: str

    def validate(self) -> None:
        if self.reference_id == self.target_id:
            raise DataError(
                f"query {self.query_id!r}: reference equals target")
        if not self.instruction:
            raise DataError(f"query {self.query_id!r}: empty instruction")

    def to_dict(self) -> dict:
        return {"query_id": self.query_id, "reference_id": self.reference_id,
                "instruction": self.instruction, "target_id": self.target_id}

    @classmethod
    def from_dict(cls, doc: dict) -> "Triplet":
        try:
            t = cls(query_id=str(doc["query_id"]),
                    reference_id=str(doc["reference_id"]),
                    instruction=str(doc["instruction"]),
                    target_id=str(doc["target_id"]))
        except KeyError as exc:
            raise DataError(f"triplet record missing field {exc}") from exc
        t.validate()
        return t


@dataclass(frozen=True)
class IntentVerdict:
    """One atomic intent of an instruction and whether the candidate meets it."""

    text: str
    verdict: str

    def __post_init__(self):
        if self.verdict not in (VALID, VIOLATED):
            raise DataError(f"bad intent verdict {self.verdict!r}")

    def to_dict(self) -> dict:
        return {"intent": self.text, "verdict": self.verdict}

    @classmethod
    def from_dict(cls, doc: dict) -> "IntentVerdict":
        return cls(text=str(doc["intent"]), verdict=str(doc["verdict"]))


@dataclass(frozen=True)
class VqaAnswer:
    question: str
    answer: str
    confidence: float

    def __post_init__(self):
        if self.answer not in (YES, NO):
            raise DataError(f"bad VQA answer {self.answer!r}")
        if not 0.0 <= self.confidence <= 1.0:
            raise DataError(f"confidence {self.confidence} outside [0, 1]")

    def to_dict(self) -> dict:
        return {"question": self.question, "answer": self.answer,
                "confidence": self.confidence}

    @classmethod
    def from_dict(cls, doc: dict) -> "VqaAnswer":
        return cls(question=str(doc["question"]), answer=str(doc["answer"]),
                   confidence=float(doc["confidence"]))


@dataclass(frozen=True)
class FilterVerdict:
    """Outcome of the consistency filter for one corrective triplet."""

    passed: bool
    answers: tuple[VqaAnswer, ...] = ()
    reason: str = ""

    def to_dict(self) -> dict:
        doc = {"passed": self.passed,
               "answers": [a.to_dict() for a in self.answers]}
        if self.reason:
            doc["reason"] = self.reason
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "FilterVerdict":
        return cls(passed=bool(doc["passed"]),
                   answers=tuple(VqaAnswer.from_dict(a)
                                 for a in doc.get("answers", [])),
                   reason=str(doc.get("reason", "")))


@dataclass
class CorrectiveTriplet:
    """Synthesized (reference, corrected instruction, distractor) record."""

    parent_query_id: str
    reference_id: str
    corrected_instruction: str
    informative_id: str
    verification_trace: tuple[IntentVerdict, ...] = ()
    filter: FilterVerdict | None = None

    def validate(self) -> None:
        if not self.corrected_instruction:
            raise DataError(
                f"corrective for query {self.parent_query_id!r}: "
                "empty corrected instruction")

    def to_dict(self) -> dict:
        doc = {
            "parent_query_id": self.parent_query_id,
            "reference_id": self.reference_id,
            "corrected_instruction": self.corrected_instruction,
            "informative_id": self.informative_id,
            "verification_trace": [v.to_dict() for v in self.verification_trace],
        }
        if self.filter is not None:
            doc["filter"] = self.filter.to_dict()
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "CorrectiveTriplet":
        try:
            ct = cls(
                parent_query_id=str(doc["parent_query_id"]),
                reference_id=str(doc["reference_id"]),
                corrected_instruction=str(doc["corrected_instruction"]),
                informative_id=str(doc["informative_id"]),
                verification_trace=tuple(
                    IntentVerdict.from_dict(v)
                    for v in doc.get("verification_trace", [])),
                filter=(FilterVerdict.from_dict(doc["filter"])
                        if "filter" in doc else None),
            )
        except KeyError as exc:
            raise DataError(f"corrective record missing field {exc}") from exc
        ct.validate()
        return ct


def save_triplets(path, triplets) -> None:
    write_jsonl(path, (t.to_dict() for t in triplets))


def load_triplets(path) -> list[Triplet]:
    return [Triplet.from_dict(d) for d in read_jsonl(path)]


def save_correctives(path, correctives) -> None:
    write_jsonl(path, (c.to_dict() for c in correctives))


def load_correctives(path) -> list[CorrectiveTriplet]:
    return [CorrectiveTriplet.from_dict(d) for d in read_jsonl(path)]
