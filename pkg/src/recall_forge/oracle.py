"""Oracle backends and their wire protocol.

Corrective-instruction synthesis and consistency checks go through a
single request/response contract with a "kind" discriminator.  The mock
backend answers from the synthetic world's ground truth and is exact by
construction; the remote backend speaks the same JSON over HTTP, so a
bridge process can stand in for the mock without any caller changes.
"""

from __future__ import annotations

import hashlib
import time
from typing import Protocol

import numpy as np
import requests

from .errors import OracleProtocolError, OracleTransportError
from .records import NO, VALID, VIOLATED, YES, IntentVerdict, VqaAnswer
from .world import World, ground_truth_diff, parse_instruction, render_instruction

KIND_GENERATE = "generate_corrective"
KIND_VQA = "vqa_check"

ORACLE_PATH = "/v1/oracle"
RETRYABLE_STATUS = (502, 503, 504)


class OracleBackend(Protocol):
    """Anything that answers one protocol request with one response dict."""

    def handle(self, request: dict) -> dict: ...


def make_descriptor(item_id: str, attributes) -> dict:
    return {"id": str(item_id), "attributes": [int(a) for a in attributes]}


def build_generate_request(reference: dict, instruction: str,
                           candidate: dict) -> dict:
    return {"kind": KIND_GENERATE, "reference": reference,
            "instruction": instruction, "candidate": candidate}


def build_vqa_request(instruction: str, candidate: dict, questions) -> dict:
    return {"kind": KIND_VQA, "instruction": instruction,
            "candidate": candidate, "questions": list(questions)}


def question_for_edit(slot: int, value: int) -> str:
    return f"is a{slot} set to v{value}?"


def parse_question(question: str) -> tuple[int, int]:
    tokens = question.rstrip("?").split()
    if (len(tokens) != 5 or tokens[0] != "is" or tokens[2] != "set"
            or tokens[3] != "to" or not tokens[1].startswith("a")
            or not tokens[4].startswith("v")):
        raise OracleProtocolError(f"unrecognized question: {question!r}")
    try:
        return int(tokens[1][1:]), int(tokens[4][1:])
    except ValueError:
        raise OracleProtocolError(f"unrecognized question: {question!r}") from None


def parse_generate_response(doc: dict) -> tuple[tuple[IntentVerdict, ...], str]:
    """Validate a generate response; malformed payloads raise protocol errors."""
    if not isinstance(doc, dict):
        raise OracleProtocolError("generate response is not an object")
    intents = doc.get("intents")
    corrected = doc.get("corrected_instruction")
    if not isinstance(intents, list) or not intents:
        raise OracleProtocolError("generate response carries no intents")
    if not isinstance(corrected, str) or not corrected:
        raise OracleProtocolError("generate response lacks a corrected instruction")
    trace = []
    for entry in intents:
        if not isinstance(entry, dict):
            raise OracleProtocolError("intent entry is not an object")
        text, verdict = entry.get("text"), entry.get("verdict")
        if not isinstance(text, str) or verdict not in (VALID, VIOLATED):
            raise OracleProtocolError(f"bad intent entry: {entry!r}")
        trace.append(IntentVerdict(text=text, verdict=verdict))
    return tuple(trace), corrected


def parse_vqa_response(doc: dict, questions) -> tuple[VqaAnswer, ...]:
    """Validate a vqa response; every posed question must be answered in order."""
    if not isinstance(doc, dict):
        raise OracleProtocolError("vqa response is not an object")
    answers = doc.get("answers")
    if not isinstance(answers, list):
        raise OracleProtocolError("vqa response carries no answers")
    if len(answers) != len(questions):
        raise OracleProtocolError(
            f"expected {len(questions)} answers, got {len(answers)}")
    parsed = []
    for question, entry in zip(questions, answers):
        if not isinstance(entry, dict):
            raise OracleProtocolError("answer entry is not an object")
        if entry.get("question") != question:
            raise OracleProtocolError(
                f"answer out of order: expected {question!r}, "
                f"got {entry.get('question')!r}")
        answer, conf = entry.get("answer"), entry.get("confidence")
        if answer not in (YES, NO) or not isinstance(conf, (int, float)):
            raise OracleProtocolError(f"bad answer entry: {entry!r}")
        if not 0.0 <= float(conf) <= 1.0:
            raise OracleProtocolError(f"confidence {conf} outside [0, 1]")
        parsed.append(VqaAnswer(question=question, answer=answer,
                                confidence=float(conf)))
    return tuple(parsed)


class MockOracle:
    """Exact oracle over a synthetic world's ground-truth attributes.

    generate_corrective renders the true attribute diff from reference to
    candidate in the world grammar; vqa_check answers by direct lookup
    with confidence 1.0.  The noise knob corrupts each generated edit
    independently with the given probability, which the quality filter is
    expected to catch.  Corruption draws from a per-pair generator keyed
    by (seed, reference id, candidate id), so results do not depend on
    request order or concurrency.
    """

    def __init__(self, world: World, noise: float = 0.0, seed: int = 0):
        if not 0.0 <= noise <= 1.0:
            raise OracleProtocolError(f"noise must be in [0, 1], got {noise}")
        self._world = world
        self._noise = noise
        self._seed = seed

    def handle(self, request: dict) -> dict:
        kind = request.get("kind")
        if kind == KIND_GENERATE:
            return self._generate(request)
        if kind == KIND_VQA:
            return self._vqa(request)
        raise OracleProtocolError(f"unknown request kind {kind!r}")

    def _pair_rng(self, ref_id: str, cand_id: str) -> np.random.Generator:
        key = f"{self._seed}|{ref_id}|{cand_id}".encode()
        digest = hashlib.sha256(key).digest()
        return np.random.default_rng(int.from_bytes(digest[:8], "big"))

    def _generate(self, request: dict) -> dict:
        ref_id = str(request["reference"]["id"])
        cand_id = str(request["candidate"]["id"])
        cand_attrs = self._world.attributes(cand_id)
        intents = []
        for slot, val in parse_instruction(str(request["instruction"])):
            verdict = VALID if int(cand_attrs[slot]) == val else VIOLATED
            intents.append({"text": f"set a{slot} to v{val}", "verdict": verdict})

        edits = ground_truth_diff(self._world, ref_id, cand_id)
        if self._noise > 0.0 and edits:
            rng = self._pair_rng(ref_id, cand_id)
            values = self._world.spec.values_per_attribute
            noisy = []
            for slot, val in edits:
                if rng.random() < self._noise:
                    # Any wrong value breaks consistency with the candidate.
                    v = int(rng.integers(0, values - 1))
                    val = v + 1 if v >= val else v
                noisy.append((slot, val))
            edits = noisy
        corrected = render_instruction(edits) if edits else ""
        return {"intents": intents, "corrected_instruction": corrected}

    def _vqa(self, request: dict) -> dict:
        cand_attrs = self._world.attributes(str(request["candidate"]["id"]))
        answers = []
        for question in request["questions"]:
            slot, value = parse_question(str(question))
            holds = (0 <= slot < len(cand_attrs)
                     and int(cand_attrs[slot]) == value)
            answers.append({"question": question,
                            "answer": YES if holds else NO,
                            "confidence": 1.0})
        return {"answers": answers}


class RemoteOracle:
    """HTTP client for an oracle service speaking the wire protocol.

    Transport failures and retryable statuses are retried with backoff and
    end in OracleTransportError; any non-200 final status or non-JSON body
    is a protocol error.
    """

    def __init__(self, url: str, timeout: float = 30.0, max_retries: int = 3,
                 backoff: float = 0.25):
        if not url:
            raise OracleTransportError("oracle url is empty")
        base = url.rstrip("/")
        self._endpoint = base if base.endswith(ORACLE_PATH) else base + ORACLE_PATH
        self._timeout = timeout
        self._max_retries = max_retries
        self._backoff = backoff

    def handle(self, request: dict) -> dict:
        last_error = None
        for attempt in range(self._max_retries + 1):
            if attempt:
                time.sleep(self._backoff * (2 ** (attempt - 1)))
            try:
                resp = requests.post(self._endpoint, json=request,
                                     timeout=self._timeout)
            except requests.RequestException as exc:
                last_error = exc
                continue
            if resp.status_code in RETRYABLE_STATUS:
                last_error = OracleTransportError(
                    f"oracle returned HTTP {resp.status_code}")
                continue
            if resp.status_code != 200:
                raise OracleProtocolError(
                    f"oracle returned HTTP {resp.status_code}: {resp.text[:200]}")
            try:
                return resp.json()
            except ValueError:
                raise OracleProtocolError("oracle response is not JSON") from None
        raise OracleTransportError(
            f"oracle unreachable after {self._max_retries + 1} attempts: "
            f"{last_error}")
