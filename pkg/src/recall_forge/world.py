"""Synthetic compositional retrieval worlds with planted distractors.

Items carry A attribute slots of V values each.  Image features are
concatenated one-hot blocks plus seeded Gaussian noise, so an untrained
linear tower already has signal.  Each query edits a reference item; the
exact-edit target joins the gallery along with confusables that satisfy
all but one edit.  Ground-truth attributes power the exact mock oracle.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ArgumentError, DataError
from .records import Triplet, read_jsonl, write_jsonl

SUBSET_SIZE = 6


@dataclass
class WorldSpec:
    num_attributes: int = 6
    values_per_attribute: int = 5
    num_items: int = 2000
    num_queries: int = 1000
    edits_per_query: int = 1
    confusables_per_query: int = 3
    feature_noise_sigma: float = 0.05
    seed: int = 7

    def validate(self) -> None:
        if self.num_attributes < 2 or self.values_per_attribute < 2:
            raise ArgumentError("need at least 2 attributes and 2 values each")
        if not 1 <= self.edits_per_query <= self.num_attributes:
            raise ArgumentError(
                f"edits_per_query must be in [1, {self.num_attributes}]")
        if self.confusables_per_query < 1:
            raise ArgumentError("confusables_per_query must be >= 1")
        if self.num_queries < 1 or self.num_items < SUBSET_SIZE:
            raise ArgumentError("world too small to build candidate subsets")
        if self.feature_noise_sigma < 0:
            raise ArgumentError("feature_noise_sigma must be >= 0")

    @property
    def feature_dim(self) -> int:
        return self.num_attributes * self.values_per_attribute

    def to_dict(self) -> dict:
        return {
            "num_attributes": self.num_attributes,
            "values_per_attribute": self.values_per_attribute,
            "num_items": self.num_items,
            "num_queries": self.num_queries,
            "edits_per_query": self.edits_per_query,
            "confusables_per_query": self.confusables_per_query,
            "feature_noise_sigma": self.feature_noise_sigma,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "WorldSpec":
        spec = cls(**{k: doc[k] for k in cls().to_dict() if k in doc})
        spec.validate()
        return spec


@dataclass
class Item:
    id: str
    attributes: np.ndarray
    image_feature: np.ndarray

    def to_dict(self) -> dict:
        return {"id": self.id,
                "attributes": [int(a) for a in self.attributes],
                "image_feature": [float(x) for x in self.image_feature]}

    @classmethod
    def from_dict(cls, doc: dict) -> "Item":
        return cls(id=str(doc["id"]),
                   attributes=np.asarray(doc["attributes"], dtype=np.int64),
                   image_feature=np.asarray(doc["image_feature"],
                                            dtype=np.float64))


def render_instruction(edits) -> str:
    """Render (slot, value) edits as text, slots ascending.

    Each edit becomes the 4-token clause "set a<slot> to v<value>"; the
    rendering is canonical so parse_instruction inverts it exactly.
    """
    if not edits:
        raise ArgumentError("instruction needs at least one edit")
    slots = [s for s, _ in edits]
    if len(set(slots)) != len(slots):
        raise ArgumentError("instruction edits repeat a slot")
    parts = [f"set a{s} to v{v}" for s, v in sorted(edits)]
    return " ".join(parts)


def parse_instruction(text: str) -> list[tuple[int, int]]:
    """Invert render_instruction; malformed text raises a data error."""
    tokens = text.split()
    if not tokens or len(tokens) % 4 != 0:
        raise DataError(f"malformed instruction: {text!r}")
    edits = []
    for i in range(0, len(tokens), 4):
        kw, slot_tok, to, val_tok = tokens[i:i + 4]
        if (kw != "set" or to != "to"
                or not slot_tok.startswith("a") or not val_tok.startswith("v")):
            raise DataError(f"malformed clause in instruction: {text!r}")
        try:
            edits.append((int(slot_tok[1:]), int(val_tok[1:])))
        except ValueError:
            raise DataError(f"malformed clause in instruction: {text!r}") from None
    if len({s for s, _ in edits}) != len(edits):
        raise DataError(f"instruction repeats a slot: {text!r}")
    return edits


def text_feature(edits, num_attributes: int, values_per_attribute: int) -> np.ndarray:
    """One-hot over (slot, value) pairs; dim A*V, no noise."""
    vec = np.zeros(num_attributes * values_per_attribute)
    for slot, val in edits:
        if not (0 <= slot < num_attributes and 0 <= val < values_per_attribute):
            raise DataError(f"edit ({slot}, {val}) outside the world's ranges")
        vec[slot * values_per_attribute + val] = 1.0
    return vec


def apply_edits(attributes: np.ndarray, edits) -> np.ndarray:
    out = attributes.copy()
    for slot, val in edits:
        out[slot] = val
    return out


@dataclass
class World:
    spec: WorldSpec
    items: list[Item]
    queries: list[Triplet]
    subsets: dict[str, list[str]]
    _by_id: dict[str, Item] = field(repr=False, default=None)

    def __post_init__(self):
        if self._by_id is None:
            self._by_id = {it.id: it for it in self.items}

    def item(self, item_id: str) -> Item:
        try:
            return self._by_id[item_id]
        except KeyError:
            raise DataError(f"unknown item id {item_id!r}") from None

    def attributes(self, item_id: str) -> np.ndarray:
        return self.item(item_id).attributes

    def image_feature_matrix(self) -> np.ndarray:
        return np.stack([it.image_feature for it in self.items])

    def compose_query(self, reference_id: str, instruction: str) -> np.ndarray:
        """Concatenated (reference image feature, instruction text feature)."""
        edits = parse_instruction(instruction)
        txt = text_feature(edits, self.spec.num_attributes,
                           self.spec.values_per_attribute)
        return np.concatenate([self.item(reference_id).image_feature, txt])

    def query_input(self, triplet: Triplet) -> np.ndarray:
        return self.compose_query(triplet.reference_id, triplet.instruction)

    def query_input_matrix(self, triplets) -> np.ndarray:
        return np.stack([self.query_input(t) for t in triplets])

    def save(self, out_dir) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "spec.json").write_text(
            json.dumps(self.spec.to_dict(), sort_keys=True, indent=2) + "\n")
        write_jsonl(out / "items.jsonl", (it.to_dict() for it in self.items))
        write_jsonl(out / "queries.jsonl", (q.to_dict() for q in self.queries))
        write_jsonl(out / "subsets.jsonl",
                    ({"query_id": q, "subset": s} for q, s in self.subsets.items()))

    @classmethod
    def load(cls, in_dir) -> "World":
        src = Path(in_dir)
        spec_path = src / "spec.json"
        if not spec_path.exists():
            raise DataError(f"world directory missing spec.json: {src}")
        spec = WorldSpec.from_dict(json.loads(spec_path.read_text()))
        items = [Item.from_dict(d) for d in read_jsonl(src / "items.jsonl")]
        queries = [Triplet.from_dict(d) for d in read_jsonl(src / "queries.jsonl")]
        subsets = {}
        for doc in read_jsonl(src / "subsets.jsonl"):
            subsets[str(doc["query_id"])] = [str(i) for i in doc["subset"]]
        world = cls(spec=spec, items=items, queries=queries, subsets=subsets)
        world._check_consistency()
        return world

    def _check_consistency(self) -> None:
        for q in self.queries:
            if q.query_id not in self.subsets:
                raise DataError(f"query {q.query_id!r} has no candidate subset")
            subset = self.subsets[q.query_id]
            if subset.count(q.target_id) != 1:
                raise DataError(
                    f"subset of {q.query_id!r} must contain the target once")
            for item_id in subset:
                self.item(item_id)


def ground_truth_diff(world: World, from_id: str, to_id: str) -> list[tuple[int, int]]:
    """Exact (slot, destination value) list where the two items differ."""
    a = world.attributes(from_id)
    b = world.attributes(to_id)
    return [(int(s), int(b[s])) for s in range(len(a)) if a[s] != b[s]]


def _pick_different(rng, current: int, values: int) -> int:
    # Uniform over the V-1 values other than `current`.
    v = int(rng.integers(0, values - 1))
    return v + 1 if v >= current else v


def generate_world(spec: WorldSpec) -> World:
    """Deterministic world construction from the spec's seed.

    Base items are sampled first; then each query draws a reference, its
    edits, the materialized target, and confusables that copy the target
    but break exactly one edited slot with a wrong value.  Targets and
    confusables are appended to the shared gallery so mining can surface
    them.  Candidate subsets have exactly SUBSET_SIZE members.
    """
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    a_count, v_count = spec.num_attributes, spec.values_per_attribute
    dim = spec.feature_dim

    def make_item(item_id: str, attrs: np.ndarray) -> Item:
        feat = np.zeros(dim)
        for slot in range(a_count):
            feat[slot * v_count + int(attrs[slot])] = 1.0
        feat += rng.normal(0.0, spec.feature_noise_sigma, size=dim)
        return Item(id=item_id, attributes=attrs.astype(np.int64),
                    image_feature=feat)

    items = [make_item(f"itm-{k:06d}", rng.integers(0, v_count, size=a_count))
             for k in range(spec.num_items)]

    queries: list[Triplet] = []
    subsets: dict[str, list[str]] = {}
    subset_confusables = min(spec.confusables_per_query, SUBSET_SIZE - 1)

    for qn in range(spec.num_queries):
        query_id = f"qry-{qn:06d}"
        ref = items[int(rng.integers(0, spec.num_items))]
        slots = sorted(int(s) for s in
                       rng.choice(a_count, size=spec.edits_per_query, replace=False))
        edits = [(s, _pick_different(rng, int(ref.attributes[s]), v_count))
                 for s in slots]

        target = make_item(f"tgt-{qn:06d}", apply_edits(ref.attributes, edits))
        items.append(target)

        confusables = []
        for cn in range(spec.confusables_per_query):
            slot, edit_val = edits[int(rng.integers(0, len(edits)))]
            ref_val = int(ref.attributes[slot])
            # Prefer a wrong value that also differs from the reference, so
            # the corrective edit is a clean value substitution.
            pool = [v for v in range(v_count) if v not in (edit_val, ref_val)]
            wrong = pool[int(rng.integers(0, len(pool)))] if pool else ref_val
            attrs = target.attributes.copy()
            attrs[slot] = wrong
            confusable = make_item(f"cnf-{qn:06d}-{cn}", attrs)
            items.append(confusable)
            confusables.append(confusable)

        subset = [target.id] + [c.id for c in confusables[:subset_confusables]]
        banned = {ref.id}
        while len(subset) < SUBSET_SIZE:
            filler = items[int(rng.integers(0, spec.num_items))].id
            if filler not in banned and filler not in subset:
                subset.append(filler)

        queries.append(Triplet(query_id=query_id, reference_id=ref.id,
                               instruction=render_instruction(edits),
                               target_id=target.id))
        subsets[query_id] = subset

    return World(spec=spec, items=items, queries=queries, subsets=subsets)
