"""Two-tower embedding encoder.

A tower is a stack of affine layers with tanh on hidden layers and a
linear output.  The query tower consumes the concatenation of an image
feature and an instruction text feature; the target tower consumes an
image feature alone.  Parameters are plain float64 arrays so snapshots
serialize to portable JSON.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import kernels
from .errors import DataError, ShapeError
from .vectors import as_vector

SNAPSHOT_FORMAT = "tower-params-v1"

# Hidden layers start near the tanh linear regime; the output layer starts
# small so early contrastive gradients (which scale with the inverse
# embedding norm) produce large relative updates at tiny learning rates.
HIDDEN_INIT_GAIN = 1.0
OUTPUT_INIT_GAIN = 0.05


@dataclass
class LayerParams:
    """One affine layer: y = weights @ x + bias, weights is (out, in)."""

    weights: np.ndarray
    bias: np.ndarray

    def validate(self) -> None:
        if self.weights.ndim != 2 or self.bias.ndim != 1:
            raise ShapeError("layer weights must be 2-D and bias 1-D")
        if self.weights.shape[0] != self.bias.shape[0]:
            raise ShapeError(
                f"bias dim {self.bias.shape[0]} does not match "
                f"weight rows {self.weights.shape[0]}")
        if not (np.all(np.isfinite(self.weights)) and np.all(np.isfinite(self.bias))):
            raise ShapeError("layer contains non-finite entries")

    def copy(self) -> "LayerParams":
        return LayerParams(self.weights.copy(), self.bias.copy())


@dataclass
class EncoderParameters:
    """All weights of the two-tower encoder."""

    query_tower: list[LayerParams]
    target_tower: list[LayerParams]

    def validate(self) -> None:
        for name, tower in (("query", self.query_tower), ("target", self.target_tower)):
            if not tower:
                raise ShapeError(f"{name} tower has no layers")
            for layer in tower:
                layer.validate()
            for prev, nxt in zip(tower, tower[1:]):
                if nxt.weights.shape[1] != prev.weights.shape[0]:
                    raise ShapeError(f"{name} tower layer dims do not chain")
        if self.query_tower[-1].weights.shape[0] != self.target_tower[-1].weights.shape[0]:
            raise ShapeError("towers emit different embedding dims")

    @property
    def query_input_dim(self) -> int:
        return self.query_tower[0].weights.shape[1]

    @property
    def target_input_dim(self) -> int:
        return self.target_tower[0].weights.shape[1]

    @property
    def embedding_dim(self) -> int:
        return self.query_tower[-1].weights.shape[0]

    def copy(self) -> "EncoderParameters":
        return EncoderParameters([l.copy() for l in self.query_tower],
                                 [l.copy() for l in self.target_tower])

    def to_dict(self) -> dict:
        def tower(layers: list[LayerParams]) -> list[dict]:
            return [{"dims": list(l.weights.shape),
                     "weights": l.weights.tolist(),
                     "bias": l.bias.tolist()} for l in layers]

        return {"format": SNAPSHOT_FORMAT,
                "embedding_dim": self.embedding_dim,
                "query_tower": tower(self.query_tower),
                "target_tower": tower(self.target_tower)}

    @classmethod
    def from_dict(cls, doc: dict) -> "EncoderParameters":
        if doc.get("format") != SNAPSHOT_FORMAT:
            raise DataError(f"unsupported snapshot format {doc.get('format')!r}")

        def tower(entries) -> list[LayerParams]:
            layers = []
            for e in entries:
                w = np.ascontiguousarray(np.asarray(e["weights"], dtype=np.float64))
                b = np.ascontiguousarray(np.asarray(e["bias"], dtype=np.float64))
                if list(w.shape) != list(e["dims"]):
                    raise DataError("snapshot dims do not match weight payload")
                layers.append(LayerParams(w, b))
            return layers

        params = cls(tower(doc["query_tower"]), tower(doc["target_tower"]))
        params.validate()
        return params

    def snapshot_id(self) -> str:
        payload = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(payload).hexdigest()[:12]


def init_params(query_input_dim: int, target_input_dim: int, seed: int,
                hidden_dims: tuple[int, ...] = (64,),
                embedding_dim: int = 32) -> EncoderParameters:
    """Seeded random initialization for both towers."""
    rng = np.random.default_rng(seed)

    def tower(d_in: int) -> list[LayerParams]:
        dims = (d_in, *hidden_dims, embedding_dim)
        layers = []
        for k, (fan_in, fan_out) in enumerate(zip(dims, dims[1:])):
            gain = OUTPUT_INIT_GAIN if k == len(dims) - 2 else HIDDEN_INIT_GAIN
            scale = gain / np.sqrt(fan_in)
            w = rng.normal(0.0, scale, size=(fan_out, fan_in))
            layers.append(LayerParams(np.ascontiguousarray(w), np.zeros(fan_out)))
        return layers

    params = EncoderParameters(tower(query_input_dim), tower(target_input_dim))
    params.validate()
    return params


def _tower_arrays(tower: list[LayerParams]) -> tuple[list[np.ndarray], list[np.ndarray]]:
    return [l.weights for l in tower], [l.bias for l in tower]


def forward_query_batch(params: EncoderParameters, inputs: np.ndarray) -> np.ndarray:
    """Embed a (batch, query_input_dim) matrix through the query tower."""
    if inputs.ndim != 2 or inputs.shape[1] != params.query_input_dim:
        raise ShapeError(
            f"query inputs must be (n, {params.query_input_dim}), got {inputs.shape}")
    w, b = _tower_arrays(params.query_tower)
    return kernels.tower_forward(np.ascontiguousarray(inputs, dtype=np.float64), w, b)[-1]


def forward_target_batch(params: EncoderParameters, inputs: np.ndarray) -> np.ndarray:
    """Embed a (batch, target_input_dim) matrix through the target tower."""
    if inputs.ndim != 2 or inputs.shape[1] != params.target_input_dim:
        raise ShapeError(
            f"target inputs must be (n, {params.target_input_dim}), got {inputs.shape}")
    w, b = _tower_arrays(params.target_tower)
    return kernels.tower_forward(np.ascontiguousarray(inputs, dtype=np.float64), w, b)[-1]


def encode_query(params: EncoderParameters, image_feat, text_feat) -> np.ndarray:
    """Embed one (image feature, text feature) pair.

    The two features are concatenated and pushed through the query tower.
    Deterministic; raises ShapeError when the concatenated dimension does
    not match the tower input.
    """
    img = as_vector(image_feat, "image_feat")
    txt = as_vector(text_feat, "text_feat")
    x = np.concatenate([img, txt])[None, :]
    return forward_query_batch(params, x)[0]


def encode_target(params: EncoderParameters, image_feat) -> np.ndarray:
    """Embed one gallery item image feature through the target tower."""
    img = as_vector(image_feat, "image_feat")
    return forward_target_batch(params, img[None, :])[0]


def save_params(params: EncoderParameters, path: str | Path) -> str:
    """Write a JSON snapshot; returns its snapshot id."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    doc = params.to_dict()
    path.write_text(json.dumps(doc, sort_keys=True) + "\n")
    return params.snapshot_id()


def load_params(path: str | Path) -> EncoderParameters:
    path = Path(path)
    if not path.exists():
        raise DataError(f"parameter snapshot not found: {path}")
    return EncoderParameters.from_dict(json.loads(path.read_text()))
