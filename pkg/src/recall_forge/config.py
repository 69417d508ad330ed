"""Pipeline configuration: one JSON file, per-stage sections, one seed.

Stage sections map onto the dataclasses of their modules.  Named profiles
bundle the published hyperparameter presets; CLI flags override single
fields on top.  Hashing the resolved config names the run directory, so
identical configs land in identical places.
"""

from __future__ import annotations

import copy
import hashlib
import json
from pathlib import Path

from .errors import ConfigError
from .losses import LossConfig
from .mining import MiningConfig
from .training import TrainConfig
from .world import WorldSpec

# Stage seeds are derived from the top-level seed by fixed offsets so that
# stages are decoupled but the whole run stays a function of one integer.
SEED_OFFSET_WORLD = 0
SEED_OFFSET_INIT = 1
SEED_OFFSET_STAGE1 = 2
SEED_OFFSET_RANDOM_MINE = 3
SEED_OFFSET_STAGE4 = 4

DEFAULT_CONFIG: dict = {
    "seed": 7,
    "world": {
        "num_attributes": 6,
        "values_per_attribute": 5,
        "num_items": 2000,
        "num_queries": 1000,
        "edits_per_query": 1,
        "confusables_per_query": 3,
        "feature_noise_sigma": 0.05,
    },
    "encoder": {
        "hidden_dims": [64],
        "embedding_dim": 32,
    },
    "stage1": {
        "learning_rate": 4e-5,
        "batch_size": 64,
        "steps": 200,
        "temperature": 0.03,
    },
    "mining": {
        "strategy": "self_guided",
        "top_k": 5,
        "exclude_reference_from_gallery": True,
        "random": {"pool_k": 50, "sample_n": 5, "match_budget": True},
    },
    "calibration": {
        "oracle": "mock",
        "oracle_url": "",
        "vqa_threshold": 0.95,
        "mock_noise": 0.0,
        "max_workers": 1,
    },
    "stage4": {
        "learning_rate": 4e-5,
        "batch_size": 64,
        "steps": 250,
        "temperature": 0.03,
        "margin": 0.05,
        "lambda": 0.30,
        "micro_group_fraction": 0.5,
        "hard_negatives": False,
    },
    "eval": {
        "ks": [1, 5, 10],
        "subset_ks": [1, 2, 3],
        "exclude_reference": True,
    },
}

# Published presets: learning rate, temperature and step counts per flavor.
PROFILES: dict[str, dict] = {
    "fashioniq": {
        "stage1": {"learning_rate": 4e-5, "temperature": 0.03, "steps": 200},
        "stage4": {"learning_rate": 4e-5, "temperature": 0.03, "steps": 250,
                   "lambda": 0.30, "margin": 0.05},
    },
    "cirr": {
        "stage1": {"learning_rate": 2e-5, "temperature": 0.02, "steps": 300},
        "stage4": {"learning_rate": 2e-5, "temperature": 0.02, "steps": 350,
                   "lambda": 0.25, "margin": 0.05},
    },
}


def deep_merge(base: dict, override: dict) -> dict:
    """New dict: override wins, nested dicts merge recursively."""
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = deep_merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def load_config(path=None) -> dict:
    """Defaults merged with an optional JSON config file."""
    if path is None:
        return copy.deepcopy(DEFAULT_CONFIG)
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        user = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(user, dict):
        raise ConfigError("config root must be a JSON object")
    unknown = set(user) - set(DEFAULT_CONFIG) - {"profile"}
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")
    cfg = deep_merge(DEFAULT_CONFIG, user)
    profile = user.get("profile")
    if profile:
        cfg = apply_profile(cfg, profile)
    return cfg


def apply_profile(cfg: dict, name: str) -> dict:
    if name not in PROFILES:
        raise ConfigError(
            f"unknown profile {name!r}; choose from {sorted(PROFILES)}")
    merged = deep_merge(cfg, PROFILES[name])
    merged["profile"] = name
    return merged


def config_hash(cfg: dict) -> str:
    payload = json.dumps(cfg, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(payload).hexdigest()[:12]


def world_spec_from(cfg: dict) -> WorldSpec:
    section = dict(cfg["world"])
    section["seed"] = int(cfg["seed"]) + SEED_OFFSET_WORLD
    try:
        return WorldSpec.from_dict(section)
    except TypeError as exc:
        raise ConfigError(f"bad world section: {exc}") from exc


def _loss_from(section: dict) -> LossConfig:
    return LossConfig(temperature=float(section.get("temperature", 0.03)),
                      margin=float(section.get("margin", 0.05)),
                      lam=float(section.get("lambda", 0.0)))


def train_config_from(cfg: dict, stage: str) -> TrainConfig:
    section = cfg[stage]
    offset = SEED_OFFSET_STAGE1 if stage == "stage1" else SEED_OFFSET_STAGE4
    try:
        tc = TrainConfig(
            learning_rate=float(section["learning_rate"]),
            batch_size=int(section["batch_size"]),
            steps=int(section["steps"]),
            seed=int(cfg["seed"]) + offset,
            loss=_loss_from(section),
            micro_group_fraction=float(section.get("micro_group_fraction", 0.5)),
            hard_negatives=bool(section.get("hard_negatives", False)),
        )
        tc.validate()
        return tc
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad {stage} section: {exc}") from exc


def mining_config_from(cfg: dict) -> MiningConfig:
    section = cfg["mining"]
    try:
        mc = MiningConfig(
            top_k=int(section["top_k"]),
            exclude_reference_from_gallery=bool(
                section["exclude_reference_from_gallery"]),
        )
        mc.validate()
        return mc
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad mining section: {exc}") from exc
