"""Stage orchestration over a run directory.

Every stage reads its inputs from and writes its outputs plus a JSON
summary under one run directory, so chaining the stages manually equals
running the whole pipeline.  Artifact contents carry no timestamps:
identical configs and seeds produce byte-identical files.
"""

from __future__ import annotations

import json
import os
import time
from pathlib import Path

from .calibrate import run_calibration
from .config import (SEED_OFFSET_INIT, SEED_OFFSET_RANDOM_MINE, config_hash,
                     mining_config_from, train_config_from, world_spec_from)
from .encoder import (EncoderParameters, forward_query_batch,
                      forward_target_batch, init_params, load_params,
                      save_params)
from .errors import ConfigError, MissingInputError
from .index import (Gallery, MetricsReport, compute_metrics, rank_all,
                    rank_within_subset)
from .mining import MiningReport, mine, random_mine, trim_to_budget
from .oracle import MockOracle, RemoteOracle
from .records import load_correctives, save_correctives
from .training import refine, train_base
from .world import World, generate_world

ORACLE_URL_ENV = "RECALL_FORGE_ORACLE_URL"


def init_run_dir(cfg: dict, out=None) -> Path:
    """Create (or reuse) the run directory and pin the resolved config.

    Without an explicit path, runs land under ./runs/ named by config hash
    plus a timestamp.  File contents never embed the timestamp.
    """
    if out is not None:
        run = Path(out)
    else:
        stamp = time.strftime("%Y%m%d-%H%M%S")
        run = Path("runs") / f"{config_hash(cfg)}-{stamp}"
    run.mkdir(parents=True, exist_ok=True)
    _write_json(run / "config.json", cfg)
    return run


def _write_json(path: Path, doc) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")


def _write_summary(run: Path, stage: str, summary: dict) -> dict:
    _write_json(run / "summaries" / f"{stage}.json", summary)
    return summary


def _require(path: Path, hint: str) -> Path:
    if not path.exists():
        raise MissingInputError(f"{path} is missing; {hint}")
    return path


def _load_world(run: Path) -> World:
    return World.load(_require(run / "world" / "spec.json",
                               "run gen-world first").parent)


def _load_snapshot(run: Path, name: str) -> EncoderParameters:
    return load_params(_require(run / "snapshots" / f"{name}.json",
                                f"no {name} snapshot; run the training stage"))


def embed_gallery(params: EncoderParameters, world: World) -> Gallery:
    embeddings = forward_target_batch(params, world.image_feature_matrix())
    return Gallery.build([it.id for it in world.items], embeddings)


def evaluate_params(params: EncoderParameters, world: World,
                    eval_cfg: dict) -> MetricsReport:
    """Full-gallery and subset recall for every query of the world."""
    ks = sorted(int(k) for k in eval_cfg.get("ks", [1, 5, 10]))
    subset_ks = sorted(int(k) for k in eval_cfg.get("subset_ks", [1, 2, 3]))
    exclude_ref = bool(eval_cfg.get("exclude_reference", True))
    gallery = embed_gallery(params, world)
    q_emb = forward_query_batch(params, world.query_input_matrix(world.queries))
    full, subset = [], []
    for triplet, emb in zip(world.queries, q_emb):
        exclude = (triplet.reference_id,) if exclude_ref else ()
        full.append(rank_all(gallery, emb, k=max(ks),
                             query_id=triplet.query_id, exclude=exclude))
        subset.append(rank_within_subset(
            gallery, emb, world.subsets[triplet.query_id],
            query_id=triplet.query_id))
    ground_truth = {t.query_id: t.target_id for t in world.queries}
    return compute_metrics(full, subset, ground_truth, ks=ks,
                           subset_ks=subset_ks)


def stage_gen_world(cfg: dict, run: Path) -> dict:
    world = generate_world(world_spec_from(cfg))
    world.save(run / "world")
    return _write_summary(run, "gen_world", {
        "items": len(world.items),
        "queries": len(world.queries),
        "feature_dim": world.spec.feature_dim,
    })


def stage_train_base(cfg: dict, run: Path) -> dict:
    world = _load_world(run)
    enc = cfg["encoder"]
    init = init_params(
        query_input_dim=2 * world.spec.feature_dim,
        target_input_dim=world.spec.feature_dim,
        seed=int(cfg["seed"]) + SEED_OFFSET_INIT,
        hidden_dims=tuple(int(d) for d in enc["hidden_dims"]),
        embedding_dim=int(enc["embedding_dim"]),
    )
    params, log = train_base(init, world.queries,
                             train_config_from(cfg, "stage1"), world=world)
    snapshot_id = save_params(params, run / "snapshots" / "base.json")
    log.save(run / "logs" / "train_base.jsonl")
    final_loss = log.records[-1]["loss_total"] if log.records else None
    return _write_summary(run, "train_base", {
        "steps": len(log.records),
        "final_loss": final_loss,
        "snapshot_id": snapshot_id,
    })


def stage_mine(cfg: dict, run: Path) -> dict:
    world = _load_world(run)
    params = _load_snapshot(run, "base")
    gallery = embed_gallery(params, world)
    section = cfg["mining"]
    strategy = section.get("strategy", "self_guided")
    mining_cfg = mining_config_from(cfg)
    if strategy == "self_guided":
        report = mine(params, world.queries, gallery, mining_cfg, world=world)
    elif strategy == "random":
        rnd = section["random"]
        report = random_mine(
            params, world.queries, gallery,
            pool_k=int(rnd["pool_k"]), sample_n=int(rnd["sample_n"]),
            seed=int(cfg["seed"]) + SEED_OFFSET_RANDOM_MINE, world=world,
            exclude_reference=mining_cfg.exclude_reference_from_gallery)
        if rnd.get("match_budget", True):
            budget = mine(params, world.queries, gallery, mining_cfg,
                          world=world).mined_instance_count
            report = trim_to_budget(report, budget)
    else:
        raise ConfigError(f"unknown mining strategy {strategy!r}")
    report.save(run / "mining" / "report.jsonl")
    return _write_summary(run, "mine", {
        "strategy": strategy,
        "queries": len(report.records),
        "failures": report.failure_count,
        "mined_instances": report.mined_instance_count,
    })


def _make_oracle(cfg: dict, world: World, oracle_url: str | None):
    section = cfg["calibration"]
    kind = section.get("oracle", "mock")
    url = oracle_url or os.environ.get(ORACLE_URL_ENV) or section.get("oracle_url")
    if kind == "mock" and not url:
        return MockOracle(world, noise=float(section.get("mock_noise", 0.0)),
                          seed=int(cfg["seed"]))
    if kind == "remote" and not url:
        raise ConfigError("remote oracle requested but no url given "
                          f"(flag --oracle-url, env {ORACLE_URL_ENV}, "
                          "or calibration.oracle_url)")
    if url:
        return RemoteOracle(url)
    raise ConfigError(f"unknown oracle kind {kind!r}")


def stage_calibrate(cfg: dict, run: Path, oracle_url: str | None = None) -> dict:
    world = _load_world(run)
    mining_report = MiningReport.load(
        _require(run / "mining" / "report.jsonl", "run mine first"))
    section = cfg["calibration"]
    oracle = _make_oracle(cfg, world, oracle_url)
    result = run_calibration(
        oracle, world, world.queries, mining_report,
        threshold=float(section.get("vqa_threshold", 0.95)),
        max_workers=int(section.get("max_workers", 1)))
    save_correctives(run / "calibration" / "kept.jsonl", result.kept)
    save_correctives(run / "calibration" / "rejected.jsonl", result.rejected)
    return _write_summary(run, "calibrate", result.summary())


def stage_refine(cfg: dict, run: Path) -> dict:
    world = _load_world(run)
    base = _load_snapshot(run, "base")
    kept = load_correctives(_require(run / "calibration" / "kept.jsonl",
                                     "run calibrate first"))
    params, log = refine(base, world.queries, kept,
                         train_config_from(cfg, "stage4"), world=world)
    snapshot_id = save_params(params, run / "snapshots" / "refined.json")
    log.save(run / "logs" / "refine.jsonl")
    final_loss = log.records[-1]["loss_total"] if log.records else None
    return _write_summary(run, "refine", {
        "steps": len(log.records),
        "final_loss": final_loss,
        "correctives_used": len(kept),
        "snapshot_id": snapshot_id,
    })


def stage_evaluate(cfg: dict, run: Path, which: str = "base") -> dict:
    world = _load_world(run)
    params = _load_snapshot(run, which)
    metrics = evaluate_params(params, world, cfg["eval"])
    _write_json(run / "reports" / f"metrics_{which}.json", metrics.to_dict())
    return _write_summary(run, f"evaluate_{which}", metrics.to_dict())


def _fmt_metrics(name: str, metrics: MetricsReport) -> str:
    parts = [f"R@{k} {100 * v:.2f}" for k, v in sorted(metrics.recall_at.items())]
    parts += [f"R_subset@{k} {100 * v:.2f}"
              for k, v in sorted(metrics.recall_subset_at.items())]
    parts.append(f"Avg {100 * metrics.avg:.2f}")
    return f"[{name}] " + "  ".join(parts)


def stage_report(cfg: dict, run: Path) -> str:
    """Render metrics and the generated/kept filter line as text."""
    lines = ["== retrieval metrics =="]
    found = False
    for name in ("base", "refined"):
        path = run / "reports" / f"metrics_{name}.json"
        if path.exists():
            metrics = MetricsReport.from_dict(json.loads(path.read_text()))
            lines.append(_fmt_metrics(name, metrics))
            found = True
    if not found:
        raise MissingInputError("no metrics reports found; run evaluate first")
    calib_path = run / "summaries" / "calibrate.json"
    if calib_path.exists():
        summary = json.loads(calib_path.read_text())
        generated, kept = int(summary["generated"]), int(summary["kept"])
        lines.append("== calibration ==")
        lines.append(f"samples (generated -> kept): {generated:,} → {kept:,}")
    text = "\n".join(lines) + "\n"
    (run / "reports" / "report.txt").parent.mkdir(parents=True, exist_ok=True)
    (run / "reports" / "report.txt").write_text(text)
    return text


def run_pipeline(cfg: dict, run: Path,
                 oracle_url: str | None = None) -> dict:
    """All stages in order; returns the combined summary."""
    stage_gen_world(cfg, run)
    stage_train_base(cfg, run)
    stage_mine(cfg, run)
    calibration = stage_calibrate(cfg, run, oracle_url)
    stage_refine(cfg, run)
    base_metrics = stage_evaluate(cfg, run, "base")
    refined_metrics = stage_evaluate(cfg, run, "refined")
    stage_report(cfg, run)
    subset_key = "1"
    gain = (refined_metrics["recall_subset_at"].get(subset_key, 0.0)
            - base_metrics["recall_subset_at"].get(subset_key, 0.0))
    summary = {
        "base": base_metrics,
        "refined": refined_metrics,
        "calibration": calibration,
        "gain_recall_subset_at_1": gain,
    }
    return _write_summary(run, "pipeline", summary)
