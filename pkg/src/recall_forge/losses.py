"""Contrastive objectives with analytic gradients.

Two losses drive adaptation: a softmax contrastive term over in-batch
candidates (temperature tau) and a hinge margin term that pushes a
designated distractor below the positive target.  The combined objective
is averaged over queries.  Gradients are accumulated by hand in reverse
mode through both towers and validated against central finite
differences.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .encoder import EncoderParameters, LayerParams
from .errors import ArgumentError, DomainError, ShapeError
from .vectors import NORM_FLOOR, as_vector, cosine_similarity


@dataclass
class LossConfig:
    """Scalar knobs of the combined objective.

    lam weights the hinge term; lam == 0 reduces the objective to the
    softmax contrastive term alone, bit for bit.
    """

    temperature: float = 0.03
    margin: float = 0.05
    lam: float = 0.30

    def validate(self) -> None:
        if not self.temperature > 0:
            raise ArgumentError(f"temperature must be > 0, got {self.temperature}")
        if self.margin < 0:
            raise ArgumentError(f"margin must be >= 0, got {self.margin}")
        if self.lam < 0:
            raise ArgumentError(f"lambda weight must be >= 0, got {self.lam}")


@dataclass
class LossBatch:
    """Raw tower inputs for one optimization step.

    query_inputs is (B, query_dim); target_inputs is (M, target_dim) with
    M >= B so extra candidate rows can join the softmax denominator
    without owning a query.  positive_index[i] locates query i's target
    row; neg_indices[i] lists the rows serving as that query's hinge
    negatives (empty list = no hinge term for the query).
    """

    query_inputs: np.ndarray
    target_inputs: np.ndarray
    positive_index: np.ndarray
    neg_indices: list[list[int]] = field(default_factory=list)

    def validate(self) -> None:
        q, t = self.query_inputs, self.target_inputs
        if q.ndim != 2 or t.ndim != 2:
            raise ShapeError("batch inputs must be 2-D arrays")
        b, m = q.shape[0], t.shape[0]
        if b == 0:
            raise ArgumentError("batch has no queries")
        if m < b:
            raise ArgumentError(f"target rows ({m}) fewer than queries ({b})")
        pos = np.asarray(self.positive_index)
        if pos.shape != (b,):
            raise ShapeError(f"positive_index must have shape ({b},), got {pos.shape}")
        if np.any(pos < 0) or np.any(pos >= m):
            raise ArgumentError("positive_index out of range")
        if self.neg_indices and len(self.neg_indices) != b:
            raise ShapeError("neg_indices length must equal the query count")
        for negs in self.neg_indices:
            for j in negs:
                if not 0 <= j < m:
                    raise ArgumentError(f"negative index {j} out of range")


@dataclass
class Gradients:
    """Parameter-shaped gradient of the combined objective, plus losses."""

    query_tower: list[LayerParams]
    target_tower: list[LayerParams]
    loss_value: float
    loss_infonce: float
    loss_triplet: float


def info_nce(q, targets, positive_index: int, tau: float) -> float:
    """Softmax contrastive loss of one query against a candidate list.

    Returns -log(exp(s(q, t+)/tau) / sum_t exp(s(q, t)/tau)) where s is
    cosine similarity; computed with max subtraction so large 1/tau never
    overflows.  A single-candidate list scores exactly 0.

    Args:
        q: query vector.
        targets: non-empty list of candidate vectors.
        positive_index: position of the true target within targets.
        tau: softmax temperature, > 0.
    """
    if not targets:
        raise ArgumentError("targets must be non-empty")
    if not 0 <= positive_index < len(targets):
        raise ArgumentError(
            f"positive_index {positive_index} out of range for {len(targets)} targets")
    if not tau > 0:
        raise ArgumentError(f"tau must be > 0, got {tau}")
    qv = as_vector(q, "q")
    logits = np.array([cosine_similarity(qv, t) / tau for t in targets])
    peak = logits.max()
    lse = peak + np.log(np.sum(np.exp(logits - peak)))
    return float(lse - logits[positive_index])


def triplet_margin(q, t_pos, t_neg, m: float) -> float:
    """Hinge loss max(0, s(q, t-) - s(q, t+) + m) on cosine similarities."""
    if m < 0:
        raise ArgumentError(f"margin must be >= 0, got {m}")
    qv = as_vector(q, "q")
    s_pos = cosine_similarity(qv, t_pos)
    s_neg = cosine_similarity(qv, t_neg)
    return float(max(0.0, s_neg - s_pos + m))


def _forward(params: EncoderParameters, batch: LossBatch):
    """Run both towers and return activations, unit embeddings and scores."""
    qw = [l.weights for l in params.query_tower]
    qb = [l.bias for l in params.query_tower]
    tw = [l.weights for l in params.target_tower]
    tb = [l.bias for l in params.target_tower]
    x_q = np.ascontiguousarray(batch.query_inputs, dtype=np.float64)
    x_t = np.ascontiguousarray(batch.target_inputs, dtype=np.float64)
    acts_q = kernels.tower_forward(x_q, qw, qb)
    acts_t = kernels.tower_forward(x_t, tw, tb)
    q_hat, q_norms = kernels.normalize_rows(acts_q[-1])
    t_hat, t_norms = kernels.normalize_rows(acts_t[-1])
    if q_norms.min() < NORM_FLOOR or t_norms.min() < NORM_FLOOR:
        raise DomainError("embedding norm collapsed below the safe floor")
    scores = kernels.matmul_nt(q_hat, t_hat)
    return x_q, x_t, acts_q, acts_t, q_hat, q_norms, t_hat, t_norms, scores


def _score_losses(scores: np.ndarray, batch: LossBatch, cfg: LossConfig,
                  want_grad: bool):
    """Losses (and optionally dL/dscores) from the cosine score matrix."""
    b = scores.shape[0]
    pos = np.asarray(batch.positive_index, dtype=np.intp)
    logits = scores / cfg.temperature
    peak = logits.max(axis=1, keepdims=True)
    shifted = logits - peak
    sum_exp = np.exp(shifted).sum(axis=1, keepdims=True)
    lse = (peak + np.log(sum_exp)).ravel()
    per_query = lse - logits[np.arange(b), pos]
    loss_infonce = float(per_query.mean())

    neg_lists = batch.neg_indices or [[] for _ in range(b)]
    trip_sum = 0.0
    hinge_rows = []
    for i, negs in enumerate(neg_lists):
        if not negs:
            hinge_rows.append(())
            continue
        vals = tuple(scores[i, j] - scores[i, pos[i]] + cfg.margin for j in negs)
        trip_sum += sum(max(0.0, v) for v in vals) / len(negs)
        hinge_rows.append(vals)
    loss_triplet = trip_sum / b

    if cfg.lam == 0.0:
        loss_total = loss_infonce
    else:
        loss_total = loss_infonce + cfg.lam * loss_triplet

    if not want_grad:
        return loss_total, loss_infonce, loss_triplet, None

    d_scores = np.exp(shifted) / sum_exp
    d_scores[np.arange(b), pos] -= 1.0
    d_scores /= cfg.temperature * b
    if cfg.lam != 0.0:
        # Hinge subgradient is 0 at the kink (satisfied side).
        coef = cfg.lam / b
        for i, (negs, vals) in enumerate(zip(neg_lists, hinge_rows)):
            if not negs:
                continue
            unit = coef / len(negs)
            for j, v in zip(negs, vals):
                if v > 0.0:
                    d_scores[i, j] += unit
                    d_scores[i, pos[i]] -= unit
    return loss_total, loss_infonce, loss_triplet, d_scores


def batch_loss_value(params: EncoderParameters, batch: LossBatch,
                     cfg: LossConfig) -> float:
    """Forward-only value of the combined objective."""
    cfg.validate()
    batch.validate()
    scores = _forward(params, batch)[-1]
    return _score_losses(scores, batch, cfg, want_grad=False)[0]


def total_loss(params: EncoderParameters, batch: LossBatch,
               cfg: LossConfig) -> Gradients:
    """Combined objective and its analytic gradient.

    Loss is mean over queries of the softmax contrastive term plus lam
    times the per-query mean hinge term.  Queries with an empty negative
    list contribute zero to the hinge part.  The returned Gradients
    mirror the parameter layout exactly.
    """
    cfg.validate()
    batch.validate()
    (x_q, x_t, acts_q, acts_t,
     q_hat, q_norms, t_hat, t_norms, scores) = _forward(params, batch)
    loss_total, loss_infonce, loss_triplet, d_scores = _score_losses(
        scores, batch, cfg, want_grad=True)

    d_qhat = kernels.matmul_nn(d_scores, t_hat)
    d_that = kernels.matmul_tn(d_scores, q_hat)
    d_zq = kernels.normalize_rows_backward(q_hat, q_norms, d_qhat)
    d_zt = kernels.normalize_rows_backward(t_hat, t_norms, d_that)

    qw = [l.weights for l in params.query_tower]
    tw = [l.weights for l in params.target_tower]
    dqw, dqb = kernels.tower_backward(x_q, qw, acts_q, d_zq)
    dtw, dtb = kernels.tower_backward(x_t, tw, acts_t, d_zt)

    return Gradients(
        query_tower=[LayerParams(w, b) for w, b in zip(dqw, dqb)],
        target_tower=[LayerParams(w, b) for w, b in zip(dtw, dtb)],
        loss_value=loss_total,
        loss_infonce=loss_infonce,
        loss_triplet=loss_triplet,
    )


def finite_difference_check(params: EncoderParameters, batch: LossBatch,
                            cfg: LossConfig, step: float = 1e-5) -> float:
    """Worst relative error between analytic and central-difference grads.

    Every parameter entry is perturbed by +-step; the numeric slope
    (L+ - L-)/(2 step) is compared to the analytic entry with denominator
    max(|analytic|, |numeric|, 1e-8).
    """
    if not step > 0:
        raise ArgumentError(f"step must be > 0, got {step}")
    grads = total_loss(params, batch, cfg)
    work = params.copy()
    worst = 0.0
    towers = (
        (work.query_tower, grads.query_tower),
        (work.target_tower, grads.target_tower),
    )
    for tower, tower_grads in towers:
        for layer, g_layer in zip(tower, tower_grads):
            pairs = ((layer.weights, g_layer.weights), (layer.bias, g_layer.bias))
            for arr, g_arr in pairs:
                for idx in np.ndindex(arr.shape):
                    saved = arr[idx]
                    arr[idx] = saved + step
                    up = batch_loss_value(work, batch, cfg)
                    arr[idx] = saved - step
                    down = batch_loss_value(work, batch, cfg)
                    arr[idx] = saved
                    numeric = (up - down) / (2.0 * step)
                    analytic = g_arr[idx]
                    denom = max(abs(analytic), abs(numeric), 1e-8)
                    worst = max(worst, abs(analytic - numeric) / denom)
    return worst
