"""Loss values against a scalar re-implementation, gradients against FD.

The oracle below recomputes the combined objective with plain Python
floats and math functions, sharing no code with the package beyond the
parameter containers.
"""

import math

import numpy as np
import pytest

from recall_forge.encoder import EncoderParameters, LayerParams, init_params
from recall_forge.errors import ArgumentError, DomainError
from recall_forge.losses import (Gradients, LossBatch, LossConfig,
                                 batch_loss_value, finite_difference_check,
                                 info_nce, total_loss, triplet_margin)


def scalar_tower(x_row, layers):
    h = [float(v) for v in x_row]
    for li, layer in enumerate(layers):
        out = []
        for r in range(layer.weights.shape[0]):
            s = float(layer.bias[r])
            for c, hv in enumerate(h):
                s += float(layer.weights[r, c]) * hv
            out.append(math.tanh(s) if li < len(layers) - 1 else s)
        h = out
    return h


def scalar_cosine(u, v):
    dot = sum(a * b for a, b in zip(u, v))
    nu = math.sqrt(sum(a * a for a in u))
    nv = math.sqrt(sum(b * b for b in v))
    return dot / (nu * nv)


def scalar_objective(params, batch, cfg):
    """Independent recompute of (total, infonce, triplet)."""
    qs = [scalar_tower(row, params.query_tower) for row in batch.query_inputs]
    ts = [scalar_tower(row, params.target_tower) for row in batch.target_inputs]
    b = len(qs)
    neg_lists = batch.neg_indices or [[] for _ in range(b)]
    infonce = 0.0
    trip = 0.0
    for i in range(b):
        logits = [scalar_cosine(qs[i], t) / cfg.temperature for t in ts]
        peak = max(logits)
        lse = peak + math.log(sum(math.exp(l - peak) for l in logits))
        infonce += lse - logits[int(batch.positive_index[i])]
        if neg_lists[i]:
            s_pos = scalar_cosine(qs[i], ts[int(batch.positive_index[i])])
            hinge = sum(max(0.0, scalar_cosine(qs[i], ts[j]) - s_pos + cfg.margin)
                        for j in neg_lists[i])
            trip += hinge / len(neg_lists[i])
    infonce /= b
    trip /= b
    total = infonce if cfg.lam == 0.0 else infonce + cfg.lam * trip
    return total, infonce, trip


def random_instance(rng, force_negs=False):
    """A healthy-scale random (params, batch, cfg) triple, dims <= 32."""
    q_dim = int(rng.integers(3, 12))
    t_dim = int(rng.integers(3, 12))
    emb = int(rng.integers(3, 9))
    hidden = (int(rng.integers(4, 16)),) if rng.random() < 0.8 else ()
    params = init_params(q_dim, t_dim, seed=int(rng.integers(1 << 30)),
                         hidden_dims=hidden, embedding_dim=emb)
    # Healthy weight scales: tiny-output init makes FD slopes all round-off.
    for layer in params.query_tower + params.target_tower:
        layer.weights[...] = rng.normal(0.0, 0.5, size=layer.weights.shape)
        layer.bias[...] = rng.normal(0.0, 0.1, size=layer.bias.shape)
    b = int(rng.integers(2, 9))
    m = b + int(rng.integers(0, 4))
    neg_indices = []
    for i in range(b):
        others = [j for j in range(m) if j != i]
        n = int(rng.integers(1 if force_negs else 0, min(3, len(others)) + 1))
        neg_indices.append(list(rng.choice(others, size=n, replace=False)))
    batch = LossBatch(query_inputs=rng.normal(size=(b, q_dim)),
                      target_inputs=rng.normal(size=(m, t_dim)),
                      positive_index=np.arange(b),
                      neg_indices=neg_indices)
    cfg = LossConfig(temperature=float(rng.uniform(0.05, 0.5)),
                     margin=float(rng.uniform(0.05, 0.2)),
                     lam=float(rng.choice([0.0, 0.3, 1.0])))
    return params, batch, cfg


def nudge_margin_off_kinks(params, batch, cfg):
    """Keep every hinge argument away from 0 so FD slopes are two-sided."""
    qs = [scalar_tower(r, params.query_tower) for r in batch.query_inputs]
    ts = [scalar_tower(r, params.target_tower) for r in batch.target_inputs]
    for _ in range(50):
        bumped = False
        for i, negs in enumerate(batch.neg_indices):
            s_pos = scalar_cosine(qs[i], ts[int(batch.positive_index[i])])
            for j in negs:
                v = scalar_cosine(qs[i], ts[j]) - s_pos + cfg.margin
                if abs(v) < 1e-3:
                    cfg.margin += 2.5e-3
                    bumped = True
                    break
            if bumped:
                break
        if not bumped:
            break
    return cfg


class TestInfoNCE:
    def test_uniform_batch_of_four_equals_ln4(self):
        q = np.array([1.0, 0.0, 0.0, 0.0, 0.0])
        targets = [np.eye(5)[k] for k in range(1, 5)]
        loss = info_nce(q, targets, positive_index=0, tau=0.07)
        assert abs(loss - math.log(4.0)) < 1e-9

    def test_single_candidate_is_zero(self, rng):
        q = rng.normal(size=6)
        assert info_nce(q, [rng.normal(size=6)], 0, tau=0.1) == 0.0

    def test_matches_scalar_formula(self, rng):
        q = rng.normal(size=8)
        targets = [rng.normal(size=8) for _ in range(5)]
        tau = 0.09
        sims = [scalar_cosine(q, t) for t in targets]
        exps = [math.exp(s / tau) for s in sims]
        want = -math.log(exps[2] / sum(exps))
        assert info_nce(q, targets, 2, tau) == pytest.approx(want, rel=1e-10)

    def test_extreme_temperature_does_not_overflow(self, rng):
        q = rng.normal(size=4)
        targets = [rng.normal(size=4) for _ in range(3)]
        loss = info_nce(q, targets, 0, tau=1e-6)
        assert math.isfinite(loss)

    def test_argument_errors(self, rng):
        q = rng.normal(size=4)
        with pytest.raises(ArgumentError):
            info_nce(q, [], 0, 0.1)
        with pytest.raises(ArgumentError):
            info_nce(q, [q], 1, 0.1)
        with pytest.raises(ArgumentError):
            info_nce(q, [q], 0, 0.0)


class TestTripletMargin:
    def test_known_value_015(self):
        # cos(q, pos) = 0.7, cos(q, neg) = 0.8, margin 0.05.
        q = np.array([1.0, 0.0])
        t_pos = np.array([0.7, math.sqrt(1 - 0.7 ** 2)])
        t_neg = np.array([0.8, math.sqrt(1 - 0.8 ** 2)])
        val = triplet_margin(q, t_pos, t_neg, m=0.05)
        assert abs(val - 0.15) < 1e-12

    def test_tie_scores_zero_at_zero_margin(self, rng):
        q = rng.normal(size=5)
        t = rng.normal(size=5)
        assert triplet_margin(q, t, t.copy(), m=0.0) == 0.0

    def test_satisfied_margin_clamps_to_zero(self):
        q = np.array([1.0, 0.0])
        assert triplet_margin(q, q, np.array([0.0, 1.0]), m=0.5) == 0.0

    def test_negative_margin_rejected(self, rng):
        q = rng.normal(size=3)
        with pytest.raises(ArgumentError):
            triplet_margin(q, q, q, m=-0.1)


class TestBatchValidation:
    def test_fewer_targets_than_queries(self, rng):
        batch = LossBatch(rng.normal(size=(3, 4)), rng.normal(size=(2, 4)),
                          np.arange(3))
        with pytest.raises(ArgumentError):
            batch.validate()

    def test_positive_index_out_of_range(self, rng):
        batch = LossBatch(rng.normal(size=(2, 4)), rng.normal(size=(2, 4)),
                          np.array([0, 2]))
        with pytest.raises(ArgumentError):
            batch.validate()

    def test_neg_index_out_of_range(self, rng):
        batch = LossBatch(rng.normal(size=(2, 4)), rng.normal(size=(3, 4)),
                          np.arange(2), neg_indices=[[1], [3]])
        with pytest.raises(ArgumentError):
            batch.validate()

    def test_collapsed_embedding_rejected(self):
        params = init_params(4, 4, seed=0, hidden_dims=(), embedding_dim=3)
        for layer in params.query_tower:
            layer.weights[...] = 0.0
        batch = LossBatch(np.ones((2, 4)), np.ones((2, 4)), np.arange(2))
        with pytest.raises(DomainError):
            batch_loss_value(params, batch, LossConfig())


class TestCombinedObjective:
    def test_value_matches_scalar_oracle(self, rng):
        for _ in range(8):
            params, batch, cfg = random_instance(rng)
            want_total, want_nce, want_trip = scalar_objective(params, batch, cfg)
            grads = total_loss(params, batch, cfg)
            assert grads.loss_value == pytest.approx(want_total, rel=1e-9)
            assert grads.loss_infonce == pytest.approx(want_nce, rel=1e-9)
            assert grads.loss_triplet == pytest.approx(want_trip, rel=1e-9,
                                                       abs=1e-12)
            assert batch_loss_value(params, batch, cfg) == grads.loss_value

    def test_triplet_reported_unweighted(self, rng):
        params, batch, _ = random_instance(rng, force_negs=True)
        cfg_a = LossConfig(temperature=0.1, margin=0.2, lam=0.3)
        cfg_b = LossConfig(temperature=0.1, margin=0.2, lam=0.9)
        a = total_loss(params, batch, cfg_a)
        b = total_loss(params, batch, cfg_b)
        assert a.loss_triplet == b.loss_triplet
        assert b.loss_value == pytest.approx(
            b.loss_infonce + 0.9 * b.loss_triplet, rel=1e-12)

    def test_lambda_zero_skips_the_add_bitwise(self, rng):
        params, batch, _ = random_instance(rng, force_negs=True)
        cfg = LossConfig(temperature=0.08, margin=0.1, lam=0.0)
        grads = total_loss(params, batch, cfg)
        assert grads.loss_value == grads.loss_infonce

    def test_lambda_zero_gradients_ignore_negatives(self, rng):
        # With lam == 0 the negative lists must not touch the gradient.
        params, batch, _ = random_instance(rng, force_negs=True)
        bare = LossBatch(batch.query_inputs, batch.target_inputs,
                         batch.positive_index, neg_indices=[])
        cfg = LossConfig(temperature=0.08, margin=0.1, lam=0.0)
        with_negs = total_loss(params, batch, cfg)
        without = total_loss(params, bare, cfg)
        for a, b in zip(with_negs.query_tower + with_negs.target_tower,
                        without.query_tower + without.target_tower):
            np.testing.assert_array_equal(a.weights, b.weights)
            np.testing.assert_array_equal(a.bias, b.bias)

    def test_hinge_kink_contributes_nothing(self, rng):
        # Negative row duplicates the positive row: hinge value is exactly
        # 0 at margin 0, and the subgradient convention drops it.
        params = init_params(5, 4, seed=2, hidden_dims=(6,), embedding_dim=4)
        for layer in params.query_tower + params.target_tower:
            layer.weights[...] = rng.normal(0, 0.5, size=layer.weights.shape)
        t = rng.normal(size=(3, 4))
        targets = np.vstack([t, t[1][None, :]])  # row 3 == row 1
        batch = LossBatch(rng.normal(size=(3, 5)), targets, np.arange(3),
                          neg_indices=[[], [3], []])
        active = total_loss(params, batch, LossConfig(0.1, 0.0, 0.7))
        inert = total_loss(params, batch, LossConfig(0.1, 0.0, 0.0))
        assert active.loss_triplet == 0.0
        assert active.loss_value == inert.loss_value
        for a, b in zip(active.query_tower + active.target_tower,
                        inert.query_tower + inert.target_tower):
            np.testing.assert_array_equal(a.weights, b.weights)

    def test_gradient_shapes_mirror_parameters(self, rng):
        params, batch, cfg = random_instance(rng)
        grads = total_loss(params, batch, cfg)
        assert isinstance(grads, Gradients)
        for g, p in zip(grads.query_tower + grads.target_tower,
                        params.query_tower + params.target_tower):
            assert g.weights.shape == p.weights.shape
            assert g.bias.shape == p.bias.shape


class TestFiniteDifference:
    def test_random_instances_pass(self, rng):
        for _ in range(5):
            params, batch, cfg = random_instance(rng)
            cfg = nudge_margin_off_kinks(params, batch, cfg)
            worst = finite_difference_check(params, batch, cfg, step=1e-5)
            assert worst < 1e-4

    def test_bad_step_rejected(self, rng):
        params, batch, cfg = random_instance(rng)
        with pytest.raises(ArgumentError):
            finite_difference_check(params, batch, cfg, step=0.0)


class TestLossConfig:
    def test_validation(self):
        with pytest.raises(ArgumentError):
            LossConfig(temperature=0.0).validate()
        with pytest.raises(ArgumentError):
            LossConfig(margin=-0.01).validate()
        with pytest.raises(ArgumentError):
            LossConfig(lam=-0.5).validate()
        LossConfig().validate()
