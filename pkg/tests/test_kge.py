import numpy as np
import pytest

from conftest import finite_difference, relative_error
from dts.errors import DataError
from dts.kge import (KgeConfig, KgeModel, distmult_score, encode_triples,
                     filtered_mrr, kge_step, negative_sampling_loss,
                     score_all_tails, train_kge)
from dts.triples import Triple


class TestDistmultScore:
    def test_hand_value(self):
        assert distmult_score([1, 2], [3, 1], [1, 1]) == 5.0

    def test_zero_relation_scores_zero(self, rng):
        h = rng.standard_normal(8)
        t = rng.standard_normal(8)
        assert distmult_score(h, np.zeros(8), t) == 0.0

    def test_head_tail_symmetry(self, rng):
        for _ in range(50):
            h, r, t = rng.standard_normal((3, 6))
            assert distmult_score(h, r, t) == pytest.approx(
                distmult_score(t, r, h), abs=1e-12)

    def test_dimension_mismatch_raises(self):
        with pytest.raises(DataError, match="dimension"):
            distmult_score([1, 2], [1, 2, 3], [1, 2])


class TestGradients:
    def test_matches_finite_differences(self, rng):
        E = rng.standard_normal((9, 6))
        R = rng.standard_normal((3, 6))
        batch = np.array([[0, 1, 2], [3, 0, 4], [5, 2, 1], [8, 1, 0]])
        neg_ids = rng.integers(0, 9, size=(4, 5))
        corrupt = rng.random((4, 5)) < 0.5
        reg = 1e-3

        def loss():
            value, _, _ = negative_sampling_loss(E, R, batch, neg_ids, corrupt, reg)
            return value

        _, d_entity, d_relation = negative_sampling_loss(E, R, batch, neg_ids,
                                                         corrupt, reg)
        assert relative_error(d_entity, finite_difference(loss, E)) <= 1e-4
        assert relative_error(d_relation, finite_difference(loss, R)) <= 1e-4

    def test_gradients_per_corruption_mode(self, rng):
        # all-tail and all-head corruption exercised separately
        E = rng.standard_normal((7, 4))
        R = rng.standard_normal((2, 4))
        batch = np.array([[0, 0, 1], [2, 1, 3]])
        neg_ids = rng.integers(0, 7, size=(2, 3))
        for mode in (False, True):
            corrupt = np.full((2, 3), mode)

            def loss():
                value, _, _ = negative_sampling_loss(E, R, batch, neg_ids,
                                                     corrupt, 0.0)
                return value

            _, dE, dR = negative_sampling_loss(E, R, batch, neg_ids, corrupt, 0.0)
            assert relative_error(dE, finite_difference(loss, E)) <= 1e-4
            assert relative_error(dR, finite_difference(loss, R)) <= 1e-4


def small_model(rng, entities=6, relations=2, dim=4):
    ids = tuple(f"e{i}" for i in range(entities))
    names = ("product_type", "similarity")[:relations]
    return KgeModel(ids, names,
                    rng.standard_normal((entities, dim)) * 0.3,
                    rng.standard_normal((relations, dim)) * 0.3)


class TestKgeStep:
    def test_zero_learning_rate_is_a_no_op(self, rng):
        model = small_model(rng)
        cfg = KgeConfig(dim=4, learning_rate=0.0, neg_sample_size=3, batch_size=2)
        batch = np.array([[0, 0, 1], [2, 1, 3]])
        before_e = model.entity_embeddings.copy()
        before_r = model.relation_embeddings.copy()
        step_rng = np.random.default_rng(0)
        loss1 = kge_step(batch, model, cfg, step_rng)
        assert np.array_equal(model.entity_embeddings, before_e)
        assert np.array_equal(model.relation_embeddings, before_r)
        loss2 = kge_step(batch, model, cfg, np.random.default_rng(0))
        assert loss1 == loss2

    def test_empty_batch_rejected(self, rng):
        model = small_model(rng)
        with pytest.raises(DataError, match="non-empty"):
            kge_step(np.empty((0, 3), dtype=np.int64), model,
                     KgeConfig(dim=4), np.random.default_rng(0))

    def test_loss_decreases_on_synthetic_kg(self, two_group_kg):
        cfg = KgeConfig(dim=16, epochs=0, batch_size=64, neg_sample_size=16,
                        seed=11)
        model = train_kge(two_group_kg, cfg)
        enc = encode_triples(two_group_kg, model.entity_index, model.relation_index)
        rng = np.random.default_rng(3)
        epoch_losses = []
        for _ in range(10):
            losses = []
            order = rng.permutation(len(enc))
            for s in range(0, len(enc), cfg.batch_size):
                losses.append(kge_step(enc[order[s:s + cfg.batch_size]],
                                       model, cfg, rng))
            epoch_losses.append(np.mean(losses))
        assert all(a > b for a, b in zip(epoch_losses, epoch_losses[1:]))

    def test_embeddings_stay_finite(self, two_group_kg):
        model = train_kge(two_group_kg, KgeConfig(dim=16, epochs=30,
                                                  batch_size=64,
                                                  neg_sample_size=16, seed=1))
        assert np.isfinite(model.entity_embeddings).all()
        assert np.isfinite(model.relation_embeddings).all()


class TestTrainKge:
    def test_same_seed_bitwise_identical(self, two_group_kg):
        cfg = KgeConfig(dim=8, epochs=5, batch_size=64, neg_sample_size=8, seed=7)
        m1 = train_kge(two_group_kg, cfg)
        m2 = train_kge(two_group_kg, cfg)
        assert np.array_equal(m1.entity_embeddings, m2.entity_embeddings)
        assert np.array_equal(m1.relation_embeddings, m2.relation_embeddings)

    def test_zero_epochs_keeps_initialization(self, two_group_kg):
        cfg = KgeConfig(dim=8, epochs=0, seed=7)
        model = train_kge(two_group_kg, cfg)
        bound = cfg.gamma / cfg.dim
        assert np.abs(model.entity_embeddings).max() <= bound

    def test_empty_triples_rejected(self):
        with pytest.raises(DataError, match="empty"):
            train_kge([], KgeConfig(dim=4))

    def test_item_matrix_missing_entity(self, two_group_kg):
        model = train_kge(two_group_kg, KgeConfig(dim=8, epochs=0, seed=0))
        with pytest.raises(DataError, match="ghost"):
            model.item_matrix(["ghost"])

    def test_held_out_mrr_on_two_groups(self, two_group_kg):
        rng = np.random.default_rng(5)
        similarity = [t for t in two_group_kg if t.relation == "similarity"]
        held_idx = set(rng.choice(len(similarity), size=10, replace=False).tolist())
        held = [t for i, t in enumerate(similarity) if i in held_idx]
        train = [t for t in two_group_kg if t not in set(held)]
        model = train_kge(train, KgeConfig(dim=16, epochs=60, batch_size=64,
                                           neg_sample_size=16, seed=2))
        mrr = filtered_mrr(model, held, two_group_kg)
        assert mrr >= 0.8

    def test_rank_matches_exhaustive_oracle(self, two_group_kg, rng):
        model = train_kge(two_group_kg, KgeConfig(dim=8, epochs=10,
                                                  batch_size=64,
                                                  neg_sample_size=8, seed=4))
        known = set(two_group_kg)
        for triple in [two_group_kg[i] for i in rng.choice(len(two_group_kg), 20)]:
            h, r, t = triple
            fast = score_all_tails(model, h, r)
            h_vec = model.entity_embeddings[model.entity_index[h]]
            r_vec = model.relation_embeddings[model.relation_index[r]]
            # oracle: score every candidate tail one at a time
            slow = np.array([
                distmult_score(h_vec, r_vec, model.entity_embeddings[i])
                for i in range(len(model.entity_ids))])
            assert np.allclose(fast, slow, rtol=0, atol=1e-12)
            allowed = np.array([
                cand == t or Triple(h, r, cand) not in known
                for cand in model.entity_ids])
            t_idx = model.entity_index[t]
            oracle_rank = (1 + int(np.sum(allowed & (slow > slow[t_idx])))
                           + (int(np.sum(allowed & (slow == slow[t_idx]))) - 1) / 2)
            fast_mrr = filtered_mrr(model, [triple], known)
            assert fast_mrr == pytest.approx(1.0 / oracle_rank, abs=1e-12)
