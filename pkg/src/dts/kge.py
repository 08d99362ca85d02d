"""DistMult knowledge-graph embeddings for attribute-derived item vectors.

The scoring function is the trilinear form score(h, r, t) = sum_k h_k r_k t_k,
trained with a logsigmoid negative-sampling loss: for a positive triple
with N sampled corruptions,

    L = -log sig(s+) - (1/N) sum_n log sig(-s-_n) + reg

where reg is the regularization coefficient times the squared L2 norm of
every embedding touched by the sample (negatives counted with
multiplicity). Each negative corrupts the head with probability 0.5,
otherwise the tail, drawing the replacement entity uniformly; collisions
with true triples are not filtered during training (filtering applies only
to MRR evaluation). Embeddings are initialized uniformly in
(-gamma/dim, +gamma/dim).

Updates are Adagrad at the configured learning rate, matching the sparse
embedding-trainer convention this follows: relation rows absorb gradient
contributions from every triple in a batch while entity rows are touched
sparsely, and per-coordinate scaling is what keeps one learning rate
stable for both (plain SGD at the same rate diverges through the relation
rows).

Gradients are derived by hand and kept in closed form so finite-difference
checks can hold them to tight tolerances; see tests for the oracle.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError
from .numerics import log_sigmoid, sigmoid
from .triples import RELATIONS, Triple, entity_vocab


@dataclass
class KgeConfig:
    dim: int = 128
    batch_size: int = 1000
    neg_sample_size: int = 200
    regularization_coef: float = 1e-9
    gamma: float = 19.9
    learning_rate: float = 0.25
    epochs: int = 120
    seed: int = 0

    def validate(self) -> None:
        if self.dim <= 0:
            raise ConfigError("kge.dim must be positive")
        if self.batch_size <= 0 or self.neg_sample_size <= 0:
            raise ConfigError("kge batch/negative sizes must be positive")
        if self.learning_rate < 0:
            raise ConfigError("kge.learning_rate must be non-negative")
        if self.epochs < 0:
            raise ConfigError("kge.epochs must be non-negative")


@dataclass
class KgeModel:
    entity_ids: tuple[str, ...]
    relation_names: tuple[str, ...]
    entity_embeddings: np.ndarray   # (E, dim) float64
    relation_embeddings: np.ndarray  # (R, dim) float64
    entity_index: dict[str, int] = field(repr=False, default_factory=dict)
    relation_index: dict[str, int] = field(repr=False, default_factory=dict)
    # Adagrad accumulators; rows stay zero until first touched
    entity_grad_sq: np.ndarray | None = field(repr=False, default=None)
    relation_grad_sq: np.ndarray | None = field(repr=False, default=None)

    def __post_init__(self):
        if not self.entity_index:
            self.entity_index = {e: i for i, e in enumerate(self.entity_ids)}
        if not self.relation_index:
            self.relation_index = {r: i for i, r in enumerate(self.relation_names)}
        if self.entity_grad_sq is None:
            self.entity_grad_sq = np.zeros_like(self.entity_embeddings)
        if self.relation_grad_sq is None:
            self.relation_grad_sq = np.zeros_like(self.relation_embeddings)

    def item_matrix(self, item_ids) -> tuple[np.ndarray, list[str]]:
        """Rows for the given item entities, in sorted id order."""
        ids = sorted(item_ids)
        missing = [i for i in ids if i not in self.entity_index]
        if missing:
            raise DataError(f"entities without embeddings: {missing[:5]!r}")
        rows = np.array([self.entity_index[i] for i in ids], dtype=np.int64)
        return self.entity_embeddings[rows].copy(), ids


def distmult_score(h_vec: np.ndarray, r_vec: np.ndarray, t_vec: np.ndarray) -> float:
    """Trilinear score sum_k h_k r_k t_k."""
    h_vec = np.asarray(h_vec, dtype=np.float64)
    r_vec = np.asarray(r_vec, dtype=np.float64)
    t_vec = np.asarray(t_vec, dtype=np.float64)
    if not (h_vec.shape == r_vec.shape == t_vec.shape) or h_vec.ndim != 1:
        raise DataError(
            f"dimension mismatch: {h_vec.shape} vs {r_vec.shape} vs {t_vec.shape}")
    return float(np.sum(h_vec * r_vec * t_vec))


def encode_triples(triples, entity_index, relation_index) -> np.ndarray:
    """(B, 3) int64 array of (head, relation, tail) indices."""
    out = np.empty((len(triples), 3), dtype=np.int64)
    for k, (h, r, t) in enumerate(triples):
        out[k, 0] = entity_index[h]
        out[k, 1] = relation_index[r]
        out[k, 2] = entity_index[t]
    return out


def negative_sampling_loss(entity_emb: np.ndarray, relation_emb: np.ndarray,
                           batch: np.ndarray, neg_ids: np.ndarray,
                           corrupt_head: np.ndarray, reg_coef: float,
                           ) -> tuple[float, np.ndarray, np.ndarray]:
    """Summed loss over a batch with fixed negatives, plus dense gradients.

    `neg_ids` is (B, N) entity indices and `corrupt_head` a same-shaped
    boolean mask choosing which slot each negative replaces. Returns
    (loss_sum, d_entity, d_relation); gradients are of the batch sum, so
    each embedding row moves per occurrence regardless of batch size
    (sparse-update semantics, as embedding trainers conventionally do).
    """
    B, N = neg_ids.shape
    h = entity_emb[batch[:, 0]]
    r = relation_emb[batch[:, 1]]
    t = entity_emb[batch[:, 2]]
    en = entity_emb[neg_ids]                       # (B, N, dim)

    hr = h * r
    rt = r * t
    pos = np.einsum("bd,bd->b", hr, t)
    neg = np.where(corrupt_head,
                   np.einsum("bnd,bd->bn", en, rt),
                   np.einsum("bnd,bd->bn", en, hr))

    loss = -log_sigmoid(pos) - log_sigmoid(-neg).sum(axis=1) / N
    reg = (np.einsum("bd,bd->b", h, h) + np.einsum("bd,bd->b", r, r)
           + np.einsum("bd,bd->b", t, t) + np.einsum("bnd,bnd->b", en, en))
    loss_sum = float(loss.sum() + reg_coef * reg.sum())

    g_pos = sigmoid(pos) - 1.0                     # (B,)
    g_neg = sigmoid(neg) / N                       # (B, N)
    g_tail = np.where(corrupt_head, 0.0, g_neg)
    g_head = np.where(corrupt_head, g_neg, 0.0)

    sum_t = np.einsum("bn,bnd->bd", g_tail, en)    # sum of weighted corrupt tails
    sum_h = np.einsum("bn,bnd->bd", g_head, en)
    two_reg = 2.0 * reg_coef

    dh = g_pos[:, None] * rt + r * sum_t + two_reg * h
    dr = g_pos[:, None] * (h * t) + h * sum_t + t * sum_h + two_reg * r
    dt = g_pos[:, None] * hr + r * sum_h + two_reg * t
    den = (g_tail[:, :, None] * hr[:, None, :] + g_head[:, :, None] * rt[:, None, :]
           + two_reg * en)

    d_entity = np.zeros_like(entity_emb)
    d_relation = np.zeros_like(relation_emb)
    np.add.at(d_entity, batch[:, 0], dh)
    np.add.at(d_entity, batch[:, 2], dt)
    np.add.at(d_entity, neg_ids.reshape(-1), den.reshape(B * N, -1))
    np.add.at(d_relation, batch[:, 1], dr)
    return loss_sum, d_entity, d_relation


_ADAGRAD_EPS = 1e-10


def kge_step(batch: np.ndarray, model: KgeModel, config: KgeConfig,
             rng: np.random.Generator) -> float:
    """One Adagrad step on an encoded batch; returns the batch mean loss."""
    if len(batch) == 0:
        raise DataError("kge_step requires a non-empty batch")
    B = len(batch)
    neg_ids = rng.integers(0, len(model.entity_ids), size=(B, config.neg_sample_size))
    corrupt_head = rng.random((B, config.neg_sample_size)) < 0.5
    loss_sum, d_entity, d_relation = negative_sampling_loss(
        model.entity_embeddings, model.relation_embeddings,
        batch, neg_ids, corrupt_head, config.regularization_coef)
    model.entity_grad_sq += d_entity * d_entity
    model.relation_grad_sq += d_relation * d_relation
    model.entity_embeddings -= config.learning_rate * d_entity / (
        np.sqrt(model.entity_grad_sq) + _ADAGRAD_EPS)
    model.relation_embeddings -= config.learning_rate * d_relation / (
        np.sqrt(model.relation_grad_sq) + _ADAGRAD_EPS)
    if not (np.isfinite(model.entity_embeddings).all()
            and np.isfinite(model.relation_embeddings).all()):
        raise DataError("non-finite embedding after kge step")
    return loss_sum / B


def train_kge(triples, config: KgeConfig) -> KgeModel:
    """Train DistMult embeddings; deterministic for a fixed seed.

    Entities get contiguous ids in sorted order, relations keep the
    canonical relation order restricted to those present.
    """
    config.validate()
    if len(triples) == 0:
        raise DataError("cannot train on an empty triple list")
    vocab = entity_vocab(triples)
    relations = tuple(r for r in RELATIONS if any(t.relation == r for t in triples))
    relation_index = {r: i for i, r in enumerate(relations)}
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, 0xD157]))

    bound = config.gamma / config.dim
    entity_emb = rng.uniform(-bound, bound, size=(len(vocab), config.dim))
    relation_emb = rng.uniform(-bound, bound, size=(len(relations), config.dim))
    model = KgeModel(entity_ids=tuple(sorted(vocab)), relation_names=relations,
                     entity_embeddings=entity_emb, relation_embeddings=relation_emb)

    encoded = encode_triples(triples, model.entity_index, model.relation_index)
    for _ in range(config.epochs):
        order = rng.permutation(len(encoded))
        for start in range(0, len(encoded), config.batch_size):
            batch = encoded[order[start:start + config.batch_size]]
            kge_step(batch, model, config, rng)
    return model


def score_all_tails(model: KgeModel, head: str, relation: str) -> np.ndarray:
    """Scores of (head, relation, t) for every entity t, vectorized."""
    hr = (model.entity_embeddings[model.entity_index[head]]
          * model.relation_embeddings[model.relation_index[relation]])
    return model.entity_embeddings @ hr


def filtered_mrr(model: KgeModel, eval_triples, known_triples) -> float:
    """Filtered mean reciprocal rank over tail prediction.

    For each evaluation triple every other known-true tail is removed from
    the candidate set before ranking. Ties receive the mean rank of their
    tie group.
    """
    known: set[Triple] = {Triple(*t) for t in known_triples}
    eval_triples = list(eval_triples)
    total = 0.0
    for h, r, t in eval_triples:
        scores = score_all_tails(model, h, r)
        true_score = scores[model.entity_index[t]]
        allowed = np.ones(len(scores), dtype=bool)
        for cand_id, cand_idx in model.entity_index.items():
            if cand_id != t and Triple(h, r, cand_id) in known:
                allowed[cand_idx] = False
        greater = int(np.sum(allowed & (scores > true_score)))
        ties = int(np.sum(allowed & (scores == true_score))) - 1
        rank = greater + 1 + ties / 2.0
        total += 1.0 / rank
    return total / len(eval_triples) if eval_triples else 0.0
