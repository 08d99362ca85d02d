"""Multiplex graph embeddings with per-edge-type attention (GATNE-I style).

Every node i gets one overall embedding per edge type r:

    v_{i,r} = h(x_i) + alpha * M_r^T U_i a_{i,r} + beta * D^T x_i

where x_i is the frozen attribute-derived base embedding, h a configurable
MLP (single affine map by default), U_i the s-by-m matrix of per-edge-type
edge embeddings, and a_{i,r} = softmax(w_r^T tanh(W_r U_i)) the attention
over edge types. Edge embeddings are mean-aggregated from sampled
neighbors over K levels,

    u^(k) = act(W_hat^(k) . mean of neighbor u^(k-1)),  u^(0)_j = g_r(x_j),

with a node's own u^(0) standing in when it has no neighbors of type r.
Training follows the skip-gram objective over random-walk co-occurrence
pairs with unigram^0.75 negative sampling and Adam. All gradients are
hand-derived; a finite-difference oracle in the test suite pins them.

Parameter names used throughout (difference from the math above is only
notation): edge_proj = g_r, agg_w = W_hat, attn_vec = w_r, attn_mat = W_r,
edge_out = M_r, base_out = D, shared_* = h, context = skip-gram output
vectors.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import ConfigError, DataError
from .graph import EDGE_TYPES, MultiplexGraph
from .numerics import (log_sigmoid, log_sigmoid_scalar, sigmoid,
                       sigmoid_scalar, softmax)
from .walks import (TrainingPair, Walk, generate_walks, pairs_from_walks,
                    sample_noise, unigram_noise_cdf)

_INIT_TAG = 0x6A7E
_TRAIN_TAG = 0x7223
_SHUFFLE_TAG = 0x5F1E


@dataclass
class GatneConfig:
    dim: int = 128                       # overall embedding size d
    base_dim: int = 128                  # base embedding size d_b
    edge_dim: int = 10                   # edge embedding size s
    attn_dim: int = 20                   # attention size d_a
    aggregation_levels: int = 1          # K
    neighbor_samples: tuple[int, ...] = (5,)
    negatives: int = 4
    window: int = 3
    walk_length: int = 5
    num_walks: int = 5
    alpha: float = 0.5
    beta: float = 0.5
    learning_rate: float = 1e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    epochs: int = 30
    batch_pairs: int = 32
    convergence_tol: float = 1e-4
    activation: str = "identity"         # identity | relu | tanh
    shared_hidden: tuple[int, ...] = ()  # hidden widths of the shared MLP h
    noise_power: float = 0.75
    seed: int = 0

    def validate(self) -> None:
        for name in ("dim", "base_dim", "edge_dim", "attn_dim"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"gatne.{name} must be positive")
        if self.aggregation_levels != len(self.neighbor_samples):
            raise ConfigError("gatne.neighbor_samples must list one count per level")
        if any(k <= 0 for k in self.neighbor_samples):
            raise ConfigError("gatne.neighbor_samples entries must be positive")
        if self.window < 1 or self.walk_length < 1:
            raise ConfigError("gatne window and walk_length must be >= 1")
        if self.alpha < 0 or self.beta < 0:
            raise ConfigError("gatne.alpha and gatne.beta must be non-negative")
        if self.negatives < 1 or self.batch_pairs < 1:
            raise ConfigError("gatne.negatives and batch_pairs must be >= 1")
        if self.activation not in ("identity", "relu", "tanh"):
            raise ConfigError(f"unknown activation {self.activation!r}")
        if self.epochs < 0:
            raise ConfigError("gatne.epochs must be non-negative")


def _activate(pre: np.ndarray, kind: str) -> np.ndarray:
    if kind == "identity":
        return pre
    if kind == "relu":
        return np.maximum(pre, 0.0)
    return np.tanh(pre)


def _activate_grad(pre: np.ndarray, kind: str) -> np.ndarray:
    if kind == "identity":
        return np.ones_like(pre)
    if kind == "relu":
        return (pre > 0).astype(np.float64)
    th = np.tanh(pre)
    return 1.0 - th * th


def _glorot(rng: np.random.Generator, shape: tuple[int, ...]) -> np.ndarray:
    fan_in = shape[-1] if len(shape) > 1 else shape[0]
    fan_out = shape[0] if len(shape) > 1 else 1
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def shared_layer_dims(config: GatneConfig) -> list[tuple[int, int]]:
    widths = [config.base_dim, *config.shared_hidden, config.dim]
    return [(widths[i + 1], widths[i]) for i in range(len(widths) - 1)]


def init_params(config: GatneConfig, num_nodes: int,
                rng: np.random.Generator) -> dict[str, np.ndarray]:
    """Trainable parameters keyed by name; creation order is fixed.

    Context vectors start at zero (word2vec convention); everything else
    is Glorot-uniform.
    """
    m = len(EDGE_TYPES)
    params: dict[str, np.ndarray] = {}
    for t in range(m):
        params[f"edge_proj_w.{t}"] = _glorot(rng, (config.edge_dim, config.base_dim))
        params[f"edge_proj_b.{t}"] = np.zeros(config.edge_dim)
    for k in range(config.aggregation_levels):
        params[f"agg_w.{k}"] = _glorot(rng, (config.edge_dim, config.edge_dim))
    for t in range(m):
        params[f"attn_vec.{t}"] = _glorot(rng, (config.attn_dim,))
        params[f"attn_mat.{t}"] = _glorot(rng, (config.attn_dim, config.edge_dim))
        params[f"edge_out.{t}"] = _glorot(rng, (config.edge_dim, config.dim))
    params["base_out"] = _glorot(rng, (config.base_dim, config.dim))
    for l, shape in enumerate(shared_layer_dims(config)):
        params[f"shared_w.{l}"] = _glorot(rng, shape)
        params[f"shared_b.{l}"] = np.zeros(shape[0])
    params["context"] = np.zeros((num_nodes, config.dim))
    return params


# ---------------------------------------------------------------------------
# Neighbor sampling

def sample_neighbor_tree(graph: MultiplexGraph, edge_type: str, row: int,
                         samples: Sequence[int], rng: np.random.Generator):
    """Recursive neighbor samples for K-level aggregation.

    Returns (node, children) tuples; children is None at level 0 and for
    nodes without neighbors of this type (the self-fallback case). Draws
    are without replacement when the neighborhood is large enough.
    """

    def rec(node: int, level: int):
        if level == 0:
            return (node, None)
        nbrs = graph.neighbor_rows(node, edge_type)
        if len(nbrs) == 0:
            return (node, None)
        k = samples[level - 1]
        if len(nbrs) >= k:
            picks = rng.permutation(len(nbrs))[:k]
        else:
            picks = rng.integers(0, len(nbrs), size=k)
        return (node, [rec(int(nbrs[p]), level - 1) for p in picks])

    return rec(row, len(samples))


def full_neighbor_tree(graph: MultiplexGraph, edge_type: str, row: int, levels: int):
    """Deterministic tree using every neighbor at every level (export mode)."""

    def rec(node: int, level: int):
        if level == 0:
            return (node, None)
        nbrs = graph.neighbor_rows(node, edge_type)
        if len(nbrs) == 0:
            return (node, None)
        return (node, [rec(int(n), level - 1) for n in nbrs])

    return rec(row, levels)


# ---------------------------------------------------------------------------
# Forward / backward building blocks

def edge_embedding(params: Mapping[str, np.ndarray], config: GatneConfig,
                   edge_type_idx: int, tree, base: np.ndarray):
    """Aggregated edge embedding u for one node; returns (u, cache).

    Leaf children of a level are evaluated as one batched projection;
    the math is identical to projecting them one by one.
    """
    gw = params[f"edge_proj_w.{edge_type_idx}"]
    gb = params[f"edge_proj_b.{edge_type_idx}"]

    def rec(node: int, children, level: int):
        if children is None:
            u0 = gw @ base[node] + gb
            return u0, {"kind": "leaf", "node": node}
        leaf_nodes = [c_node for c_node, c_children in children if c_children is None]
        deep = [(c_node, c_children) for c_node, c_children in children
                if c_children is not None]
        total = np.zeros(config.edge_dim)
        if leaf_nodes:
            leaf_out = base[leaf_nodes] @ gw.T + gb
            total += leaf_out.sum(axis=0)
        deep_caches = []
        for c_node, c_children in deep:
            out, cache = rec(c_node, c_children, level - 1)
            total += out
            deep_caches.append(cache)
        mean = total / len(children)
        pre = params[f"agg_w.{level - 1}"] @ mean
        out = _activate(pre, config.activation)
        assert out.shape == (config.edge_dim,)
        return out, {"kind": "agg", "level": level, "leaf_nodes": leaf_nodes,
                     "deep": deep_caches, "count": len(children),
                     "mean": mean, "pre": pre}

    node, children = tree
    return rec(node, children, config.aggregation_levels)


def edge_embedding_backward(params: Mapping[str, np.ndarray], config: GatneConfig,
                            edge_type_idx: int, cache, dout: np.ndarray,
                            grads: dict[str, np.ndarray], base: np.ndarray) -> None:
    w_key = f"edge_proj_w.{edge_type_idx}"
    b_key = f"edge_proj_b.{edge_type_idx}"

    def rec(cache, dout):
        if cache["kind"] == "leaf":
            grads[w_key] += dout[:, None] * base[cache["node"]][None, :]
            grads[b_key] += dout
            return
        level = cache["level"]
        dpre = dout * _activate_grad(cache["pre"], config.activation)
        grads[f"agg_w.{level - 1}"] += dpre[:, None] * cache["mean"][None, :]
        dmean = params[f"agg_w.{level - 1}"].T @ dpre
        dchild = dmean / cache["count"]
        leaf_nodes = cache["leaf_nodes"]
        if leaf_nodes:
            # every leaf sees the same upstream gradient, so their
            # projection gradients collapse to one rank-1 update
            grads[w_key] += dchild[:, None] * base[leaf_nodes].sum(axis=0)[None, :]
            grads[b_key] += len(leaf_nodes) * dchild
        for child in cache["deep"]:
            rec(child, dchild)

    rec(cache, dout)


def attention_coefficients(params: Mapping[str, np.ndarray], edge_type_idx: int,
                           U: np.ndarray):
    """softmax(w_r^T tanh(W_r U)) over the m edge-type columns of U."""
    aw = params[f"attn_vec.{edge_type_idx}"]
    aW = params[f"attn_mat.{edge_type_idx}"]
    assert U.ndim == 2 and U.shape[1] == len(EDGE_TYPES)
    q = aW @ U            # (d_a, m)
    p = np.tanh(q)
    z = aw @ p            # (m,)
    a = softmax(z)
    return a, {"U": U, "p": p, "a": a}


def attention_backward(params: Mapping[str, np.ndarray], edge_type_idx: int,
                       cache, da: np.ndarray, grads: dict[str, np.ndarray]) -> np.ndarray:
    aw = params[f"attn_vec.{edge_type_idx}"]
    aW = params[f"attn_mat.{edge_type_idx}"]
    p, a, U = cache["p"], cache["a"], cache["U"]
    dz = a * (da - float(a @ da))
    grads[f"attn_vec.{edge_type_idx}"] += p @ dz
    dq = (aw[:, None] * dz[None, :]) * (1.0 - p * p)
    grads[f"attn_mat.{edge_type_idx}"] += dq @ U.T
    return aW.T @ dq      # dU contribution, (s, m)


def shared_forward(params: Mapping[str, np.ndarray], config: GatneConfig,
                   x: np.ndarray):
    """The shared transform h(x): affine layers with tanh between them."""
    layer_count = len(shared_layer_dims(config))
    h = x
    caches = []
    for l in range(layer_count):
        pre = params[f"shared_w.{l}"] @ h + params[f"shared_b.{l}"]
        caches.append((h, pre))
        h = np.tanh(pre) if l < layer_count - 1 else pre
    assert h.shape == (config.dim,)
    return h, caches


def shared_backward(params: Mapping[str, np.ndarray], config: GatneConfig,
                    caches, dout: np.ndarray, grads: dict[str, np.ndarray]) -> None:
    layer_count = len(shared_layer_dims(config))
    for l in range(layer_count - 1, -1, -1):
        inp, pre = caches[l]
        if l < layer_count - 1:
            th = np.tanh(pre)
            dout = dout * (1.0 - th * th)
        grads[f"shared_w.{l}"] += dout[:, None] * inp[None, :]
        grads[f"shared_b.{l}"] += dout
        dout = params[f"shared_w.{l}"].T @ dout


def overall_embedding(params: Mapping[str, np.ndarray], config: GatneConfig,
                      edge_type_idx: int, node_row: int, U: np.ndarray,
                      a: np.ndarray, base: np.ndarray):
    """v = h(x) + alpha * M_r^T (U a) + beta * D^T x."""
    x = base[node_row]
    shared, shared_caches = shared_forward(params, config, x)
    e = U @ a
    v = (shared
         + config.alpha * (params[f"edge_out.{edge_type_idx}"].T @ e)
         + config.beta * (params["base_out"].T @ x))
    assert v.shape == (config.dim,)
    return v, {"shared_caches": shared_caches, "e": e, "x": x, "a": a, "U": U}


def overall_backward(params: Mapping[str, np.ndarray], config: GatneConfig,
                     edge_type_idx: int, cache, dv: np.ndarray,
                     grads: dict[str, np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
    """Returns (dU, da) and accumulates parameter gradients."""
    shared_backward(params, config, cache["shared_caches"], dv, grads)
    grads["base_out"] += config.beta * (cache["x"][:, None] * dv[None, :])
    de = config.alpha * (params[f"edge_out.{edge_type_idx}"] @ dv)
    grads[f"edge_out.{edge_type_idx}"] += config.alpha * (cache["e"][:, None] * dv[None, :])
    dU = de[:, None] * cache["a"][None, :]
    da = cache["U"].T @ de
    return dU, da


def skipgram_loss(v: np.ndarray, context: np.ndarray, context_row: int,
                  neg_rows: np.ndarray) -> tuple[float, np.ndarray, float, np.ndarray]:
    """Loss plus pieces for backward: (loss, dv, dpos, dneg)."""
    ctx_neg = context[neg_rows]
    s_pos = float(context[context_row] @ v)
    s_neg = ctx_neg @ v
    loss = -log_sigmoid_scalar(s_pos) - float(np.sum(log_sigmoid(-s_neg)))
    dpos = sigmoid_scalar(s_pos) - 1.0
    dneg = sigmoid(s_neg)
    dv = dpos * context[context_row] + dneg @ ctx_neg
    return loss, dv, dpos, dneg


def pair_loss_and_grads(params: Mapping[str, np.ndarray], config: GatneConfig,
                        base: np.ndarray, pair: TrainingPair, trees,
                        neg_rows: np.ndarray, grads: dict[str, np.ndarray]) -> float:
    """Forward + backward for one training pair; accumulates into grads."""
    r = EDGE_TYPES.index(pair.edge_type)
    us = []
    u_caches = []
    for t in range(len(EDGE_TYPES)):
        u, cache = edge_embedding(params, config, t, trees[t], base)
        us.append(u)
        u_caches.append(cache)
    U = np.stack(us, axis=1)
    a, a_cache = attention_coefficients(params, r, U)
    v, v_cache = overall_embedding(params, config, r, pair.center, U, a, base)
    loss, dv, dpos, dneg = skipgram_loss(v, params["context"], pair.context, neg_rows)

    ctx_grad = grads["context"]
    ctx_grad[pair.context] += dpos * v
    for n, row in enumerate(neg_rows):   # np.add.at is slow for tiny updates
        ctx_grad[row] += dneg[n] * v

    dU, da = overall_backward(params, config, r, v_cache, dv, grads)
    dU = dU + attention_backward(params, r, a_cache, da, grads)
    for t in range(len(EDGE_TYPES)):
        edge_embedding_backward(params, config, t, u_caches[t], dU[:, t], grads, base)
    return loss


class Adam:
    """Standard Adam over a dict of named parameter arrays."""

    def __init__(self, params: Mapping[str, np.ndarray], lr: float,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, params: dict[str, np.ndarray], grads: Mapping[str, np.ndarray]) -> None:
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for key, g in grads.items():
            m = self.m[key]
            v = self.v[key]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            params[key] -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)


def zero_grads(params: Mapping[str, np.ndarray]) -> dict[str, np.ndarray]:
    return {k: np.zeros_like(v) for k, v in params.items()}


@dataclass
class GatneResult:
    embeddings: dict[str, np.ndarray]      # edge type -> (n, dim) float64
    node_ids: tuple[str, ...]
    params: dict[str, np.ndarray]
    epoch_losses: list[float] = field(default_factory=list)


def align_base(base_matrix: np.ndarray, base_ids: Sequence[str],
               graph: MultiplexGraph, expected_dim: int) -> np.ndarray:
    """Base rows reordered to graph node order; missing nodes are an error."""
    index = {nid: i for i, nid in enumerate(base_ids)}
    rows = []
    for nid in graph.node_ids:
        if nid not in index:
            raise DataError(f"node missing base embedding: {nid}")
        rows.append(index[nid])
    base = np.asarray(base_matrix, dtype=np.float64)[rows]
    if base.shape[1] != expected_dim:
        raise DataError(
            f"base embedding dim {base.shape[1]} does not match configured {expected_dim}")
    return base


def export_embeddings(params: Mapping[str, np.ndarray], config: GatneConfig,
                      graph: MultiplexGraph, base: np.ndarray) -> dict[str, np.ndarray]:
    """Overall embeddings for every node, aggregating full neighborhoods.

    Export replaces neighbor sampling with the exact mean so results are
    deterministic without a seed; nodes isolated under an edge type keep
    their initial edge embedding, matching the training-time fallback.
    """
    n = graph.num_nodes
    m = len(EDGE_TYPES)
    u_all = []
    for t, etype in enumerate(EDGE_TYPES):
        u0 = base @ params[f"edge_proj_w.{t}"].T + params[f"edge_proj_b.{t}"]
        deg = np.array([len(graph.neighbor_rows(r, etype)) for r in range(n)],
                       dtype=np.int64)
        owners = np.repeat(np.arange(n), deg)
        flat = (np.concatenate([graph.neighbor_rows(r, etype) for r in range(n)])
                if owners.size else np.zeros(0, dtype=np.int64))
        u = u0
        for k in range(config.aggregation_levels):
            sums = np.zeros((n, config.edge_dim))
            if owners.size:
                np.add.at(sums, owners, u[flat])
            mean = sums / np.maximum(deg, 1)[:, None]
            nxt = _activate(mean @ params[f"agg_w.{k}"].T, config.activation)
            nxt[deg == 0] = u0[deg == 0]
            u = nxt
        u_all.append(u)

    layer_count = len(shared_layer_dims(config))
    h = base
    for l in range(layer_count):
        pre = h @ params[f"shared_w.{l}"].T + params[f"shared_b.{l}"]
        h = np.tanh(pre) if l < layer_count - 1 else pre

    out = {}
    for r, etype in enumerate(EDGE_TYPES):
        z = np.stack(
            [np.tanh(u_all[t] @ params[f"attn_mat.{r}"].T) @ params[f"attn_vec.{r}"]
             for t in range(m)], axis=1)
        a = softmax(z, axis=1)
        e = np.zeros((n, config.edge_dim))
        for t in range(m):
            e += a[:, t:t + 1] * u_all[t]
        v = (h + config.alpha * e @ params[f"edge_out.{r}"]
             + config.beta * base @ params["base_out"])
        out[etype] = v
    return out


def train_gatne(graph: MultiplexGraph, base_matrix: np.ndarray,
                base_ids: Sequence[str], config: GatneConfig,
                walks: Mapping[str, Sequence[Walk]] | None = None,
                pairs: Mapping[str, Sequence[TrainingPair]] | None = None,
                ) -> GatneResult:
    """Run the full training loop and export per-edge-type embeddings.

    Walks and pairs may be supplied (e.g. reloaded from artifacts);
    otherwise they are generated here from the config seed. Training is
    deterministic for a fixed seed in single-thread mode. The base matrix
    is never written to.
    """
    config.validate()
    base = align_base(base_matrix, base_ids, graph, config.base_dim)
    base.setflags(write=False)

    if walks is None:
        walks = {etype: generate_walks(graph, etype, config.walk_length,
                                       config.num_walks, config.seed)
                 for etype in EDGE_TYPES}
    if pairs is None:
        pairs = {etype: pairs_from_walks(walks[etype], config.window)
                 for etype in EDGE_TYPES}

    noise_cdf = {}
    all_pairs: list[TrainingPair] = []
    for etype in EDGE_TYPES:
        type_pairs = list(pairs.get(etype, ()))
        if type_pairs:
            noise_cdf[etype] = unigram_noise_cdf(walks[etype], graph.num_nodes,
                                                 config.noise_power)
            all_pairs.extend(type_pairs)

    rng_init = np.random.default_rng(np.random.SeedSequence([config.seed, _INIT_TAG]))
    params = init_params(config, graph.num_nodes, rng_init)
    optimizer = Adam(params, config.learning_rate, config.adam_beta1,
                     config.adam_beta2, config.adam_eps)
    rng_train = np.random.default_rng(np.random.SeedSequence([config.seed, _TRAIN_TAG]))
    rng_shuffle = np.random.default_rng(np.random.SeedSequence([config.seed, _SHUFFLE_TAG]))

    epoch_losses: list[float] = []
    prev_loss: float | None = None
    for _ in range(config.epochs if all_pairs else 0):
        order = rng_shuffle.permutation(len(all_pairs))
        total = 0.0
        for start in range(0, len(order), config.batch_pairs):
            chunk = order[start:start + config.batch_pairs]
            grads = zero_grads(params)
            for idx in chunk:
                pair = all_pairs[idx]
                trees = [sample_neighbor_tree(graph, etype, pair.center,
                                              config.neighbor_samples, rng_train)
                         for etype in EDGE_TYPES]
                negs = sample_noise(noise_cdf[pair.edge_type], rng_train,
                                    config.negatives, exclude=pair.context)
                total += pair_loss_and_grads(params, config, base, pair, trees,
                                             negs, grads)
            scale = 1.0 / len(chunk)
            for g in grads.values():
                g *= scale
            optimizer.step(params, grads)
        mean_loss = total / len(all_pairs)
        epoch_losses.append(mean_loss)
        if prev_loss is not None:
            if abs(prev_loss - mean_loss) / max(abs(prev_loss), 1e-12) < config.convergence_tol:
                break
        prev_loss = mean_loss

    embeddings = export_embeddings(params, config, graph, base)
    return GatneResult(embeddings=embeddings, node_ids=graph.node_ids,
                       params=params, epoch_losses=epoch_losses)
