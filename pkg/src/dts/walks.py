"""Uniform random walks over one edge type and skip-gram pair extraction.

Every (edge type, node, walk index) triple gets its own RNG stream derived
from the stage seed and a stable hash of the node id, so walk output does
not depend on node insertion order and walk generation can be distributed
without changing results.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigError
from .graph import MultiplexGraph
from .numerics import stable_hash64

_WALK_TAG = 0x57A1C


@dataclass(frozen=True)
class Walk:
    edge_type: str
    nodes: tuple[int, ...]   # graph node rows


@dataclass(frozen=True)
class TrainingPair:
    center: int
    context: int
    edge_type: str


def walk_rng(seed: int, edge_type: str, node_id: str, walk_index: int) -> np.random.Generator:
    entropy = [seed, _WALK_TAG, stable_hash64(edge_type), stable_hash64(node_id), walk_index]
    return np.random.default_rng(np.random.SeedSequence(entropy))


def _single_walk(graph: MultiplexGraph, edge_type: str, start_row: int,
                 length: int, rng: np.random.Generator) -> tuple[int, ...]:
    walk = [start_row]
    cur = start_row
    while len(walk) < length:
        nbrs = graph.neighbor_rows(cur, edge_type)
        if len(nbrs) == 0:
            break
        cur = int(nbrs[rng.integers(len(nbrs))])
        walk.append(cur)
    return tuple(walk)


def generate_walks(graph: MultiplexGraph, edge_type: str, length: int,
                   num_walks: int, seed: int, workers: int = 1) -> list[Walk]:
    """num_walks uniform walks from every node with a neighbor under edge_type.

    Isolated nodes emit nothing. A walk stops early only when the current
    node has no neighbors, which for an undirected graph can only happen at
    the start node.
    """
    if length < 1 or num_walks < 0:
        raise ConfigError("walk length must be >= 1 and num_walks >= 0")
    tasks = []
    for row, node_id in enumerate(graph.node_ids):
        if len(graph.neighbor_rows(row, edge_type)) == 0:
            continue
        for w in range(num_walks):
            tasks.append((row, node_id, w))

    def run(task) -> Walk:
        row, node_id, w = task
        rng = walk_rng(seed, edge_type, node_id, w)
        return Walk(edge_type=edge_type, nodes=_single_walk(graph, edge_type, row, length, rng))

    if workers > 1 and len(tasks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(run, tasks))
    return [run(t) for t in tasks]


def pairs_from_walks(walks: Iterable[Walk], window: int) -> list[TrainingPair]:
    """Ordered (center, context) pairs within the window, both directions."""
    if window < 1:
        raise ConfigError("window must be >= 1")
    out: list[TrainingPair] = []
    for walk in walks:
        nodes = walk.nodes
        n = len(nodes)
        for p in range(n):
            lo = max(0, p - window)
            hi = min(n, p + window + 1)
            for q in range(lo, hi):
                if q != p:
                    out.append(TrainingPair(nodes[p], nodes[q], walk.edge_type))
    return out


def pair_count_closed_form(walk_lengths: Sequence[int], window: int) -> int:
    """Expected pair count: sum over positions of in-window neighbors."""
    total = 0
    for n in walk_lengths:
        for p in range(n):
            total += min(n, p + window + 1) - max(0, p - window) - 1
    return total


def unigram_noise_cdf(walks: Iterable[Walk], num_nodes: int, power: float = 0.75) -> np.ndarray:
    """CDF over node rows of corpus frequency raised to `power`.

    Nodes never visited keep zero mass. Sampling via searchsorted on this
    CDF is order-stable because rows are assigned in sorted id order.
    """
    counts = np.zeros(num_nodes, dtype=np.float64)
    for walk in walks:
        for row in walk.nodes:
            counts[row] += 1.0
    weights = counts ** power
    total = weights.sum()
    if total <= 0:
        raise ConfigError("noise distribution needs a non-empty walk corpus")
    return np.cumsum(weights / total)


def sample_noise(cdf: np.ndarray, rng: np.random.Generator, count: int,
                 exclude: int | None = None) -> np.ndarray:
    """Draw `count` rows from the noise CDF, rejecting the excluded row."""
    out = np.empty(count, dtype=np.int64)
    filled = 0
    while filled < count:
        draws = np.searchsorted(cdf, rng.random(count - filled), side="right")
        if exclude is not None:
            draws = draws[draws != exclude]
        take = min(len(draws), count - filled)
        out[filled:filled + take] = draws[:take]
        filled += take
    return out
