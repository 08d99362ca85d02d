"""Exact flat nearest-neighbor retrieval over the aspect-bearing items.

The index is a plain matrix scan under squared L2 distance: exact by
construction, no quantization or pruning. Distances map to a relevance
weight ann_rel = 1 / (1 + d^2), a strictly decreasing bijection from
distance into (0, 1]; this conversion is a versioned contract because the
header score consumes it (see carousel.aspect_scores). Ties in distance
break by ascending item id, which the ascending-id row order makes
automatic under a stable sort.

Arithmetic contract: distances are computed in float64 as the sum over
coordinates of squared differences, reduced with numpy's default pairwise
summation, so any oracle using ((row - q) ** 2).sum() reproduces values
bitwise.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DataError


@dataclass(frozen=True)
class RecallEntry:
    item_id: str
    ann_rel: float


@dataclass(frozen=True)
class RecallSet:
    anchor: str
    entries: tuple[RecallEntry, ...]


class FlatIndex:
    """Immutable exact-scan index over row vectors keyed by item id."""

    def __init__(self, matrix: np.ndarray, ids: Sequence[str]):
        order = np.argsort(np.array(ids, dtype=object), kind="stable")
        self.ids: tuple[str, ...] = tuple(ids[i] for i in order)
        self.matrix = np.ascontiguousarray(
            np.asarray(matrix, dtype=np.float64)[order])
        self.matrix.setflags(write=False)
        self.dim = self.matrix.shape[1]

    def __len__(self) -> int:
        return len(self.ids)


def build_index(embeddings: np.ndarray, ids: Sequence[str],
                v_b: Iterable[str], normalize: bool = False) -> FlatIndex:
    """Index exactly the v_b rows of an embedding matrix.

    Raises if v_b is empty (recall would be impossible) or if any v_b item
    lacks an embedding row.
    """
    v_b = sorted(set(v_b))
    if not v_b:
        raise DataError("cannot build a recall index over an empty item set")
    row_of = {nid: i for i, nid in enumerate(ids)}
    missing = [nid for nid in v_b if nid not in row_of]
    if missing:
        raise DataError(f"items without embedding rows: {missing[:5]!r}")
    matrix = np.asarray(embeddings, dtype=np.float64)[[row_of[nid] for nid in v_b]]
    if normalize:
        norms = np.linalg.norm(matrix, axis=1, keepdims=True)
        matrix = matrix / np.maximum(norms, 1e-12)
    return FlatIndex(matrix, v_b)


def query(index: FlatIndex, anchor_vector: np.ndarray, p: int = 50,
          exclude_id: str | None = None, anchor: str = "",
          normalize: bool = False) -> RecallSet:
    """The p nearest rows by squared L2, ties broken by ascending item id.

    `exclude_id` drops the anchor itself when it is indexed. ann_rel is
    1 / (1 + squared distance).
    """
    q = np.asarray(anchor_vector, dtype=np.float64)
    if q.shape != (index.dim,):
        raise DataError(f"query dim {q.shape} does not match index dim ({index.dim},)")
    if normalize:
        q = q / max(float(np.linalg.norm(q)), 1e-12)
    d2 = ((index.matrix - q) ** 2).sum(axis=1)
    order = np.argsort(d2, kind="stable")
    entries = []
    for row in order:
        item = index.ids[row]
        if item == exclude_id:
            continue
        entries.append(RecallEntry(item_id=item, ann_rel=float(1.0 / (1.0 + d2[row]))))
        if len(entries) == p:
            break
    return RecallSet(anchor=anchor, entries=tuple(entries))


def batch_recall(index: FlatIndex, anchors: Sequence[str],
                 vectors: Mapping[str, np.ndarray], p: int = 50,
                 normalize: bool = False, workers: int = 1) -> list[RecallSet]:
    """Recall sets for many anchors; parallel-safe since queries are pure."""
    def one(anchor: str) -> RecallSet:
        return query(index, vectors[anchor], p=p, exclude_id=anchor,
                     anchor=anchor, normalize=normalize)

    if workers > 1 and len(anchors) > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(one, anchors))
    return [one(a) for a in anchors]
