"""Ranking metrics and independent brute-force oracles.

The oracles deliberately share no code with the modules they check: the
aspect-selection oracle re-enumerates the header score from plain dicts,
and the nearest-neighbor oracle is a python loop with its own sort. The
acceptance suite compares module outputs against these, exactly.

NDCG uses linear gain (rel_i, not 2^rel - 1) with the log2(i + 1)
discount; the convention is declared in the eval stage's output metadata.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DataError


def ndcg_at_k(ranked_items: Sequence[str], judgments: Mapping[str, int], k: int) -> float:
    """DCG@k / IDCG@k with linear gain; 0.0 when the ideal is empty.

    The ideal ranking draws from every judged item, not just those
    retrieved.
    """
    if k < 1:
        raise DataError("k must be >= 1")
    dcg = 0.0
    for i, item in enumerate(ranked_items[:k], start=1):
        rel = judgments.get(item, 0)
        if rel:
            dcg += rel / math.log2(i + 1)
    ideal = sorted((r for r in judgments.values() if r > 0), reverse=True)[:k]
    idcg = sum(r / math.log2(i + 1) for i, r in enumerate(ideal, start=1))
    if idcg == 0.0:
        return 0.0
    return dcg / idcg


@dataclass(frozen=True)
class RelevanceJudgments:
    """Graded relevance derived from cluster membership.

    grade(anchor, item) is 1 when the two items share a cluster and 0
    otherwise; for_anchor materializes the per-anchor map NDCG consumes.
    """
    clusters: dict[str, str]

    @classmethod
    def from_file(cls, path: Path) -> "RelevanceJudgments":
        clusters = {}
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    row = json.loads(line)
                    clusters[str(row["item"])] = str(row["cluster"])
                except (json.JSONDecodeError, KeyError) as exc:
                    raise DataError(f"judgments line {lineno}: {exc}") from exc
        return cls(clusters=clusters)

    def grade(self, anchor: str, item: str) -> int:
        ca = self.clusters.get(anchor)
        return int(ca is not None and item != anchor and self.clusters.get(item) == ca)

    def for_anchor(self, anchor: str) -> dict[str, int]:
        ca = self.clusters.get(anchor)
        if ca is None:
            return {}
        return {item: 1 for item, cl in self.clusters.items()
                if cl == ca and item != anchor}


def oracle_select_aspect(entries: Sequence[tuple[str, float]],
                         aspect_rel: Mapping[str, Mapping[str, float]]) -> str | None:
    """Independent re-derivation of the winning aspect.

    `entries` is the recall list as (item, ann_rel) in rank order and
    `aspect_rel` maps item -> {aspect -> asp_rel}. Sums run in recall
    order. Tie chain: higher mean score, then more supporting items, then
    lexicographically smaller aspect id. None when no recall item has any
    aspect.
    """
    totals: dict[str, float] = {}
    counts: dict[str, int] = {}
    for item, ann in entries:
        for aspect, rel in aspect_rel.get(item, {}).items():
            totals[aspect] = totals.get(aspect, 0.0) + ann * rel
            counts[aspect] = counts.get(aspect, 0) + 1
    best: tuple[float, int, str] | None = None
    winner = None
    for aspect in totals:
        key = (-(totals[aspect] / counts[aspect]), -counts[aspect], aspect)
        if best is None or key < best:
            best = key
            winner = aspect
    return winner


def exhaustive_nn(matrix: np.ndarray, ids: Sequence[str], query_vec: np.ndarray,
                  p: int, exclude_id: str | None = None) -> list[tuple[str, float]]:
    """Full-scan nearest neighbors with the production tie-break contract.

    Row distances are ((row - q) ** 2).sum() in float64 and convert to
    1 / (1 + d^2); sorting is by (distance, item id) ascending.
    """
    matrix = np.ascontiguousarray(np.asarray(matrix, dtype=np.float64))
    q = np.asarray(query_vec, dtype=np.float64)
    scored = []
    for row in range(matrix.shape[0]):
        if ids[row] == exclude_id:
            continue
        d2 = float(((matrix[row] - q) ** 2).sum())
        scored.append((d2, ids[row]))
    scored.sort()
    return [(item, 1.0 / (1.0 + d2)) for d2, item in scored[:p]]


def cluster_purity(neighbor_lists: Mapping[str, Sequence[str]],
                   clusters: Mapping[str, str], top_n: int = 5) -> tuple[float, float]:
    """(mean, min) fraction of each anchor's top-n neighbors in its cluster."""
    fractions = []
    for anchor, neighbors in neighbor_lists.items():
        home = clusters.get(anchor)
        top = list(neighbors)[:top_n]
        if home is None or not top:
            continue
        same = sum(1 for n in top if clusters.get(n) == home)
        fractions.append(same / len(top))
    if not fractions:
        return 0.0, 0.0
    return float(np.mean(fractions)), float(min(fractions))


def mean_ndcg(recall_sets: Iterable, judgments: RelevanceJudgments,
              k: int) -> tuple[float, int]:
    """Mean NDCG@k over anchors that have at least one judged item."""
    scores = []
    for rs in recall_sets:
        judged = judgments.for_anchor(rs.anchor)
        if not judged:
            continue
        ranked = [e.item_id for e in rs.entries]
        scores.append(ndcg_at_k(ranked, judged, k))
    if not scores:
        return 0.0, 0
    return float(np.mean(scores)), len(scores)
