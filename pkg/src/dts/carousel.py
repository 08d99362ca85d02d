"""Aspect scoring, header selection, and carousel assembly.

For an anchor's recall set, each aspect a carried by any recall item gets

    score(a) = (1/N_a) * sum over recall items i having a of
               ann_rel(i) * asp_rel(a, i)

where N_a counts the contributing items. The winning aspect is the score
argmax; ties break by higher support, then ascending aspect id. The
carousel shows the recall items that carry the winning aspect, in recall
order (descending ann_rel), under one of the aspect's two stored header
variants.

Contributions are summed in recall-set order so scores are reproducible
bit-for-bit against an independent enumeration using the same order.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

from .ingest import AspectAnnotation
from .numerics import stable_hash64
from .recall import RecallSet

HEADER_POLICIES = ("variant_a", "variant_b", "hash")


@dataclass(frozen=True)
class AspectScore:
    aspect_id: str
    score: float
    support: int
    items: tuple[str, ...]       # contributing items in recall order


@dataclass(frozen=True)
class AspectScoreTable:
    anchor: str
    scores: dict[str, AspectScore]


@dataclass(frozen=True)
class Carousel:
    anchor: str
    aspect_id: str
    header: str
    items: tuple[str, ...]
    score: float
    support: int


def aspect_scores(recall: RecallSet,
                  aspects: Mapping[str, Sequence[AspectAnnotation]]) -> AspectScoreTable:
    """Score every aspect present on the recall items."""
    sums: dict[str, float] = {}
    items: dict[str, list[str]] = {}
    for entry in recall.entries:
        for ann in aspects.get(entry.item_id, ()):
            sums[ann.aspect_id] = sums.get(ann.aspect_id, 0.0) + entry.ann_rel * ann.asp_rel
            items.setdefault(ann.aspect_id, []).append(entry.item_id)
    table = {
        aspect_id: AspectScore(aspect_id=aspect_id,
                               score=sums[aspect_id] / len(contributors),
                               support=len(contributors),
                               items=tuple(contributors))
        for aspect_id, contributors in items.items()
    }
    return AspectScoreTable(anchor=recall.anchor, scores=table)


def select_aspect(table: AspectScoreTable, min_support: int = 3,
                  k: int = 1) -> list[tuple[str, float]]:
    """Top-k aspects with support >= min_support.

    Sorted by score descending, then support descending, then aspect id
    ascending; empty when nothing qualifies (the carousel is suppressed).
    """
    qualified = [s for s in table.scores.values() if s.support >= min_support]
    qualified.sort(key=lambda s: (-s.score, -s.support, s.aspect_id))
    return [(s.aspect_id, s.score) for s in qualified[:k]]


def render_header(aspect: AspectAnnotation, policy: str = "hash",
                  anchor: str = "") -> str:
    """One of the aspect's two stored header variants, verbatim.

    The "hash" policy splits deterministically on (anchor, aspect) so the
    same anchor always sees the same variant.
    """
    if policy == "variant_a":
        return aspect.header_variant_a
    if policy == "variant_b":
        return aspect.header_variant_b
    if policy == "hash":
        pick = stable_hash64(f"{anchor}\x00{aspect.aspect_id}") % 2
        return aspect.header_variant_a if pick == 0 else aspect.header_variant_b
    raise ValueError(f"unknown header policy {policy!r}")


def assemble_carousel(anchor: str, recall: RecallSet, table: AspectScoreTable,
                      aspects: Mapping[str, Sequence[AspectAnnotation]],
                      min_support: int = 3, policy: str = "hash") -> Carousel | None:
    """Build the carousel for the winning aspect, or None when suppressed."""
    ranked = select_aspect(table, min_support=min_support, k=1)
    if not ranked:
        return None
    aspect_id, score = ranked[0]
    winner = table.scores[aspect_id]
    annotation = next(ann for ann in aspects[winner.items[0]]
                      if ann.aspect_id == aspect_id)
    members = tuple(entry.item_id for entry in recall.entries
                    if any(a.aspect_id == aspect_id
                           for a in aspects.get(entry.item_id, ())))
    return Carousel(anchor=anchor, aspect_id=aspect_id,
                    header=render_header(annotation, policy=policy, anchor=anchor),
                    items=members, score=score, support=winner.support)
