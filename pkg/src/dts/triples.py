"""Knowledge-graph triple extraction from catalog and aspect data.

Five relations link item entities to attribute entities:

    product_type  item -> its product type string
    aspect        item -> each annotated aspect id
    similarity    item -> item, emitted in both directions
    price_band    item -> "band_<0..5>"
    brand         item -> "brand_q<0..9>", a decile bucket of brand_rank

Raw brand ranks would mint one entity per rank, so ranks are bucketed into
empirical deciles over the catalog. Carousel header strings are not
entities; they live on the aspect annotations and are rendered at carousel
time, so they contribute nothing to the KG.

Entity ids are the raw strings; the vocabulary maps them to contiguous
integers in sorted order so downstream artifacts are order-independent.
"""

from __future__ import annotations

from typing import IO, Iterable, Mapping, NamedTuple, Sequence

import numpy as np

from .errors import DataError
from .ingest import AspectAnnotation, CatalogItem

RELATIONS = ("product_type", "aspect", "similarity", "price_band", "brand")


class Triple(NamedTuple):
    head: str
    relation: str
    tail: str


def brand_decile_edges(catalog: Mapping[str, CatalogItem]) -> np.ndarray:
    """Inner decile edges (9 values) of the brand_rank distribution."""
    ranks = np.array([item.brand_rank for item in catalog.values()], dtype=np.float64)
    if ranks.size == 0:
        return np.zeros(9)
    return np.quantile(ranks, np.linspace(0.1, 0.9, 9))


def brand_bucket(rank: int, edges: np.ndarray) -> int:
    return int(np.searchsorted(edges, rank, side="right"))


def extract_triples(catalog: Mapping[str, CatalogItem],
                    aspects: Mapping[str, Sequence[AspectAnnotation]],
                    similarity_pairs: Iterable[tuple[str, str]] = ()) -> list[Triple]:
    """Emit the deduplicated triple list in deterministic order.

    Heads are always item entities. Similarity pairs are symmetrized
    (both directions emitted); pairs naming unknown items are skipped.
    Aspect triples only cover items present in the catalog.
    """
    edges = brand_decile_edges(catalog)
    out: list[Triple] = []
    seen: set[Triple] = set()

    def emit(head: str, relation: str, tail: str) -> None:
        t = Triple(head, relation, tail)
        if t not in seen:
            seen.add(t)
            out.append(t)

    for item_id in sorted(catalog):
        item = catalog[item_id]
        if not 0 <= item.price_band <= 5:
            raise DataError(f"{item_id}: price_band {item.price_band} outside [0, 5]")
        emit(item_id, "product_type", item.product_type)
        for ann in aspects.get(item_id, ()):
            emit(item_id, "aspect", ann.aspect_id)
        emit(item_id, "price_band", f"band_{item.price_band}")
        emit(item_id, "brand", f"brand_q{brand_bucket(item.brand_rank, edges)}")
    for a, b in similarity_pairs:
        if a in catalog and b in catalog and a != b:
            emit(a, "similarity", b)
            emit(b, "similarity", a)
    return out


def entity_vocab(triples: Sequence[Triple]) -> dict[str, int]:
    """Contiguous integer ids for every entity, assigned in sorted order."""
    names = {t.head for t in triples} | {t.tail for t in triples}
    return {name: i for i, name in enumerate(sorted(names))}


def write_triples(stream: IO[str], triples: Sequence[Triple]) -> None:
    for head, relation, tail in triples:
        stream.write(f"{head}\t{relation}\t{tail}\n")


def read_triples(stream: Iterable[str]) -> list[Triple]:
    out = []
    for lineno, line in enumerate(stream, start=1):
        line = line.rstrip("\n")
        if not line:
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise DataError(f"triples line {lineno}: expected 3 tab-separated fields")
        if parts[1] not in RELATIONS:
            raise DataError(f"triples line {lineno}: unknown relation {parts[1]!r}")
        out.append(Triple(*parts))
    return out
