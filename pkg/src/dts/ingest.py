"""Parsers for the raw input files.

Four line-oriented formats feed the pipeline:

    sessions.jsonl   {"session_id", "item_id", "kind", "ts"}
    catalog.jsonl    {"item_id", "category", "product_type", "price_band", "brand_rank"}
    aspects.jsonl    {"item_id", "aspect_id", "aspect_text", "asp_rel", "headers": [a, b]}
    similarity.tsv   item_a<TAB>item_b

Parsing is strict by default (first malformed record aborts with its line
number); lenient mode skips bad records and counts them in ParseStats.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import IO, Iterable, Iterator, Union

from .errors import DataError

EVENT_KINDS = ("add_to_cart", "purchase")


@dataclass(frozen=True)
class SessionEvent:
    session_id: str
    item_id: str
    kind: str
    timestamp: int


@dataclass(frozen=True)
class CatalogItem:
    item_id: str
    category: str
    product_type: str
    price_band: int
    brand_rank: int


@dataclass(frozen=True)
class AspectAnnotation:
    item_id: str
    aspect_id: str
    aspect_text: str
    asp_rel: float
    header_variant_a: str
    header_variant_b: str


@dataclass
class ParseStats:
    parsed: int = 0
    skipped: int = 0
    errors: list[str] = field(default_factory=list)

    def record_error(self, message: str, strict: bool) -> None:
        if strict:
            raise DataError(message)
        self.skipped += 1
        if len(self.errors) < 20:
            self.errors.append(message)


Lines = Union[IO[str], IO[bytes], Iterable[str]]


def _iter_lines(stream: Lines) -> Iterator[str]:
    for line in stream:
        if isinstance(line, bytes):
            line = line.decode("utf-8")
        yield line


def _require(record: dict, key: str, lineno: int, label: str):
    if key not in record or record[key] in (None, ""):
        raise DataError(f"{label} line {lineno}: missing field {key!r}")
    return record[key]


def parse_sessions(stream: Lines, strict: bool = True,
                   stats: ParseStats | None = None) -> list[SessionEvent]:
    """Parse session events in file order.

    In strict mode the first malformed line raises DataError citing its
    1-based line number; otherwise malformed lines are skipped and counted.
    """
    stats = stats if stats is not None else ParseStats()
    out: list[SessionEvent] = []
    for lineno, line in enumerate(_iter_lines(stream), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
            kind = str(_require(record, "kind", lineno, "sessions"))
            if kind not in EVENT_KINDS:
                raise DataError(f"sessions line {lineno}: unknown kind {kind!r}")
            out.append(SessionEvent(
                session_id=str(_require(record, "session_id", lineno, "sessions")),
                item_id=str(_require(record, "item_id", lineno, "sessions")),
                kind=kind,
                timestamp=int(_require(record, "ts", lineno, "sessions")),
            ))
            stats.parsed += 1
        except DataError as exc:
            stats.record_error(str(exc), strict)
        except (json.JSONDecodeError, TypeError, ValueError) as exc:
            stats.record_error(f"sessions line {lineno}: {exc}", strict)
    return out


def parse_catalog(stream: Lines, strict: bool = True,
                  stats: ParseStats | None = None) -> dict[str, CatalogItem]:
    """Parse the catalog into an item_id keyed map; later lines win."""
    stats = stats if stats is not None else ParseStats()
    out: dict[str, CatalogItem] = {}
    for lineno, line in enumerate(_iter_lines(stream), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
            price_band = int(_require(record, "price_band", lineno, "catalog"))
            if not 0 <= price_band <= 5:
                raise DataError(f"catalog line {lineno}: price_band {price_band} outside [0, 5]")
            brand_rank = int(record.get("brand_rank", 0))
            if brand_rank < 0:
                raise DataError(f"catalog line {lineno}: negative brand_rank")
            item = CatalogItem(
                item_id=str(_require(record, "item_id", lineno, "catalog")),
                category=str(_require(record, "category", lineno, "catalog")),
                product_type=str(_require(record, "product_type", lineno, "catalog")),
                price_band=price_band,
                brand_rank=brand_rank,
            )
            out[item.item_id] = item
            stats.parsed += 1
        except DataError as exc:
            stats.record_error(str(exc), strict)
        except (json.JSONDecodeError, TypeError, ValueError) as exc:
            stats.record_error(f"catalog line {lineno}: {exc}", strict)
    return out


def parse_aspects(stream: Lines, strict: bool = True,
                  stats: ParseStats | None = None) -> dict[str, list[AspectAnnotation]]:
    """Parse aspect annotations grouped by item.

    Duplicate (item_id, aspect_id) rows violate the uniqueness contract;
    the later row is rejected as malformed.
    """
    stats = stats if stats is not None else ParseStats()
    out: dict[str, list[AspectAnnotation]] = {}
    seen: set[tuple[str, str]] = set()
    for lineno, line in enumerate(_iter_lines(stream), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
            asp_rel = float(_require(record, "asp_rel", lineno, "aspects"))
            if not 0.0 < asp_rel <= 1.0:
                raise DataError(f"aspects line {lineno}: asp_rel {asp_rel} outside (0, 1]")
            headers = record.get("headers")
            if not isinstance(headers, list) or len(headers) != 2 or not all(headers):
                raise DataError(f"aspects line {lineno}: headers must be two non-empty strings")
            ann = AspectAnnotation(
                item_id=str(_require(record, "item_id", lineno, "aspects")),
                aspect_id=str(_require(record, "aspect_id", lineno, "aspects")),
                aspect_text=str(_require(record, "aspect_text", lineno, "aspects")),
                asp_rel=asp_rel,
                header_variant_a=str(headers[0]),
                header_variant_b=str(headers[1]),
            )
            key = (ann.item_id, ann.aspect_id)
            if key in seen:
                raise DataError(f"aspects line {lineno}: duplicate aspect {key!r}")
            seen.add(key)
            out.setdefault(ann.item_id, []).append(ann)
            stats.parsed += 1
        except DataError as exc:
            stats.record_error(str(exc), strict)
        except (json.JSONDecodeError, TypeError, ValueError) as exc:
            stats.record_error(f"aspects line {lineno}: {exc}", strict)
    return out


def parse_similarity(stream: Lines, strict: bool = True,
                     stats: ParseStats | None = None) -> list[tuple[str, str]]:
    """Parse tab-separated similarity pairs."""
    stats = stats if stats is not None else ParseStats()
    out: list[tuple[str, str]] = []
    for lineno, line in enumerate(_iter_lines(stream), start=1):
        line = line.rstrip("\n")
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 2 or not parts[0] or not parts[1]:
            stats.record_error(f"similarity line {lineno}: expected item_a<TAB>item_b", strict)
            continue
        out.append((parts[0], parts[1]))
        stats.parsed += 1
    return out
