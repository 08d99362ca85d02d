import io
import json

import pytest

from dts.errors import DataError
from dts.ingest import (ParseStats, parse_aspects, parse_catalog,
                        parse_sessions, parse_similarity)


def jsonl(*rows):
    return io.StringIO("".join(json.dumps(r) + "\n" for r in rows))


class TestParseSessions:
    def test_single_purchase_line(self):
        events = parse_sessions(jsonl(
            {"session_id": "s1", "item_id": "a", "kind": "purchase", "ts": 5}))
        assert len(events) == 1
        assert events[0].item_id == "a"
        assert events[0].kind == "purchase"
        assert events[0].timestamp == 5

    def test_empty_input(self):
        assert parse_sessions(io.StringIO("")) == []

    def test_missing_item_id_strict_cites_line(self):
        with pytest.raises(DataError, match="line 1"):
            parse_sessions(jsonl({"session_id": "s1", "kind": "purchase", "ts": 1}))

    def test_lenient_skips_and_counts(self):
        stats = ParseStats()
        stream = io.StringIO(
            json.dumps({"session_id": "s1", "item_id": "a", "kind": "purchase",
                        "ts": 1}) + "\n"
            + "not json\n"
            + json.dumps({"session_id": "s1", "item_id": "b",
                          "kind": "add_to_cart", "ts": 2}) + "\n")
        events = parse_sessions(stream, strict=False, stats=stats)
        assert [e.item_id for e in events] == ["a", "b"]
        assert stats.parsed == 2
        assert stats.skipped == 1
        assert "line 2" in stats.errors[0]

    def test_unknown_kind_rejected(self):
        with pytest.raises(DataError, match="kind"):
            parse_sessions(jsonl(
                {"session_id": "s", "item_id": "a", "kind": "viewed", "ts": 1}))

    def test_file_order_preserved(self):
        rows = [{"session_id": "s", "item_id": f"i{k}", "kind": "purchase",
                 "ts": k} for k in range(5)]
        events = parse_sessions(jsonl(*rows))
        assert [e.item_id for e in events] == [f"i{k}" for k in range(5)]


class TestParseCatalog:
    def test_happy_path(self):
        catalog = parse_catalog(jsonl(
            {"item_id": "x", "category": "c", "product_type": "p",
             "price_band": 3, "brand_rank": 7}))
        assert catalog["x"].price_band == 3
        assert catalog["x"].brand_rank == 7

    def test_price_band_range_enforced(self):
        with pytest.raises(DataError, match="price_band"):
            parse_catalog(jsonl(
                {"item_id": "x", "category": "c", "product_type": "p",
                 "price_band": 6, "brand_rank": 0}))

    def test_price_band_zero_is_valid(self):
        catalog = parse_catalog(jsonl(
            {"item_id": "x", "category": "c", "product_type": "p",
             "price_band": 0, "brand_rank": 0}))
        assert catalog["x"].price_band == 0


class TestParseAspects:
    def test_groups_by_item(self):
        aspects = parse_aspects(jsonl(
            {"item_id": "x", "aspect_id": "a1", "aspect_text": "soft",
             "asp_rel": 0.5, "headers": ["h1", "h2"]},
            {"item_id": "x", "aspect_id": "a2", "aspect_text": "warm",
             "asp_rel": 1.0, "headers": ["h1", "h2"]}))
        assert [a.aspect_id for a in aspects["x"]] == ["a1", "a2"]

    def test_asp_rel_must_be_in_unit_interval(self):
        for bad in (0.0, 1.5, -0.2):
            with pytest.raises(DataError, match="asp_rel"):
                parse_aspects(jsonl(
                    {"item_id": "x", "aspect_id": "a", "aspect_text": "t",
                     "asp_rel": bad, "headers": ["h1", "h2"]}))

    def test_duplicate_item_aspect_rejected(self):
        row = {"item_id": "x", "aspect_id": "a", "aspect_text": "t",
               "asp_rel": 0.5, "headers": ["h1", "h2"]}
        with pytest.raises(DataError, match="duplicate"):
            parse_aspects(jsonl(row, row))

    def test_headers_must_be_two_strings(self):
        with pytest.raises(DataError, match="headers"):
            parse_aspects(jsonl(
                {"item_id": "x", "aspect_id": "a", "aspect_text": "t",
                 "asp_rel": 0.5, "headers": ["only one"]}))


class TestParseSimilarity:
    def test_tab_separated_pairs(self):
        pairs = parse_similarity(io.StringIO("a\tb\nc\td\n"))
        assert pairs == [("a", "b"), ("c", "d")]

    def test_malformed_line_lenient(self):
        stats = ParseStats()
        pairs = parse_similarity(io.StringIO("a\tb\nbroken line\n"),
                                 strict=False, stats=stats)
        assert pairs == [("a", "b")]
        assert stats.skipped == 1
