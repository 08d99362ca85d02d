import io

import pytest

from conftest import annotation, make_catalog
from dts.errors import DataError
from dts.ingest import CatalogItem
from dts.triples import (Triple, entity_vocab, extract_triples, read_triples,
                         write_triples)


def catalog_three():
    return make_catalog([
        ("X", "c", "pt1", 3, 10),
        ("Y", "c", "pt1", 0, 500),
        ("Z", "c", "pt2", 5, 990),
    ])


class TestExtractTriples:
    def test_price_band_bucket_naming(self):
        triples = extract_triples(catalog_three(), {})
        assert Triple("X", "price_band", "band_3") in triples
        assert Triple("Y", "price_band", "band_0") in triples

    def test_item_without_aspects_contributes_no_aspect_triples(self):
        triples = extract_triples(catalog_three(), {"X": [annotation("X", "soft")]})
        aspect_heads = {t.head for t in triples if t.relation == "aspect"}
        assert aspect_heads == {"X"}

    def test_similarity_is_symmetrized(self):
        # round-trip over a 3-item toy catalog: each input pair appears
        # in both directions and nothing else does
        pairs = [("X", "Y"), ("Y", "Z")]
        triples = extract_triples(catalog_three(), {}, pairs)
        sim = {(t.head, t.tail) for t in triples if t.relation == "similarity"}
        expected = set()
        for a, b in pairs:
            expected.add((a, b))
            expected.add((b, a))
        assert sim == expected

    def test_similarity_with_unknown_item_skipped(self):
        triples = extract_triples(catalog_three(), {}, [("X", "ghost")])
        assert not [t for t in triples if t.relation == "similarity"]

    def test_duplicates_deduplicated_silently(self):
        triples = extract_triples(catalog_three(), {}, [("X", "Y"), ("X", "Y")])
        sim = [t for t in triples if t.relation == "similarity"]
        assert len(sim) == 2

    def test_every_head_is_an_item(self):
        cat = catalog_three()
        triples = extract_triples(cat, {"Z": [annotation("Z", "warm")]},
                                  [("X", "Z")])
        assert all(t.head in cat for t in triples)

    def test_brand_deciles_cover_range(self):
        catalog = make_catalog([(f"i{k}", "c", "pt", 1, k * 10) for k in range(100)])
        triples = extract_triples(catalog, {})
        buckets = {t.tail for t in triples if t.relation == "brand"}
        assert buckets == {f"brand_q{d}" for d in range(10)}

    def test_invalid_price_band_rejected(self):
        catalog = {"bad": CatalogItem("bad", "c", "pt", 9, 0)}
        with pytest.raises(DataError, match="price_band"):
            extract_triples(catalog, {})


class TestVocabAndIo:
    def test_vocab_contiguous_and_sorted(self):
        triples = extract_triples(catalog_three(), {})
        vocab = entity_vocab(triples)
        assert sorted(vocab.values()) == list(range(len(vocab)))
        assert list(vocab) == sorted(vocab)

    def test_tsv_round_trip(self):
        triples = extract_triples(catalog_three(), {"X": [annotation("X", "soft")]},
                                  [("X", "Z")])
        buf = io.StringIO()
        write_triples(buf, triples)
        assert read_triples(io.StringIO(buf.getvalue())) == triples

    def test_unknown_relation_rejected_on_read(self):
        with pytest.raises(DataError, match="relation"):
            read_triples(io.StringIO("a\tlikes\tb\n"))
