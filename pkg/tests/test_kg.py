import io
import json

import pytest
from hypothesis import given, strategies as st

from tempoqa.kg import (
    ConflictError,
    NotFoundError,
    ParseError,
    Timestamp,
    dump_kg,
    is_temporal_fact,
    load_kg,
    verbalize_fact,
    verbalize_path,
)

from conftest import make_kg


class TestTimestamp:
    def test_parse_resolutions(self):
        assert Timestamp.parse("2009") == Timestamp(2009)
        assert Timestamp.parse("2009-07") == Timestamp(2009, 7)
        assert Timestamp.parse("2009-07-01") == Timestamp(2009, 7, 1)

    @pytest.mark.parametrize("bad", ["", "abc", "2009-13", "2009-00", "2009-01-32", "2009-1-2-3"])
    def test_parse_rejects(self, bad):
        with pytest.raises(ValueError):
            Timestamp.parse(bad)

    def test_day_requires_month(self):
        with pytest.raises(ValueError):
            Timestamp(2009, None, 5)

    def test_render(self):
        assert Timestamp(2009, 7, 1).render() == "01-07-2009"
        assert Timestamp(2017, 8).render() == "08-2017"
        assert Timestamp(476).render() == "0476"

    def test_ordering_year_before_month(self):
        assert Timestamp(2009) < Timestamp(2009, 1) < Timestamp(2009, 1, 1)
        assert Timestamp(2008, 12, 31) < Timestamp(2009)

    @given(
        st.integers(1000, 2100),
        st.one_of(st.none(), st.integers(1, 12)),
    )
    def test_parse_roundtrip(self, year, month):
        ts = Timestamp(year, month)
        assert Timestamp.parse(ts.isoformat()) == ts


class TestLoad:
    def test_roundtrip_identity(self, football_kg):
        items_io, facts_io = io.StringIO(), io.StringIO()
        dump_kg(football_kg, items_io, facts_io)
        reloaded = load_kg(
            items_io.getvalue().splitlines(), facts_io.getvalue().splitlines()
        )
        assert reloaded.items == football_kg.items
        assert reloaded.facts == football_kg.facts
        # A second dump is byte-identical.
        again_i, again_f = io.StringIO(), io.StringIO()
        dump_kg(reloaded, again_i, again_f)
        assert again_i.getvalue() == items_io.getvalue()
        assert again_f.getvalue() == facts_io.getvalue()

    def test_parse_error_reports_line(self):
        with pytest.raises(ParseError) as err:
            load_kg(['{"id": "x"}'], [])
        assert err.value.line == 1

    def test_duplicate_item_conflict(self):
        rec = json.dumps({"id": "a", "kind": "entity", "label": "a"})
        with pytest.raises(ConflictError):
            load_kg([rec, rec], [])

    def test_fact_with_unknown_item(self):
        items = [json.dumps({"id": "a", "kind": "entity", "label": "a"}),
                 json.dumps({"id": "p", "kind": "predicate", "label": "p"})]
        fact = json.dumps({"id": "f", "subject": "a", "predicate": "p", "object": "zz"})
        with pytest.raises((NotFoundError, ParseError)):
            load_kg(items, [fact])

    def test_timestamp_label_defaults_to_rendered_value(self):
        kg = make_kg([{"id": "t", "kind": "timestamp", "timestamp": "1999"}], [])
        assert kg.items["t"].label == "1999"


class TestQueries:
    def test_facts_of_covers_all_positions(self, football_kg):
        assert {f.id for f in football_kg.facts_of("E1")} == {"f1", "f2", "f3", "f4"}
        assert {f.id for f in football_kg.facts_of("E2")} == {"f1"}
        assert {f.id for f in football_kg.facts_of("T1")} == {"f1"}

    def test_facts_of_unknown_item(self, football_kg):
        with pytest.raises(NotFoundError):
            football_kg.facts_of("nope")

    def test_temporal_facts(self, football_kg):
        assert {f.id for f in football_kg.temporal_facts_of("E1")} == {"f1", "f2"}
        # 2 hops from E2 reaches f2 through E1.
        assert {f.id for f in football_kg.temporal_facts_of("E2", hops=2)} == {"f1", "f2"}

    def test_is_temporal_fact(self, football_kg):
        assert is_temporal_fact(football_kg.facts["f1"])
        assert not is_temporal_fact(football_kg.facts["f3"])

    def test_shortest_paths_direct(self, football_kg):
        paths = football_kg.shortest_paths("E2", "E1")
        assert {p.facts for p in paths} == {("f1",)}

    def test_shortest_paths_two_hops(self, football_kg):
        paths = football_kg.shortest_paths("E2", "E3")
        assert {p.facts for p in paths} == {("f1", "f2")}

    def test_shortest_paths_same_item_empty(self, football_kg):
        assert football_kg.shortest_paths("E1", "E1") == set()

    def test_shortest_paths_disconnected(self):
        kg = make_kg(
            [
                {"id": "a", "kind": "entity", "label": "a"},
                {"id": "b", "kind": "entity", "label": "b"},
            ],
            [],
        )
        assert kg.shortest_paths("a", "b") == set()


class TestVerbalize:
    def test_fact_with_qualifiers(self, football_kg):
        assert verbalize_fact(football_kg.facts["f1"]) == (
            "Cristiano Ronaldo member of sports team Real Madrid "
            "and start time 01-07-2009 and end time 10-07-2018."
        )

    def test_plain_fact(self, football_kg):
        assert (
            verbalize_fact(football_kg.facts["f3"])
            == "Cristiano Ronaldo member of sports team Manchester United."
        )

    def test_path_concatenates(self, football_kg):
        (path,) = football_kg.shortest_paths("E2", "E3")
        text = verbalize_path(path, football_kg)
        assert text.count(".") == 2
        assert "Real Madrid" in text and "Juventus" in text
