from __future__ import annotations

import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from dyntopk.streams import (
    EventRec,
    ItemRec,
    ParseError,
    QueryRec,
    dumps,
    event_totals,
    filter_min_events,
    format_kv,
    format_record,
    iter_lines,
    parse_record,
    read_stream,
    stream_stats,
    write_stream,
)
from dyntopk.workload import generate_workload, preset


def test_parse_event():
    rec = parse_record('{"type":"event","id":"e1","target":"i1","score":1.0,"ts":5.0}')
    assert rec == EventRec("e1", 5.0, "i1", 1.0)


@pytest.mark.parametrize(
    "line,fragment",
    [
        ('{"type":"item","id":"i","ts":0,"terms":[{"t":"a","w":1}],"static":1.5}', "static quality"),
        ('{"type":"event","id":"e","ts":0,"target":"i","score":2}', "event score"),
        ('{"type":"query","id":"q","ts":0,"terms":[{"t":"a","w":0}],"k":1}', "weight"),
        ('{"type":"query","id":"q","ts":0,"terms":[],"k":0}', "k must"),
        ('{"type":"retweet","id":"r","ts":0}', "unknown record type"),
        ('{"type":"event","id":"e","ts":0,"target":"i"}', "missing score"),
        ("{not json", "malformed"),
        ("[1, 2]", "JSON object"),
    ],
)
def test_parse_errors(line, fragment):
    with pytest.raises(ParseError, match=fragment):
        parse_record(line, 7)


def test_errors_carry_line_numbers():
    lines = [
        format_record(ItemRec("i", 2.0, (("a", 1.0),))),
        format_record(EventRec("e", 1.0, "i")),
    ]
    with pytest.raises(ParseError) as info:
        list(iter_lines(lines))
    assert info.value.lineno == 2 and "regression" in str(info.value)


def test_validator_rejects_unknown_targets_and_duplicates():
    with pytest.raises(ParseError, match="unknown item"):
        list(iter_lines([format_record(EventRec("e", 0.0, "ghost"))]))
    q = format_record(QueryRec("q", 0.0, (("a", 1.0),)))
    with pytest.raises(ParseError, match="duplicate"):
        list(iter_lines([q, q]))


terms = st.lists(
    st.tuples(st.text("abcxyz", min_size=1, max_size=4), st.floats(0.001, 100.0)),
    min_size=1,
    max_size=4,
    unique_by=lambda p: p[0],
).map(tuple)
ts = st.floats(0.0, 1e6, allow_nan=False)
records = st.one_of(
    st.builds(QueryRec, st.text("q0123", min_size=1, max_size=5), ts, terms, st.integers(1, 50)),
    st.builds(ItemRec, st.text("i0123", min_size=1, max_size=5), ts, terms, st.floats(0.0, 1.0)),
    st.builds(EventRec, st.text("e0123", min_size=1, max_size=5), ts, st.text("i01", min_size=1, max_size=3), st.floats(0.0, 1.0)),
)


@given(records)
def test_roundtrip(rec):
    assert parse_record(format_record(rec)) == rec


def test_file_roundtrip(tmp_path):
    recs = generate_workload(preset("ds5", n_queries=20, n_items=30, seed=2))
    path = tmp_path / "s.jsonl"
    write_stream(str(path), recs)
    assert read_stream(str(path)) == recs
    assert path.read_text() == dumps(recs)


def _small():
    t = (("a", 1.0),)
    return [
        QueryRec("q", 0.0, t),
        ItemRec("i1", 1.0, t),
        ItemRec("i2", 2.0, t),
        EventRec("e1", 3.0, "i1"),
        EventRec("e2", 4.0, "i2"),
        EventRec("e3", 5.0, "i2"),
    ]


def test_filter_identity_and_empty():
    recs = _small()
    assert filter_min_events(recs, 1) == recs
    assert filter_min_events(recs, 2) == [recs[0], recs[2], recs[4], recs[5]]
    assert filter_min_events(recs, 99) == [recs[0]]


def test_filter_raises_event_mean():
    recs = generate_workload(preset("ds1", n_queries=50, n_items=800, seed=4))
    before = stream_stats(recs)
    after = stream_stats(filter_min_events(recs, 5))
    assert after["items"] < 0.2 * before["items"]
    assert after["avg_events_per_item"] > before["avg_events_per_item"]
    assert after["min_events_per_item"] >= 5
    # the output is still a valid stream
    list(iter_lines(dumps(filter_min_events(recs, 5)).splitlines()))


def test_event_totals_and_stats():
    recs = _small()
    assert event_totals(recs) == {"i1": 1.0, "i2": 2.0}
    stats = stream_stats(recs)
    assert stats == {"queries": 1, "items": 2, "events": 3, "min_events_per_item": 1, "avg_events_per_item": 1.5}
    assert format_kv({"a": 1, "b": "x"}) == "a=1\nb=x\n"


def test_format_record_rejects_foreign_objects():
    with pytest.raises(TypeError):
        format_record({"type": "query"})
    assert json.loads(format_record(QueryRec("q", 0.0, (("a", 2.0),), 3)))["k"] == 3
