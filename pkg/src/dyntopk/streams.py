"""Line-delimited JSON stream files: records, validation, filtering, stats."""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass
from typing import Dict, Iterable, Iterator, List, Optional, Tuple, Union

from .model import Event, Item, Query, StreamError, TermProfile

Terms = Tuple[Tuple[str, float], ...]


@dataclass(frozen=True)
class QueryRec:
    id: str
    ts: float
    terms: Terms
    k: int = 1

    def to_model(self) -> Query:
        return Query(self.id, TermProfile(self.terms), self.k, self.ts)


@dataclass(frozen=True)
class ItemRec:
    id: str
    ts: float
    terms: Terms
    static: float = 0.0

    def to_model(self) -> Item:
        return Item(self.id, TermProfile(self.terms), self.static, self.ts)


@dataclass(frozen=True)
class EventRec:
    id: str
    ts: float
    target: str
    score: float = 1.0

    def to_model(self) -> Event:
        return Event(self.id, self.target, self.score, self.ts)


StreamRecord = Union[QueryRec, ItemRec, EventRec]

_FIELDS = {
    "query": {"type", "id", "ts", "terms", "k"},
    "item": {"type", "id", "ts", "terms", "static"},
    "event": {"type", "id", "ts", "target", "score"},
}


class ParseError(StreamError):
    def __init__(self, message: str, lineno: Optional[int] = None):
        self.lineno = lineno
        super().__init__(f"line {lineno}: {message}" if lineno is not None else message)


def _number(obj, name, lineno) -> float:
    value = obj[name]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ParseError(f"field {name!r} must be a number", lineno)
    value = float(value)
    if math.isnan(value):
        raise ParseError(f"field {name!r} is NaN", lineno)
    return value


def _terms(obj, lineno) -> Terms:
    raw = obj["terms"]
    if not isinstance(raw, list):
        raise ParseError("field 'terms' must be an array", lineno)
    out = []
    seen = set()
    for entry in raw:
        if not isinstance(entry, dict) or set(entry) != {"t", "w"}:
            raise ParseError("terms entries must be objects {t, w}", lineno)
        t, w = entry["t"], entry["w"]
        if not isinstance(t, str) or not t:
            raise ParseError("term must be a non-empty string", lineno)
        if isinstance(w, bool) or not isinstance(w, (int, float)) or not (0 < w < math.inf):
            raise ParseError(f"weight of term {t!r} must be a positive number", lineno)
        if t in seen:
            raise ParseError(f"term {t!r} repeated", lineno)
        seen.add(t)
        out.append((t, float(w)))
    return tuple(out)


def parse_record(line: str, lineno: Optional[int] = None) -> StreamRecord:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed JSON ({exc.msg})", lineno) from None
    if not isinstance(obj, dict):
        raise ParseError("record must be a JSON object", lineno)
    kind = obj.get("type")
    if kind not in _FIELDS:
        raise ParseError(f"unknown record type {kind!r}", lineno)
    expected = _FIELDS[kind]
    if set(obj) != expected:
        missing = expected - set(obj)
        extra = set(obj) - expected
        detail = []
        if missing:
            detail.append("missing " + ", ".join(sorted(missing)))
        if extra:
            detail.append("unexpected " + ", ".join(sorted(extra)))
        raise ParseError(f"{kind} record: " + "; ".join(detail), lineno)
    rid = obj["id"]
    if not isinstance(rid, str) or not rid:
        raise ParseError("field 'id' must be a non-empty string", lineno)
    ts = _number(obj, "ts", lineno)
    if ts < 0 or math.isinf(ts):
        raise ParseError("ts must be a finite non-negative number", lineno)
    if kind == "query":
        k = obj["k"]
        if isinstance(k, bool) or not isinstance(k, int) or k < 1:
            raise ParseError("k must be a positive integer", lineno)
        return QueryRec(rid, ts, _terms(obj, lineno), k)
    if kind == "item":
        static = _number(obj, "static", lineno)
        if not 0.0 <= static <= 1.0:
            raise ParseError(f"static quality {static} outside [0, 1]", lineno)
        return ItemRec(rid, ts, _terms(obj, lineno), static)
    target = obj["target"]
    if not isinstance(target, str) or not target:
        raise ParseError("field 'target' must be a non-empty string", lineno)
    score = _number(obj, "score", lineno)
    if not 0.0 <= score <= 1.0:
        raise ParseError(f"event score {score} outside [0, 1]", lineno)
    return EventRec(rid, ts, target, score)


def format_record(rec: StreamRecord) -> str:
    if isinstance(rec, QueryRec):
        obj = {"type": "query", "id": rec.id, "ts": rec.ts, "terms": _dump_terms(rec.terms), "k": rec.k}
    elif isinstance(rec, ItemRec):
        obj = {"type": "item", "id": rec.id, "ts": rec.ts, "terms": _dump_terms(rec.terms), "static": rec.static}
    elif isinstance(rec, EventRec):
        obj = {"type": "event", "id": rec.id, "ts": rec.ts, "target": rec.target, "score": rec.score}
    else:
        raise TypeError(f"not a stream record: {rec!r}")
    return json.dumps(obj, separators=(",", ":"))


def _dump_terms(terms: Terms):
    return [{"t": t, "w": w} for t, w in terms]


class StreamValidator:
    """Stateful checks across records: ts order, unique ids, known targets."""

    def __init__(self):
        self.last_ts = 0.0
        self.ids = {"query": set(), "item": set(), "event": set()}
        self.item_ts: Dict[str, float] = {}

    def check(self, rec: StreamRecord, lineno: Optional[int] = None) -> StreamRecord:
        if rec.ts < self.last_ts:
            raise ParseError(f"timestamp regression ({rec.ts} < {self.last_ts})", lineno)
        self.last_ts = rec.ts
        kind = "query" if isinstance(rec, QueryRec) else "item" if isinstance(rec, ItemRec) else "event"
        if rec.id in self.ids[kind]:
            raise ParseError(f"duplicate {kind} id {rec.id!r}", lineno)
        self.ids[kind].add(rec.id)
        if isinstance(rec, ItemRec):
            self.item_ts[rec.id] = rec.ts
        elif isinstance(rec, EventRec):
            if rec.target not in self.item_ts:
                raise ParseError(f"event {rec.id!r} targets unknown item {rec.target!r}", lineno)
        return rec


def iter_lines(lines: Iterable[str]) -> Iterator[StreamRecord]:
    validator = StreamValidator()
    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            continue
        yield validator.check(parse_record(line, lineno), lineno)


def read_stream(path: str) -> List[StreamRecord]:
    with open(path, encoding="utf-8") as fh:
        return list(iter_lines(fh))


def write_stream(path: str, records: Iterable[StreamRecord]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(format_record(rec))
            fh.write("\n")


def dumps(records: Iterable[StreamRecord]) -> str:
    return "".join(format_record(r) + "\n" for r in records)


def filter_min_events(records: Iterable[StreamRecord], min_events: int) -> List[StreamRecord]:
    """Keep items with at least ``min_events`` events (and those events); queries pass."""
    records = list(records)
    counts = Counter(r.target for r in records if isinstance(r, EventRec))
    keep = {r.id for r in records if isinstance(r, ItemRec) and counts[r.id] >= min_events}
    out = []
    for r in records:
        if isinstance(r, QueryRec):
            out.append(r)
        elif isinstance(r, ItemRec):
            if r.id in keep:
                out.append(r)
        elif r.target in keep:
            out.append(r)
    return out


def event_totals(records: Iterable[StreamRecord]) -> Dict[str, float]:
    """Final aggregated event score per item: the exact per-item threshold maximum."""
    totals: Dict[str, float] = {}
    for r in records:
        if isinstance(r, ItemRec):
            totals.setdefault(r.id, 0.0)
        elif isinstance(r, EventRec):
            totals[r.target] = totals.get(r.target, 0.0) + r.score
    return totals


def stream_stats(records: Iterable[StreamRecord]) -> Dict[str, float]:
    n_q = n_i = n_e = 0
    counts: Counter = Counter()
    items = []
    for r in records:
        if isinstance(r, QueryRec):
            n_q += 1
        elif isinstance(r, ItemRec):
            n_i += 1
            items.append(r.id)
        else:
            n_e += 1
            counts[r.target] += 1
    per_item = [counts[i] for i in items]
    return {
        "queries": n_q,
        "items": n_i,
        "events": n_e,
        "min_events_per_item": min(per_item) if per_item else 0,
        "avg_events_per_item": (sum(per_item) / len(per_item)) if per_item else 0.0,
    }


def format_kv(values: Dict[str, object]) -> str:
    return "".join(f"{k}={v}\n" for k, v in values.items())
