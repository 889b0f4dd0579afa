"""Brute-force reference: every query re-ranked over every item after each record."""

from __future__ import annotations

from typing import Dict, List, Optional, Tuple

from .model import (
    Event,
    Item,
    Query,
    RankKey,
    ScoreConfig,
    StreamError,
    rank_key,
    static_part,
    text_score,
    to_landmark,
)

Snapshot = Dict[str, List[Tuple[str, float]]]


class OracleLimitError(RuntimeError):
    pass


class OracleState:
    """Problem-level definition of the continuous top-k results.

    No indexes and no candidate state: after each record every query's
    result is recomputed from the full item set.
    """

    def __init__(self, cfg: ScoreConfig, max_queries: int = 2000, max_records: int = 100_000, force: bool = False):
        self.cfg = cfg
        self.queries: Dict[str, Query] = {}
        self.items: Dict[str, Item] = {}
        self.dyn: Dict[str, float] = {}
        self.max_queries = max_queries
        self.max_records = max_records
        self.force = force
        self.records = 0
        # text scores are static; cached per (query, item) pair
        self._relevant: Dict[str, List[Tuple[Item, float]]] = {}
        self.keys: Dict[str, List[RankKey]] = {}

    def _guard(self):
        if self.force:
            return
        if self.records > self.max_records or len(self.queries) > self.max_queries:
            raise OracleLimitError(
                f"oracle refuses streams beyond {self.max_records} records / {self.max_queries} queries"
            )

    def step(self, rec) -> Dict[str, List[RankKey]]:
        self.records += 1
        if isinstance(rec, Query):
            if rec.id in self.queries:
                raise StreamError(f"duplicate query id {rec.id!r}")
            self.queries[rec.id] = rec
            self._relevant[rec.id] = [
                (it, t) for it in self.items.values() if (t := text_score(rec.terms, it.terms)) > 0.0
            ]
        elif isinstance(rec, Item):
            if rec.id in self.items:
                raise StreamError(f"duplicate item id {rec.id!r}")
            self.items[rec.id] = rec
            self.dyn[rec.id] = rec.dyn
            for qid, q in self.queries.items():
                t = text_score(q.terms, rec.terms)
                if t > 0.0:
                    self._relevant[qid].append((rec, t))
        elif isinstance(rec, Event):
            if rec.target not in self.items:
                raise StreamError(f"event {rec.id!r} targets unknown item {rec.target!r}")
            self.dyn[rec.target] += rec.score
        else:
            raise TypeError(f"cannot process {type(rec).__name__}")
        self._guard()
        self.keys = {qid: self._top(q) for qid, q in self.queries.items()}
        return self.keys

    def _top(self, q: Query) -> List[RankKey]:
        cfg = self.cfg
        dyn = self.dyn
        keys = []
        for it, text in self._relevant[q.id]:
            raw = static_part(text, it.static_quality, cfg) + cfg.gamma * dyn[it.id]
            keys.append(rank_key(to_landmark(raw, it.ts, cfg), it.ts, it.id))
        keys.sort()
        return keys[: q.k]

    def snapshot(self) -> Snapshot:
        return {qid: [(k[2], -k[0]) for k in keys] for qid, keys in self.keys.items()}


def diff_states(engine_snap: Snapshot, oracle_snap: Snapshot) -> List[str]:
    """One line per diverging query: first differing position, expected vs actual."""
    report = []
    for qid in sorted(set(engine_snap) | set(oracle_snap)):
        got = engine_snap.get(qid)
        want = oracle_snap.get(qid)
        if got == want:
            continue
        if got is None or want is None:
            report.append(f"query={qid} position=- expected={want!r} actual={got!r}")
            continue
        pos = next((n for n, (a, b) in enumerate(zip(got, want)) if a != b), min(len(got), len(want)))
        exp = want[pos] if pos < len(want) else None
        act = got[pos] if pos < len(got) else None
        report.append(f"query={qid} position={pos} expected={exp!r} actual={act!r}")
    return report


def first_divergence(engine_snap: Snapshot, oracle_snap: Snapshot) -> Optional[str]:
    report = diff_states(engine_snap, oracle_snap)
    return report[0] if report else None
