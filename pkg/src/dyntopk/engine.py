"""Continuous top-k engine: query, item and event processing.

Two event-matching strategies are available:

``naive``  every event re-matches its item against the query index.
``rrts``   each item caches the candidate queries it could reach within a
           threshold window of extra feedback; events only probe that list
           and go back to the query index once the window is exhausted.

Both keep every query's result identical to a brute-force re-ranking.
"""

from __future__ import annotations

import bisect
import math
import time
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Set, Tuple

from . import candidates as cand
from .model import Event, Item, Query, ScoreConfig, StreamError, rank_key
from .planner import ProbeRunStats, Zero, score_cap, theta_for_item
from .qindex import ItemIndex, QueryIndex

MODES = ("naive", "rrts")

# relative slack added to a refreshed window so that float rounding in
# refresh * theta can never trigger a spurious extra refresh
WINDOW_PAD = 1e-9


@dataclass(frozen=True)
class ResultDelta:
    query: str
    inserted: str
    evicted: Optional[str]
    ts: float


@dataclass
class Metrics:
    queries: int = 0
    items: int = 0
    events: int = 0
    zero_events: int = 0
    ih_item_matches: int = 0
    ih_event_matches: int = 0
    refreshes: int = 0
    eh_matches: int = 0
    eh_probes: int = 0
    eh_list_entries: int = 0
    result_updates: int = 0
    evictions: int = 0
    candidate_inserts: int = 0
    candidate_prunes: int = 0
    reorders: int = 0
    refresh_per_item: Dict[str, int] = field(default_factory=lambda: defaultdict(int))

    @property
    def ih_invocations(self) -> int:
        return self.ih_item_matches + self.ih_event_matches + self.refreshes

    @property
    def visited_fraction(self) -> float:
        if not self.eh_list_entries:
            return 0.0
        return self.eh_probes / self.eh_list_entries


class Engine:
    def __init__(
        self,
        cfg: Optional[ScoreConfig] = None,
        mode: str = "rrts",
        variant: str = "itempart",
        theta_strategy=None,
        *,
        prune: bool = True,
        cumulative_refresh: bool = False,
        drop_stale: bool = False,
        delta_sink: Optional[Callable[[ResultDelta], None]] = None,
        stats: Optional[ProbeRunStats] = None,
    ):
        if mode not in MODES:
            raise ValueError(f"unknown mode {mode!r}")
        if mode == "rrts" and variant not in cand.VARIANTS:
            raise ValueError(f"unknown candidate index {variant!r}")
        self.cfg = cfg or ScoreConfig()
        self.mode = mode
        self.variant = variant if mode == "rrts" else None
        self.theta_strategy = theta_strategy if theta_strategy is not None else Zero()
        self.cumulative_refresh = cumulative_refresh
        self.drop_stale = drop_stale
        self.delta_sink = delta_sink
        self.stats = stats
        self.queries: Dict[str, Query] = {}
        self.items: Dict[str, Item] = {}
        self.qindex = QueryIndex(prune=prune)
        self.iindex = ItemIndex()
        # item id -> candidate list (only items whose list has been built)
        self.cands: Dict[str, cand.CandidateList] = {}
        # query id -> items where the query is a candidate
        self.reverse: Dict[str, Set[str]] = defaultdict(set)
        self.metrics = Metrics()
        self.now = 0.0
        self._tracks_qmin = mode == "rrts" and variant in ("exhaustive", "itempart")
        self._event_counts: Dict[str, int] = defaultdict(int)

    # -- public processing ------------------------------------------------

    def process(self, record) -> None:
        """Dispatch a Query, Item or Event."""
        if isinstance(record, Event):
            self.process_event(record)
        elif isinstance(record, Item):
            self.process_item(record)
        elif isinstance(record, Query):
            self.process_query(record)
        else:
            raise TypeError(f"cannot process {type(record).__name__}")

    def process_query(self, q: Query) -> None:
        if q.id in self.queries:
            raise StreamError(f"duplicate query id {q.id!r}")
        self.now = q.ts
        q.result = []
        self.queries[q.id] = q
        self.qindex.add_query(q)
        self.metrics.queries += 1
        ranked = self.iindex.ranked(q, self.cfg)
        top, rest = ranked[: q.k], ranked[q.k :]
        for key, item, sr in top:
            q.result.append(key)
            item.active_queries[q.id] = sr
            self._emit(q.id, item.id, None)
        self.metrics.result_updates += len(top)
        self.qindex.update_qmin(q, q.qmin)
        if self.mode == "rrts" and rest:
            # items whose window already covers this query have to list it
            barrier = q.barrier
            gamma = self.cfg.gamma
            for _, item, sr in rest:
                lst = self.cands.get(item.id)
                if lst is None:
                    continue
                wkey = rank_key((sr + gamma * item.window) + item.offset, item.ts, item.id)
                if wkey < barrier:
                    lst.insert(self._entry(q, item, sr))
                    self.reverse[q.id].add(item.id)
                    self.metrics.candidate_inserts += 1

    def process_item(self, item: Item) -> None:
        if item.id in self.items:
            raise StreamError(f"duplicate item id {item.id!r}")
        self.now = item.ts
        item.offset = self.cfg.landmark_offset(item.ts)
        item.active_queries = {}
        self.items[item.id] = item
        self.iindex.add_item(item)
        self.metrics.items += 1
        t0 = time.perf_counter() if self.stats is not None else 0.0
        matches = self.qindex.match_item(item, item.dyn, self.cfg)
        if self.stats is not None:
            self.stats.match_times.append(time.perf_counter() - t0)
        self.metrics.ih_item_matches += 1
        for q, sr in matches:
            self.add_result(q, item, sr)
        if self.mode == "rrts":
            item.theta = theta_for_item(item, self.theta_strategy)
            item.cap = score_cap(item, self.theta_strategy)
            item.refresh = 0
            item.window = item.dyn

    def process_event(self, e: Event) -> None:
        item = self.items.get(e.target)
        if item is None:
            raise StreamError(f"event {e.id!r} targets unknown item {e.target!r}")
        self.now = e.ts
        self.metrics.events += 1
        self._event_counts[item.id] += 1
        if e.score == 0:
            self.metrics.zero_events += 1
            return
        old_dyn = item.dyn
        item.dyn += e.score
        self.iindex.update_item(item)
        self._reorder_actives(item, old_dyn)
        if self.mode == "naive":
            matches = self.qindex.match_item(item, item.dyn, self.cfg, exclude=item.active_queries)
            self.metrics.ih_event_matches += 1
            for q, sr in matches:
                self.add_result(q, item, sr)
            return
        lst = self.cands.get(item.id)
        if lst is None or item.dyn > item.window:
            # the new list holds no query the item beats already
            for q, sr in self.refresh_candidates(item):
                self.add_result(q, item, sr)
            return
        if not len(lst):
            return
        hits = self._match_event(item, lst)
        for qid in hits:
            self.add_result(self.queries[qid], item, lst.static_raw[qid])

    # -- candidate maintenance --------------------------------------------

    def refresh_candidates(self, item: Item) -> List[Tuple[Query, float]]:
        """Rebuild the candidate list of ``item`` from the query index.

        Queries the item beats at its current score are returned instead of
        listed; the caller publishes them.
        """
        theta = item.theta
        if theta > 0:
            base = item.refresh if self.cumulative_refresh else 0
            r = base + math.floor(item.dyn / theta) + 1
            while r * theta <= item.dyn:
                r += 1
            item.refresh = r
            window = r * theta
            item.window = window + WINDOW_PAD * max(1.0, window)
            # no candidates beyond the final score the item will ever reach
            if item.dyn <= item.cap < item.window:
                item.window = item.cap
        else:
            item.window = item.dyn
        stats = self.stats
        t0 = time.perf_counter() if stats is not None else 0.0
        matches = self.qindex.match_item(item, item.window, self.cfg, exclude=item.active_queries)
        t1 = time.perf_counter() if stats is not None else 0.0
        old = self.cands.get(item.id)
        if old is not None:
            for qid in old:
                self.reverse[qid].discard(item.id)
        entry = self._entry
        gd = self.cfg.gamma * item.dyn
        off = item.offset
        nts = -item.ts
        iid = item.id
        hits, entries = [], []
        for q, sr in matches:
            res = q.result
            if len(res) < q.k or (-((sr + gd) + off), nts, iid) < res[-1]:
                hits.append((q, sr))
            else:
                entries.append(entry(q, item, sr))
                self.reverse[q.id].add(iid)
        lst = cand.build(entries, self.variant, self.cfg.gamma)
        self.cands[iid] = lst
        if stats is not None:
            t2 = time.perf_counter()
            stats.match_times.append(t1 - t0)
            stats.refreshes.append((theta, len(lst), t2 - t1))
        self.metrics.refreshes += 1
        self.metrics.refresh_per_item[item.id] += 1
        return hits

    def _entry(self, q: Query, item: Item, sr: float) -> cand.CandidateEntry:
        res = q.result
        if len(res) < q.k:
            return cand.CandidateEntry(q.id, 0.0 - (sr + item.offset), None, 0.0, sr)
        kth = res[-1]
        return cand.CandidateEntry(q.id, -kth[0] - (sr + item.offset), kth[2], self.items[kth[2]].dyn, sr)

    def _match_event(self, item: Item, lst: cand.CandidateList) -> List[str]:
        queries = self.queries
        srs = lst.static_raw
        gamma = self.cfg.gamma
        gd = gamma * item.dyn
        off = item.offset
        nts = -item.ts
        iid = item.id
        drop = self.drop_stale
        gw = gamma * item.window

        def probe(qid):
            q = queries[qid]
            res = q.result
            if len(res) < q.k:
                return cand.UPDATE
            sr = srs[qid]
            if (-((sr + gd) + off), nts, iid) < res[-1]:
                return cand.UPDATE
            if drop and not (-((sr + gw) + off), nts, iid) < res[-1]:
                return cand.STALE
            return cand.NO_UPDATE

        def live_diff(qid):
            return queries[qid].qmin - (srs[qid] + off)

        items = self.items

        def dyn_of(iid_):
            return items[iid_].dyn

        before = lst.visited
        stats = self.stats
        t0 = time.perf_counter() if stats is not None else 0.0
        self.metrics.eh_list_entries += len(lst)
        self.metrics.eh_matches += 1
        hits = lst.match_event(
            item.dyn,
            probe,
            gamma=gamma,
            eps=1e-9 * (2.0 + abs(off) + gd),
            live_diff=live_diff,
            dyn_of=dyn_of,
        )
        probes = lst.visited - before
        if stats is not None:
            stats.probe_time += time.perf_counter() - t0
            stats.probes += probes
        self.metrics.eh_probes += probes
        if lst.dropped:
            for qid in lst.dropped:
                self.reverse[qid].discard(iid)
            lst.dropped.clear()
        return hits

    # -- result maintenance -----------------------------------------------

    def add_result(self, q: Query, item: Item, sr: float) -> None:
        """Publish ``item`` in ``q`` (caller has checked that it beats the k-th)."""
        res = q.result
        old_kth = res[-1] if len(res) >= q.k else None
        key = rank_key((sr + self.cfg.gamma * item.dyn) + item.offset, item.ts, item.id)
        bisect.insort(res, key)
        item.active_queries[q.id] = sr
        lst = self.cands.get(item.id)
        if lst is not None and q.id in lst:
            lst.remove(q.id)
            self.reverse[q.id].discard(item.id)
        evicted = None
        if len(res) > q.k:
            ev_key = res.pop()
            evicted = self.items[ev_key[2]]
            ev_sr = evicted.active_queries.pop(q.id)
            self.metrics.evictions += 1
        self.metrics.result_updates += 1
        new_kth = res[-1] if len(res) >= q.k else None
        if evicted is not None:
            ev_list = self.cands.get(evicted.id)
            if ev_list is not None:
                wkey = rank_key(
                    (ev_sr + self.cfg.gamma * evicted.window) + evicted.offset, evicted.ts, evicted.id
                )
                if wkey < new_kth:
                    ev_list.insert(self._entry(q, evicted, ev_sr))
                    self.reverse[q.id].add(evicted.id)
                    self.metrics.candidate_inserts += 1
        if new_kth != old_kth:
            self._barrier_moved(q, old_kth, new_kth)
        self._emit(q.id, item.id, evicted.id if evicted is not None else None)

    def _reorder_actives(self, item: Item, old_dyn: float) -> None:
        """Re-sort the results that already publish ``item`` after its score grew."""
        gamma = self.cfg.gamma
        gd_old = gamma * old_dyn
        gd = gamma * item.dyn
        off = item.offset
        iid = item.id
        nts = -item.ts
        queries = self.queries
        floors = self.qindex.floors
        reposition = self.variant == "exhaustive"
        for qid, sr in item.active_queries.items():
            q = queries[qid]
            res = q.result
            landmark = (sr + gd) + off
            new_key = (-landmark, nts, iid)
            if len(res) == 1:
                old_key = res[0]
                res[0] = new_key
                if q.k == 1:
                    if reposition:
                        self._barrier_moved(q, old_key, new_key)
                    else:
                        floors[q.slot] = landmark
                continue
            old_key = (-((sr + gd_old) + off), nts, iid)
            pos = bisect.bisect_left(res, old_key)
            if pos == len(res) or res[pos][2] != iid:
                pos = next(j for j, key in enumerate(res) if key[2] == iid)
                old_key = res[pos]
            new_pos = bisect.bisect_left(res, new_key, 0, pos)
            if new_pos == pos:
                res[pos] = new_key
            else:
                del res[pos]
                res.insert(new_pos, new_key)
            # only the k-th entry moving changes the barrier
            if pos == q.k - 1:
                new_kth = res[-1]
                if new_kth[2] == iid and not reposition:
                    floors[q.slot] = -new_kth[0]
                else:
                    self._barrier_moved(q, old_key, new_kth)
        self.metrics.reorders += len(item.active_queries)

    def _barrier_moved(self, q: Query, old_kth, new_kth) -> None:
        self.qindex.update_qmin(q, q.qmin)
        if not self._tracks_qmin:
            return
        where = self.reverse.get(q.id)
        if not where:
            return
        kth_changed = old_kth is None or new_kth is None or old_kth[2] != new_kth[2]
        if self.variant == "itempart" and not kth_changed:
            return
        # barriers only rise, so an item that cannot pass this one even at
        # the top of its window stays useless to q until its next refresh
        gamma = self.cfg.gamma
        items = self.items
        cands = self.cands
        qid = q.id
        if new_kth is None:
            qmin, kth_id, kth_dyn = 0.0, None, 0.0
        else:
            qmin, kth_id = -new_kth[0], new_kth[2]
            kth_dyn = items[kth_id].dyn
        gone = []
        for iid in where:
            item = items[iid]
            lst = cands[iid]
            sr = lst.static_raw[qid]
            if new_kth is not None and not ((-((sr + gamma * item.window) + item.offset), -item.ts, iid) < new_kth):
                lst.remove(qid)
                gone.append(iid)
            else:
                entry = cand.CandidateEntry(qid, qmin - (sr + item.offset), kth_id, kth_dyn, sr)
                lst.on_qmin_change(entry, kth_changed)
        if gone:
            where.difference_update(gone)
            self.metrics.candidate_prunes += len(gone)

    def _emit(self, qid: str, inserted: str, evicted: Optional[str]) -> None:
        if self.delta_sink is not None:
            self.delta_sink(ResultDelta(qid, inserted, evicted, self.now))

    # -- inspection -------------------------------------------------------

    def snapshot(self) -> Dict[str, List[Tuple[str, float]]]:
        return {qid: q.ranking() for qid, q in self.queries.items()}

    def event_counts(self) -> Dict[str, int]:
        return dict(self._event_counts)

    def finish_stats(self) -> None:
        """Record per-item final scores into the attached calibration stats."""
        if self.stats is None:
            return
        counts = self._event_counts
        self.stats.items = [(it.dyn, counts.get(it.id, 0)) for it in self.items.values()]

    def candidate_count(self) -> int:
        return sum(len(lst) for lst in self.cands.values())

    def check_invariants(self) -> None:
        """Assert internal consistency; used by tests, cheap enough for small streams."""
        for qid, q in self.queries.items():
            assert q.result == sorted(q.result), qid
            assert len(q.result) <= q.k
            ids = [key[2] for key in q.result]
            assert len(set(ids)) == len(ids)
            for iid in ids:
                assert qid in self.items[iid].active_queries
            assert self.qindex.floor(qid) == q.qmin, qid
        for iid, lst in self.cands.items():
            active = self.items[iid].active_queries
            for qid in lst:
                assert qid not in active, (iid, qid)
                assert iid in self.reverse[qid], (iid, qid)
        for qid, where in self.reverse.items():
            for iid in where:
                assert qid in self.cands[iid], (qid, iid)
