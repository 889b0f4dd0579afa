"""Per-item candidate query lists for event matching.

A candidate of item ``i`` is a query that does not publish ``i`` yet but
would if ``i`` collected enough additional feedback inside its threshold
window. Each entry remembers ``stored_diff``: the query's minimum score minus
the item's score without feedback, i.e. how much weighted dynamic score the
item needs. Minimum scores only grow, so a stored diff is always a lower
bound of the live one, which is what makes the stopping conditions safe.

Five organisations trade maintenance cost against pruning power:

``simple``      unordered array, every entry probed
``static``      sorted once at build time, later inserts go in front
``lazy``        sorted, false positives re-sorted when they are hit
``exhaustive``  sorted by the live diff at all times
``itempart``    one sorted group per k-th result item of the query
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass
from typing import Callable, Dict, Iterable, List, Optional, Tuple

UPDATE = 1
NO_UPDATE = 0
# probe outcome for a query beyond the item's window (only with drop_stale)
STALE = -1

VARIANTS = ("simple", "static", "lazy", "exhaustive", "itempart")

Probe = Callable[[str], int]


@dataclass(slots=True)
class CandidateEntry:
    query_id: str
    stored_diff: float
    kth_item: Optional[str] = None
    # dynamic score of the k-th item when stored_diff was computed
    kth_dyn: float = 0.0
    static_raw: float = 0.0


class CandidateList:
    variant = ""
    # whether the engine must report minimum-score changes
    tracks_qmin = False

    def __init__(self, entries: Iterable[CandidateEntry] = (), gamma: float = 0.4):
        self.gamma = gamma
        self.static_raw: Dict[str, float] = {}
        self.visited = 0
        self.size_seen = 0
        self.matches = 0
        self.dropped: List[str] = []
        self._build(list(entries))

    def __len__(self) -> int:
        return len(self.static_raw)

    def __contains__(self, query_id: str) -> bool:
        return query_id in self.static_raw

    def __iter__(self):
        return iter(self.static_raw)

    def _build(self, entries: List[CandidateEntry]) -> None:
        raise NotImplementedError

    def insert(self, entry: CandidateEntry) -> None:
        if entry.query_id in self.static_raw:
            raise ValueError(f"query {entry.query_id!r} is already a candidate")
        self.static_raw[entry.query_id] = entry.static_raw
        self._insert(entry)

    def remove(self, query_id: str) -> None:
        if query_id not in self.static_raw:
            return
        self._remove(query_id)
        del self.static_raw[query_id]

    def on_qmin_change(self, entry: CandidateEntry, kth_changed: bool) -> None:
        """Called with a freshly computed entry after the query's minimum moved."""

    def match_event(
        self,
        dyn_now: float,
        probe: Probe,
        *,
        gamma: float,
        eps: float = 1e-9,
        live_diff: Optional[Callable[[str], float]] = None,
        dyn_of: Optional[Callable[[str], float]] = None,
    ) -> List[str]:
        """Query ids whose result the item now enters, in probe order."""
        if not self.static_raw:
            return []
        self.matches += 1
        self.size_seen += len(self.static_raw)
        return self._match(dyn_now, probe, gamma, eps, live_diff, dyn_of)

    def _match(self, dyn_now, probe, gamma, eps, live_diff, dyn_of) -> List[str]:
        raise NotImplementedError

    def ordered(self) -> List[Tuple[str, float]]:
        """Entries in traversal order as ``(query id, stored diff)``."""
        raise NotImplementedError

    def _forget(self, ids: Iterable[str]) -> None:
        for qid in ids:
            self.static_raw.pop(qid, None)


class SimpleList(CandidateList):
    variant = "simple"

    def _build(self, entries):
        self._ids: List[str] = []
        self._pos: Dict[str, int] = {}
        self._diff: Dict[str, float] = {}
        for e in entries:
            self.static_raw[e.query_id] = e.static_raw
            self._insert(e)

    def _insert(self, entry):
        self._pos[entry.query_id] = len(self._ids)
        self._ids.append(entry.query_id)
        self._diff[entry.query_id] = entry.stored_diff

    def _remove(self, query_id):
        pos = self._pos.pop(query_id)
        last = self._ids.pop()
        if last != query_id:
            self._ids[pos] = last
            self._pos[last] = pos
        del self._diff[query_id]

    def _match(self, dyn_now, probe, gamma, eps, live_diff, dyn_of):
        hits = []
        stale = []
        for qid in self._ids:
            outcome = probe(qid)
            if outcome == UPDATE:
                hits.append(qid)
            elif outcome == STALE:
                stale.append(qid)
        self.visited += len(self._ids)
        for qid in stale:
            self.remove(qid)
        self.dropped.extend(stale)
        return hits

    def ordered(self):
        return [(qid, self._diff[qid]) for qid in self._ids]


class _SortedStore:
    """Ascending ``(diff, query id)`` pairs with O(log n) lookup by id."""

    __slots__ = ("pairs", "diff")

    def __init__(self):
        self.pairs: List[Tuple[float, str]] = []
        self.diff: Dict[str, float] = {}

    def load(self, items: Iterable[Tuple[float, str]]) -> None:
        self.pairs = sorted(items)
        self.diff = {qid: d for d, qid in self.pairs}

    def add(self, diff: float, qid: str) -> None:
        bisect.insort(self.pairs, (diff, qid))
        self.diff[qid] = diff

    def discard(self, qid: str) -> bool:
        d = self.diff.pop(qid, None)
        if d is None:
            return False
        pos = bisect.bisect_left(self.pairs, (d, qid))
        del self.pairs[pos]
        return True

    def __len__(self):
        return len(self.pairs)


def _walk_sorted(pairs, limit, probe, eps, stop_on_miss):
    """Probe a sorted prefix; returns (probed count, hits, misses, stale).

    The walk ends at the first diff above ``limit``. With ``stop_on_miss`` it
    also ends after a NO_UPDATE probe, except that entries whose diff lies
    within ``eps`` of the miss are still probed: those are ties whose
    rounding-level order says nothing about the outcome.
    """
    hits, misses, stale = [], [], []
    band = None
    n = 0
    for diff, qid in pairs:
        if diff > limit or (band is not None and diff > band):
            break
        n += 1
        outcome = probe(qid)
        if outcome == UPDATE:
            hits.append(qid)
        else:
            (stale if outcome == STALE else misses).append(qid)
            if stop_on_miss and band is None:
                band = diff + eps
    return n, hits, misses, stale


class StaticList(CandidateList):
    variant = "static"

    def _build(self, entries):
        self._front: List[str] = []
        self._front_diff: Dict[str, float] = {}
        self._sorted = _SortedStore()
        self._sorted.load((e.stored_diff, e.query_id) for e in entries)
        for e in entries:
            self.static_raw[e.query_id] = e.static_raw

    def _insert(self, entry):
        # later arrivals go to the front regardless of their diff
        self._front.append(entry.query_id)
        self._front_diff[entry.query_id] = entry.stored_diff

    def _remove(self, query_id):
        if query_id in self._front_diff:
            del self._front_diff[query_id]
            self._front.remove(query_id)
        else:
            self._sorted.discard(query_id)

    def _match(self, dyn_now, probe, gamma, eps, live_diff, dyn_of):
        hits, stale = [], []
        for qid in reversed(self._front):
            outcome = probe(qid)
            if outcome == UPDATE:
                hits.append(qid)
            elif outcome == STALE:
                stale.append(qid)
        n, shits, _, sstale = _walk_sorted(self._sorted.pairs, gamma * dyn_now + eps, probe, eps, False)
        self.visited += len(self._front) + n
        hits.extend(shits)
        stale.extend(sstale)
        for qid in stale:
            self.remove(qid)
        self.dropped.extend(stale)
        return hits

    def ordered(self):
        front = [(qid, self._front_diff[qid]) for qid in reversed(self._front)]
        return front + [(qid, d) for d, qid in self._sorted.pairs]


class LazyList(CandidateList):
    variant = "lazy"

    def _build(self, entries):
        self._sorted = _SortedStore()
        self._sorted.load((e.stored_diff, e.query_id) for e in entries)
        for e in entries:
            self.static_raw[e.query_id] = e.static_raw

    def _insert(self, entry):
        self._sorted.add(entry.stored_diff, entry.query_id)

    def _remove(self, query_id):
        self._sorted.discard(query_id)

    def _match(self, dyn_now, probe, gamma, eps, live_diff, dyn_of):
        store = self._sorted
        n, hits, misses, stale = _walk_sorted(store.pairs, gamma * dyn_now + eps, probe, eps, False)
        self.visited += n
        if misses or stale:
            # false positives move to the position of their live diff
            hit_set = set(hits)
            store.pairs[:n] = [p for p in store.pairs[:n] if p[1] in hit_set]
            for qid in misses:
                del store.diff[qid]
                store.add(live_diff(qid), qid)
            for qid in stale:
                del store.diff[qid]
            self._forget(stale)
            self.dropped.extend(stale)
        return hits

    def ordered(self):
        return [(qid, d) for d, qid in self._sorted.pairs]


class ExhaustiveList(CandidateList):
    variant = "exhaustive"
    tracks_qmin = True

    def _build(self, entries):
        self._sorted = _SortedStore()
        self._sorted.load((e.stored_diff, e.query_id) for e in entries)
        for e in entries:
            self.static_raw[e.query_id] = e.static_raw

    def _insert(self, entry):
        self._sorted.add(entry.stored_diff, entry.query_id)

    def _remove(self, query_id):
        self._sorted.discard(query_id)

    def on_qmin_change(self, entry, kth_changed):
        if self._sorted.discard(entry.query_id):
            self._sorted.add(entry.stored_diff, entry.query_id)

    def _match(self, dyn_now, probe, gamma, eps, live_diff, dyn_of):
        store = self._sorted
        n, hits, _, stale = _walk_sorted(store.pairs, gamma * dyn_now + eps, probe, eps, True)
        self.visited += n
        for qid in stale:
            self.remove(qid)
        self.dropped.extend(stale)
        return hits

    def ordered(self):
        return [(qid, d) for d, qid in self._sorted.pairs]


class ItemPartList(CandidateList):
    """Candidates grouped by the k-th result item of their query.

    All members of a group share their k-th item ``x``, so their live diffs
    are ``norm + gamma * dyn(x)`` with a per-member constant ``norm``: the
    order inside a group never changes until a member's k-th item does.
    """

    variant = "itempart"
    tracks_qmin = True

    def _build(self, entries):
        self._groups: Dict[Optional[str], _SortedStore] = {}
        self._where: Dict[str, Optional[str]] = {}
        buckets: Dict[Optional[str], List[Tuple[float, str]]] = {}
        for e in entries:
            self.static_raw[e.query_id] = e.static_raw
            buckets.setdefault(e.kth_item, []).append((self._norm(e), e.query_id))
            self._where[e.query_id] = e.kth_item
        for kth, pairs in buckets.items():
            store = _SortedStore()
            store.load(pairs)
            self._groups[kth] = store

    def _norm(self, e: CandidateEntry) -> float:
        if e.kth_item is None:
            return e.stored_diff
        return e.stored_diff - self.gamma * e.kth_dyn

    def _insert(self, entry):
        store = self._groups.get(entry.kth_item)
        if store is None:
            store = self._groups[entry.kth_item] = _SortedStore()
        store.add(self._norm(entry), entry.query_id)
        self._where[entry.query_id] = entry.kth_item

    def _remove(self, query_id):
        kth = self._where.pop(query_id)
        store = self._groups[kth]
        store.discard(query_id)
        if not store.pairs:
            del self._groups[kth]

    def on_qmin_change(self, entry, kth_changed):
        if kth_changed and entry.query_id in self._where:
            self._remove(entry.query_id)
            self._insert(entry)

    def groups(self) -> Dict[Optional[str], List[Tuple[str, float]]]:
        return {kth: [(qid, d) for d, qid in store.pairs] for kth, store in self._groups.items()}

    def _match(self, dyn_now, probe, gamma, eps, live_diff, dyn_of):
        hits, stale = [], []
        visited = 0
        gd = gamma * dyn_now
        for kth, store in self._groups.items():
            if kth is None:
                limit = float("inf")
                n, h, _, s = _walk_sorted(store.pairs, limit, probe, eps, False)
            else:
                limit = gd - gamma * dyn_of(kth) + eps
                if store.pairs[0][0] > limit:
                    continue
                n, h, _, s = _walk_sorted(store.pairs, limit, probe, eps, True)
            visited += n
            hits.extend(h)
            stale.extend(s)
        self.visited += visited
        for qid in stale:
            self.remove(qid)
        self.dropped.extend(stale)
        return hits

    def ordered(self):
        out = []
        for store in self._groups.values():
            out.extend((qid, d) for d, qid in store.pairs)
        return out


_CLASSES = {
    cls.variant: cls for cls in (SimpleList, StaticList, LazyList, ExhaustiveList, ItemPartList)
}


def build(entries: Iterable[CandidateEntry], variant: str, gamma: float = 0.4) -> CandidateList:
    """Create the candidate list of one item in the requested organisation."""
    try:
        cls = _CLASSES[variant]
    except KeyError:
        raise ValueError(f"unknown candidate index {variant!r}; choose from {', '.join(VARIANTS)}") from None
    return cls(entries, gamma=gamma)
