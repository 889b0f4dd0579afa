"""Inverted indexes over queries (item handler) and over items (query handler)."""

from __future__ import annotations

import math
from collections import defaultdict
from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np

from .model import Item, Query, ScoreConfig, StreamError, rank_key, static_part


class _Posting:
    """Query rows, term weights and query lengths of one term, plus cached arrays."""

    __slots__ = ("rows", "weights", "lens", "_arrays")

    def __init__(self):
        self.rows: List[int] = []
        self.weights: List[float] = []
        self.lens: List[int] = []
        self._arrays = None

    def append(self, row: int, weight: float, n: int) -> None:
        self.rows.append(row)
        self.weights.append(weight)
        self.lens.append(n)
        self._arrays = None

    def arrays(self):
        if self._arrays is None:
            self._arrays = (
                np.array(self.rows, dtype=np.int64),
                np.array(self.weights, dtype=np.float64),
                np.array(self.lens, dtype=np.int64),
            )
        return self._arrays

    def __len__(self) -> int:
        return len(self.rows)


class QueryIndex:
    """Term -> registered queries, answering "which queries does this item beat".

    Every query owns a row; ``floors[row]`` is its qmin as last reported
    through :meth:`update_qmin`. Scoring is exact; the floors only feed an
    upper-bound skip that never drops a query the item could beat.
    """

    def __init__(self, prune: bool = True):
        self.prune = prune
        self.postings: Dict[str, _Posting] = {}
        self.queries: Dict[str, Query] = {}
        self.rows: List[Query] = []
        self.floors = np.zeros(64)
        self.max_query_len = 0
        self.entries_scanned = 0

    def __len__(self) -> int:
        return len(self.queries)

    def add_query(self, q: Query) -> None:
        if q.id in self.queries:
            raise StreamError(f"duplicate query id {q.id!r}")
        self.queries[q.id] = q
        row = len(self.rows)
        if row == len(self.floors):
            self.floors = np.concatenate([self.floors, np.zeros(row)])
        self.rows.append(q)
        q.slot = row
        self.floors[row] = q.qmin
        n = len(q.terms)
        self.max_query_len = max(self.max_query_len, n)
        for term, weight in q.terms.items():
            posting = self.postings.get(term)
            if posting is None:
                posting = self.postings[term] = _Posting()
            posting.append(row, weight, n)

    def posting(self, term: str) -> List[Tuple[str, float, float]]:
        p = self.postings.get(term)
        if p is None:
            return []
        return [(self.rows[r].id, w, float(self.floors[r])) for r, w in zip(p.rows, p.weights)]

    def floor(self, query_id: str) -> float:
        return float(self.floors[self.queries[query_id].slot])

    def update_qmin(self, q: Query, new_qmin: float) -> None:
        old = self.floors[q.slot]
        if new_qmin < old:
            raise ValueError(f"qmin of {q.id} may not decrease ({old} -> {new_qmin})")
        self.floors[q.slot] = new_qmin

    def match_item(
        self,
        item: Item,
        dyn_override: float,
        cfg: ScoreConfig,
        exclude: Optional[Dict[str, float]] = None,
    ) -> List[Tuple[Query, float]]:
        """Queries whose result ``item`` enters when its dynamic score is ``dyn_override``.

        Returns ``(query, static_raw)`` pairs, where ``static_raw`` is the
        alpha/beta part of the item's score for that query. Queries in
        ``exclude`` (typically the item's active queries) are skipped.
        """
        gd = cfg.gamma * dyn_override
        off = item.offset
        prune = self.prune
        ubs = self._bounds(item, gd, cfg) if prune else None
        floors = self.floors
        dots: Dict[int, float] = {}
        scanned = 0
        postings = self.postings
        for term, w in item.terms.items():
            posting = postings.get(term)
            if posting is None:
                continue
            rows, weights, lens = posting.arrays()
            scanned += len(rows)
            if prune:
                keep = floors[rows] <= ubs[lens]
                rows = rows[keep]
                weights = weights[keep]
            # accumulate in the item's term order, as text_score does
            for r, wq in zip(rows.tolist(), weights.tolist()):
                d = dots.get(r)
                if d is None:
                    dots[r] = wq * w
                else:
                    dots[r] = d + wq * w
        self.entries_scanned += scanned
        out = []
        inorm = item.terms.norm
        alpha = cfg.alpha
        bs = cfg.beta * item.static_quality
        ts = -item.ts
        iid = item.id
        queries = self.rows
        for r, dot in dots.items():
            q = queries[r]
            if exclude is not None and q.id in exclude:
                continue
            sr = alpha * (dot / (q.terms.norm * inorm)) + bs
            res = q.result
            if len(res) >= q.k and not ((-((sr + gd) + off), ts, iid) < res[-1]):
                continue
            out.append((q, sr))
        return out

    def _bounds(self, item: Item, gd: float, cfg: ScoreConfig) -> np.ndarray:
        """Landmark upper bound per query length.

        A query with m terms shares at most m terms with the item, so by
        Cauchy-Schwarz its cosine is at most the norm of the item's m
        heaviest weights over the item's norm.
        """
        inorm = item.terms.norm
        heavy = sorted(item.terms.weights, reverse=True)
        bs = cfg.beta * item.static_quality
        out = [-math.inf]
        acc = 0.0
        cos = 0.0
        for m in range(1, self.max_query_len + 1):
            if m <= len(heavy):
                acc += heavy[m - 1] * heavy[m - 1]
                # relative slack covers rounding in the exact score
                cos = math.sqrt(acc) / inorm * (1.0 + 1e-9)
            out.append(((cfg.alpha * cos + bs) + gd) + item.offset)
        return np.array(out)


class ItemIndex:
    """Term -> ingested items, used to compute a new query's initial result."""

    def __init__(self):
        self.postings: Dict[str, List[Tuple[Item, float]]] = defaultdict(list)
        self.items: Dict[str, Item] = {}
        self.updates = 0

    def __len__(self) -> int:
        return len(self.items)

    def add_item(self, i: Item) -> None:
        if i.id in self.items:
            raise StreamError(f"duplicate item id {i.id!r}")
        self.items[i.id] = i
        for term, weight in i.terms.items():
            self.postings[term].append((i, weight))

    def update_item(self, i: Item) -> None:
        # scores live on the Item record; postings only hold references
        if i.id not in self.items:
            raise StreamError(f"unknown item {i.id!r}")
        self.updates += 1

    def gather(self, q: Query) -> List[Tuple[Item, float]]:
        """All items sharing a term with ``q``, with their exact cosine score."""
        dots: Dict[str, float] = {}
        owners: Dict[str, Item] = {}
        for term, wq in q.terms.items():
            for item, w in self.postings.get(term, ()):
                iid = item.id
                d = dots.get(iid)
                if d is None:
                    dots[iid] = wq * w
                    owners[iid] = item
                else:
                    dots[iid] = d + wq * w
        qnorm = q.terms.norm
        return [(owners[iid], dot / (qnorm * owners[iid].terms.norm)) for iid, dot in dots.items()]

    def match_query(self, q: Query, cfg: ScoreConfig) -> List[Tuple[str, float]]:
        """The k best relevant items for ``q`` as ``(item id, landmark score)``."""
        return [(key[2], -key[0]) for key, _, _ in self.ranked(q, cfg)[: q.k]]

    def ranked(self, q: Query, cfg: ScoreConfig) -> List[Tuple[tuple, Item, float]]:
        """Every relevant item as ``(rank key, item, static_raw)``, best first."""
        out = []
        gamma = cfg.gamma
        for item, text in self.gather(q):
            sr = static_part(text, item.static_quality, cfg)
            out.append((rank_key((sr + gamma * item.dyn) + item.offset, item.ts, item.id), item, sr))
        out.sort(key=lambda t: t[0])
        return out


def brute_force_match_item(
    queries: Iterable[Query], item: Item, dyn_override: float, cfg: ScoreConfig
) -> List[str]:
    """Reference filter over every query; used by tests and the oracle harness."""
    from .model import text_score

    out = []
    for q in queries:
        text = text_score(q.terms, item.terms)
        if text <= 0.0:
            continue
        score = (static_part(text, item.static_quality, cfg) + cfg.gamma * dyn_override) + item.offset
        barrier = q.barrier
        if barrier is None or rank_key(score, item.ts, item.id) < barrier:
            out.append(q.id)
    return out
