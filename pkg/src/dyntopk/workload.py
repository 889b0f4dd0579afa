"""Synthetic Twitter-like workloads: Zipf-distributed item texts, n-gram
queries drawn from the most frequent 1/2/3-grams, and heavy-tailed retweet
counts per item with unit-score events."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, replace
from typing import Dict, List, Tuple

import numpy as np

from .streams import EventRec, ItemRec, QueryRec, StreamRecord


@dataclass(frozen=True)
class WorkloadParams:
    n_queries: int = 1000
    n_items: int = 1000
    events_per_item_mean: float = 9.99
    events_per_item_min: int = 5
    vocab_size: int = 5000
    term_zipf_s: float = 1.0
    # probability of a 1-, 2- and 3-term query
    query_ngram_dist: Tuple[float, float, float] = (0.6, 0.3, 0.1)
    k: int = 1
    seed: int = 0
    item_len_mean: float = 8.0
    # items per second and mean delay of a retweet after its tweet
    item_rate: float = 1.0
    event_delay_mean: float = 30.0
    # events per item follow min + Lomax(shape) before the mean correction
    tail_shape: float = 2.0
    query_pool_factor: float = 2.0


PRESETS: Dict[str, Dict[str, float]] = {
    "ds1": {"events_per_item_mean": 1.29, "events_per_item_min": 1},
    "ds5": {"events_per_item_mean": 9.99, "events_per_item_min": 5},
    "ds10": {"events_per_item_mean": 19.60, "events_per_item_min": 10},
}


def preset(name: str, **overrides) -> WorkloadParams:
    return replace(WorkloadParams(), **{**PRESETS[name], **overrides})


def _zipf_probs(n: int, s: float) -> np.ndarray:
    w = np.arange(1, n + 1, dtype=float) ** -s
    return w / w.sum()


def _event_counts(rng: np.random.Generator, p: WorkloadParams) -> np.ndarray:
    n = p.n_items
    extra_mean = p.events_per_item_mean - p.events_per_item_min
    if extra_mean < 0:
        raise ValueError("events_per_item_mean must be >= events_per_item_min")
    counts = np.full(n, p.events_per_item_min, dtype=np.int64)
    if n == 0:
        return counts
    if extra_mean > 0:
        scale = extra_mean * (p.tail_shape - 1.0)
        counts += np.floor(rng.pareto(p.tail_shape, n) * scale).astype(np.int64)
    # pin the total so the empirical mean is the requested one
    target = int(round(p.events_per_item_mean * n))
    diff = target - int(counts.sum())
    if diff > 0:
        np.add.at(counts, rng.integers(0, n, diff), 1)
    while diff < 0:
        spare = np.flatnonzero(counts > p.events_per_item_min)
        take = rng.choice(spare, size=min(-diff, spare.size), replace=False)
        counts[take] -= 1
        diff += take.size
    return counts


def generate_workload(p: WorkloadParams) -> List[StreamRecord]:
    """Deterministic for a fixed ``p.seed``; queries come first at ts 0."""
    if p.vocab_size < 3:
        raise ValueError("vocab_size must be at least 3 to form 3-gram queries")
    if abs(sum(p.query_ngram_dist) - 1.0) > 1e-9 or len(p.query_ngram_dist) != 3:
        raise ValueError("query_ngram_dist must hold 3 probabilities summing to 1")
    rng = np.random.default_rng(p.seed)
    probs = _zipf_probs(p.vocab_size, p.term_zipf_s)
    lengths = 1 + rng.poisson(max(p.item_len_mean - 1.0, 0.0), p.n_items)
    tokens = rng.choice(p.vocab_size, size=int(lengths.sum()), p=probs)

    texts: List[np.ndarray] = []
    grams: List[Counter] = [Counter(), Counter(), Counter()]
    pos = 0
    for ln in lengths:
        seq = tokens[pos : pos + ln]
        pos += ln
        texts.append(seq)
        s = seq.tolist()
        for n in (1, 2, 3):
            for j in range(len(s) - n + 1):
                g = tuple(s[j : j + n])
                if len(set(g)) == n:
                    grams[n - 1][g] += 1

    qlens = rng.choice(3, size=p.n_queries, p=list(p.query_ngram_dist)) + 1
    queries: List[Tuple[int, ...]] = [()] * p.n_queries
    for n in (1, 2, 3):
        slots = np.flatnonzero(qlens == n)
        if slots.size == 0:
            continue
        ranked = sorted(grams[n - 1].items(), key=lambda kv: (-kv[1], kv[0]))
        if not ranked:
            raise ValueError(f"no {n}-grams available; increase n_items or item_len_mean")
        pool = [g for g, _ in ranked[: max(slots.size, int(slots.size * p.query_pool_factor))]]
        picks = rng.choice(len(pool), size=slots.size, replace=len(pool) < slots.size)
        for slot, pick in zip(slots, picks):
            queries[slot] = pool[pick]

    records: List[Tuple[float, int, int, StreamRecord]] = []
    serial = 0
    for qn, gram in enumerate(queries):
        terms = tuple((f"w{t}", 1.0) for t in gram)
        records.append((0.0, 0, serial, QueryRec(f"q{qn}", 0.0, terms, p.k)))
        serial += 1

    arrivals = np.cumsum(rng.exponential(1.0 / p.item_rate, p.n_items))
    statics = rng.uniform(0.0, 1.0, p.n_items)
    counts = _event_counts(rng, p)
    en = 0
    for n in range(p.n_items):
        ts = round(float(arrivals[n]), 6)
        terms = tuple((f"w{t}", 1.0) for t in sorted(set(texts[n].tolist())))
        iid = f"i{n}"
        records.append((ts, 1, serial, ItemRec(iid, ts, terms, round(float(statics[n]), 4))))
        serial += 1
        delays = rng.exponential(p.event_delay_mean, int(counts[n]))
        for d in delays:
            ets = round(ts + float(d), 6)
            records.append((ets, 2, serial, EventRec(f"e{en}", ets, iid, 1.0)))
            serial += 1
            en += 1
    records.sort(key=lambda r: (r[0], r[1], r[2]))
    return [r[3] for r in records]


def query_length_mean(records: List[StreamRecord]) -> float:
    qs = [len(r.terms) for r in records if isinstance(r, QueryRec)]
    return sum(qs) / len(qs) if qs else 0.0
