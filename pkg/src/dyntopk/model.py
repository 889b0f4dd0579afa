"""Domain types and scoring shared by the engine, the oracle and the planner.

Scores are kept as *landmark* scores: an item published at time ``ts`` gets a
bonus of ``ts / decay_horizon`` instead of every older item losing score as
time passes. Comparing landmark scores at any common instant gives the same
order as comparing linearly decayed scores, so nothing has to be rescored
when the clock moves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Tuple, Union

INF = math.inf

# (negated landmark score, negated item ts, item id): ascending order of these
# tuples is the result order of a query.
RankKey = Tuple[float, float, str]


class StreamError(ValueError):
    """A record violates the stream contract (duplicate id, unknown target...)."""


class TermProfile:
    """Positive term weights, stored in sorted term order with a cached norm."""

    __slots__ = ("terms", "weights", "norm", "_lookup")

    def __init__(self, entries: Union[Mapping[str, float], Iterable[Tuple[str, float]]] = ()):
        pairs = entries.items() if isinstance(entries, Mapping) else entries
        merged: Dict[str, float] = {}
        for term, weight in pairs:
            weight = float(weight)
            if not weight > 0.0 or math.isinf(weight):
                raise ValueError(f"term weight for {term!r} must be positive and finite, got {weight}")
            merged[term] = merged.get(term, 0.0) + weight
        self.terms: Tuple[str, ...] = tuple(sorted(merged))
        self.weights: Tuple[float, ...] = tuple(merged[t] for t in self.terms)
        self.norm = math.sqrt(sum(w * w for w in self.weights))
        self._lookup = merged

    def get(self, term: str, default: float = 0.0) -> float:
        return self._lookup.get(term, default)

    def items(self):
        return zip(self.terms, self.weights)

    def as_dict(self) -> Dict[str, float]:
        return dict(self._lookup)

    def __contains__(self, term: str) -> bool:
        return term in self._lookup

    def __len__(self) -> int:
        return len(self.terms)

    def __eq__(self, other) -> bool:
        return isinstance(other, TermProfile) and self._lookup == other._lookup

    def __repr__(self) -> str:
        return f"TermProfile({self._lookup!r})"


def text_score(q_terms: TermProfile, i_terms: TermProfile) -> float:
    """Cosine similarity of two term profiles.

    Shared terms are summed in sorted term order, which makes the result
    bitwise symmetric and lets index code reproduce it exactly by walking an
    item's terms in order.
    """
    if not q_terms.norm or not i_terms.norm:
        return 0.0
    small, large = (q_terms, i_terms) if len(q_terms) <= len(i_terms) else (i_terms, q_terms)
    dot = 0.0
    hit = False
    for term, w in small.items():
        other = large._lookup.get(term)
        if other is not None:
            dot += w * other
            hit = True
    if not hit:
        return 0.0
    return dot / (q_terms.norm * i_terms.norm)


@dataclass(frozen=True)
class ScoreConfig:
    alpha: float = 0.3
    beta: float = 0.3
    gamma: float = 0.4
    decay_horizon: float = INF

    def __post_init__(self):
        for name in ("alpha", "beta", "gamma"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if abs(self.alpha + self.beta + self.gamma - 1.0) > 1e-9:
            raise ValueError(
                f"alpha + beta + gamma must equal 1, got {self.alpha + self.beta + self.gamma!r}"
            )
        if not self.decay_horizon > 0:
            raise ValueError("decay_horizon must be positive (or inf)")

    def landmark_offset(self, ts: float) -> float:
        if math.isinf(self.decay_horizon):
            return 0.0
        return ts / self.decay_horizon


def static_part(text: float, static_quality: float, cfg: ScoreConfig) -> float:
    """The query-dependent but event-independent share of the total score."""
    return cfg.alpha * text + cfg.beta * static_quality


def total_score(q: "Query", i: "Item", dyn_value: float, cfg: ScoreConfig) -> float:
    """alpha*text + beta*static + gamma*dyn for a query/item pair.

    Every score comparison in the package evaluates the same expression,
    ``static_part(...) + gamma * dyn``, so engine and oracle agree to the
    last bit.
    """
    text = text_score(q.terms, i.terms)
    return static_part(text, i.static_quality, cfg) + cfg.gamma * dyn_value


def to_landmark(raw_score: float, item_ts: float, cfg: ScoreConfig) -> float:
    return raw_score + cfg.landmark_offset(item_ts)


def forward_decayed(raw_score: float, item_ts: float, now: float, horizon: float) -> float:
    """Linearly decayed score at ``now``; loses 1.0 per ``horizon`` seconds of age."""
    if math.isinf(horizon):
        return raw_score
    return raw_score - (now - item_ts) / horizon


def rank_key(landmark: float, item_ts: float, item_id: str) -> RankKey:
    """Sort key for result lists: higher score, then newer, then smaller id first."""
    return (-landmark, -item_ts, item_id)


@dataclass
class Query:
    id: str
    terms: TermProfile
    k: int = 1
    ts: float = 0.0
    result: List[RankKey] = field(default_factory=list)
    # row assigned by the query index
    slot: int = field(default=-1, repr=False, compare=False)

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise ValueError(f"query {self.id}: k must be a positive integer")
        self.k = int(self.k)

    @property
    def full(self) -> bool:
        return len(self.result) >= self.k

    @property
    def qmin(self) -> float:
        """Landmark score of the k-th result, 0 while the result is under-filled."""
        if len(self.result) < self.k:
            return 0.0
        return -self.result[-1][0]

    @property
    def barrier(self) -> Optional[RankKey]:
        """Rank key an item has to beat to enter the result (None: anything enters)."""
        if len(self.result) < self.k:
            return None
        return self.result[-1]

    @property
    def kth_item(self) -> Optional[str]:
        if len(self.result) < self.k:
            return None
        return self.result[-1][2]

    def ranking(self) -> List[Tuple[str, float]]:
        return [(key[2], -key[0]) for key in self.result]


@dataclass
class Item:
    id: str
    terms: TermProfile
    static_quality: float = 0.0
    ts: float = 0.0
    dyn: float = 0.0
    theta: float = 0.0
    refresh: int = 0
    # dynamic score the current candidate list is valid for
    window: float = 0.0
    # known final dynamic score (inf when the threshold strategy has no pre-scan)
    cap: float = INF
    active_queries: Dict[str, float] = field(default_factory=dict)
    offset: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.static_quality <= 1.0:
            raise ValueError(f"item {self.id}: static quality must lie in [0, 1]")


@dataclass(frozen=True)
class Event:
    id: str
    target: str
    score: float
    ts: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"event {self.id}: score must lie in [0, 1]")


def aggregate_event(item: Item, event: Event) -> Item:
    if event.target != item.id:
        raise StreamError(f"event {event.id} targets {event.target}, not {item.id}")
    item.dyn += event.score
    return item
