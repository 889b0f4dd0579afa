"""Small random streams and the engine/oracle lockstep harness."""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

from .engine import Engine
from .model import ScoreConfig
from .oracle import OracleState, diff_states
from .planner import parse_strategy
from .streams import EventRec, ItemRec, QueryRec, StreamRecord, event_totals

# coarse value grids make exact score ties common
_WEIGHTS = (1.0, 1.0, 1.0, 0.5, 2.0)
_STATICS = (0.0, 0.25, 0.5, 0.5, 1.0)
_SCORES = (1.0, 1.0, 0.5, 0.25, 0.0, 0.1)


def random_stream(
    seed: int,
    max_queries: int = 12,
    max_items: int = 30,
    max_events: int = 120,
    vocab: int = 6,
    max_k: int = 3,
) -> List[StreamRecord]:
    """Queries, items and events interleaved at random; ts has many ties."""
    rng = random.Random(seed)
    n_q = rng.randint(1, max_queries)
    n_i = rng.randint(1, max_items)
    n_e = rng.randint(0, max_events)
    words = [f"t{j}" for j in range(vocab)]

    def terms(n_max):
        picked = rng.sample(words, rng.randint(1, n_max))
        return tuple((w, rng.choice(_WEIGHTS)) for w in sorted(picked))

    kinds = ["q"] * n_q + ["i"] * n_i + ["e"] * n_e
    rng.shuffle(kinds)
    # the first item must precede every event
    first_i = kinds.index("i")
    first_e = kinds.index("e") if "e" in kinds else len(kinds)
    if first_e < first_i:
        kinds[first_e], kinds[first_i] = kinds[first_i], kinds[first_e]
    out: List[StreamRecord] = []
    ts = 0.0
    items: List[str] = []
    nq = ni = ne = 0
    for kind in kinds:
        if rng.random() < 0.5:
            ts += rng.choice((0.5, 1.0, 2.0))
        if kind == "q":
            out.append(QueryRec(f"q{nq}", ts, terms(3), rng.randint(1, max_k)))
            nq += 1
        elif kind == "i":
            iid = f"i{ni}"
            out.append(ItemRec(iid, ts, terms(4), rng.choice(_STATICS)))
            items.append(iid)
            ni += 1
        else:
            # skew events toward a few popular items
            target = items[min(int(rng.expovariate(1.0 / 3.0)), len(items) - 1)]
            if rng.random() < 0.5:
                target = rng.choice(items)
            out.append(EventRec(f"e{ne}", ts, target, rng.choice(_SCORES)))
            ne += 1
    return out


@dataclass(frozen=True)
class RunConfig:
    mode: str
    variant: Optional[str] = None
    theta: str = "zero"

    def label(self) -> str:
        if self.mode == "naive":
            return "naive"
        return f"rrts-{self.variant}-{self.theta}"


THETA_SETTINGS = ("zero", "global:0.05", "fraction:0.5", "fraction:1", "fraction:10")


def config_matrix(variants: Sequence[str], thetas: Sequence[str] = THETA_SETTINGS) -> List[RunConfig]:
    return [RunConfig("naive")] + [RunConfig("rrts", v, t) for v in variants for t in thetas]


def lockstep(
    records: Sequence[StreamRecord],
    cfg: ScoreConfig,
    configs: Iterable[RunConfig],
    engine_factory: Optional[Callable[[RunConfig, Dict[str, float]], Engine]] = None,
    check_invariants: bool = False,
) -> Dict[str, Optional[str]]:
    """Run each configuration next to the oracle; label -> first mismatch or None."""
    totals = event_totals(records)
    configs = list(configs)
    engines = []
    for rc in configs:
        if engine_factory is not None:
            eng = engine_factory(rc, totals)
        else:
            eng = Engine(cfg, rc.mode, rc.variant or "simple", parse_strategy(rc.theta, totals))
        engines.append(eng)
    failures: Dict[str, Optional[str]] = {rc.label(): None for rc in configs}
    live = list(range(len(engines)))
    oracle = OracleState(cfg, force=True)
    for n, rec in enumerate(records):
        want = oracle.step(rec.to_model())
        for j in list(live):
            eng = engines[j]
            eng.process(rec.to_model())
            qs = eng.queries
            if any(qs[qid].result != keys for qid, keys in want.items()):
                report = diff_states(eng.snapshot(), oracle.snapshot())
                failures[configs[j].label()] = f"record {n} ({rec.id}): {report[0]}"
                live.remove(j)
            elif check_invariants:
                eng.check_invariants()
        if not live:
            break
    return failures
