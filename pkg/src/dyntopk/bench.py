"""Measured runs, parameter sweeps, oracle checks and calibration runs."""

from __future__ import annotations

import dataclasses
import gc
import json
import statistics
import time
from dataclasses import dataclass, replace
from typing import Dict, List, Optional, Sequence

import numpy as np

from .candidates import VARIANTS
from .engine import Engine, ResultDelta
from .fuzz import RunConfig as MatrixEntry
from .fuzz import lockstep
from .model import INF, Query, ScoreConfig
from .oracle import OracleLimitError
from .planner import CostConstants, ProbeRunStats, calibrate, parse_strategy
from .streams import EventRec, ItemRec, QueryRec, StreamRecord, event_totals

SWEEP_AXES = ("theta_fraction", "theta_global", "gamma", "k", "n_queries", "decay_horizon")

COUNT_FIELDS = (
    "ih_invocations",
    "ih_item_matches",
    "ih_event_matches",
    "refreshes",
    "eh_matches",
    "eh_probes",
    "eh_list_entries",
    "result_updates",
    "evictions",
    "candidate_inserts",
)


@dataclass
class BenchConfig:
    mode: str = "rrts"
    eh_index: str = "itempart"
    theta_strategy: str = "fraction:0.5"
    alpha: float = 0.3
    beta: float = 0.3
    gamma: float = 0.4
    k: Optional[int] = None
    decay_horizon: float = INF
    repeats: int = 3
    warmup: bool = True
    prune: bool = True
    cumulative_refresh: bool = False
    drop_stale: bool = False
    n_queries: Optional[int] = None

    def score_config(self) -> ScoreConfig:
        return ScoreConfig(self.alpha, self.beta, self.gamma, self.decay_horizon)


def prepare(records: Sequence[StreamRecord], bc: BenchConfig) -> List[StreamRecord]:
    """Apply the stream-level overrides (k, query subset)."""
    out = list(records)
    if bc.n_queries is not None:
        kept = 0
        trimmed = []
        for r in out:
            if isinstance(r, QueryRec):
                if kept >= bc.n_queries:
                    continue
                kept += 1
            trimmed.append(r)
        out = trimmed
    if bc.k is not None:
        out = [replace(r, k=bc.k) if isinstance(r, QueryRec) else r for r in out]
    return out


def make_engine(bc: BenchConfig, totals: Dict[str, float], delta_sink=None, stats=None) -> Engine:
    strategy = parse_strategy(bc.theta_strategy, totals)
    return Engine(
        bc.score_config(),
        bc.mode,
        bc.eh_index,
        strategy,
        prune=bc.prune,
        cumulative_refresh=bc.cumulative_refresh,
        drop_stale=bc.drop_stale,
        delta_sink=delta_sink,
        stats=stats,
    )


def _execute(records, bc, totals, delta_sink=None, stats=None):
    models = [r.to_model() for r in records]
    eng = make_engine(bc, totals, delta_sink, stats)
    query_time = 0.0
    clock = time.perf_counter
    # like timeit: keep collector pauses out of the measurement
    gc.collect()
    was_enabled = gc.isenabled()
    gc.disable()
    try:
        c0 = time.process_time()
        t0 = clock()
        for m in models:
            if isinstance(m, Query):
                tq = clock()
                eng.process_query(m)
                query_time += clock() - tq
            else:
                eng.process(m)
        total = clock() - t0
        cpu = time.process_time() - c0
    finally:
        if was_enabled:
            gc.enable()
    return eng, query_time, total - query_time, cpu


def _percentiles(values: Sequence[float]) -> Dict[str, float]:
    if not values:
        return {"p50": 0.0, "p90": 0.0, "p99": 0.0, "max": 0.0}
    arr = np.asarray(values, dtype=float)
    return {
        "p50": float(np.percentile(arr, 50)),
        "p90": float(np.percentile(arr, 90)),
        "p99": float(np.percentile(arr, 99)),
        "max": float(arr.max()),
    }


def run(records: Sequence[StreamRecord], bc: BenchConfig, deltas_path: Optional[str] = None) -> Dict[str, object]:
    """Warm-up plus ``bc.repeats`` measured runs; timings averaged, counts from the last run."""
    records = prepare(records, bc)
    # fraction thresholds need each item's final score: pre-scan the stream
    totals = event_totals(records)
    if bc.warmup:
        _execute(records, bc, totals)
    match_times, query_times, cpu_times = [], [], []
    eng = None
    for rep in range(max(1, bc.repeats)):
        sink = None
        fh = None
        if deltas_path and rep == bc.repeats - 1:
            fh = open(deltas_path, "w", encoding="utf-8")

            def sink(d: ResultDelta, _fh=fh):
                _fh.write(json.dumps(dataclasses.asdict(d), separators=(",", ":")) + "\n")

        try:
            eng, tq, tm, cpu = _execute(records, bc, totals, sink)
        finally:
            if fh is not None:
                fh.close()
        query_times.append(tq)
        match_times.append(tm)
        cpu_times.append(cpu)
    m = eng.metrics
    n_items = sum(1 for r in records if isinstance(r, ItemRec))
    n_events = sum(1 for r in records if isinstance(r, EventRec))
    n_queries = len(records) - n_items - n_events
    wall_match = statistics.fmean(match_times)
    report: Dict[str, object] = {
        "mode": bc.mode,
        "eh_index": bc.eh_index if bc.mode == "rrts" else "none",
        "theta_strategy": bc.theta_strategy if bc.mode == "rrts" else "none",
        "alpha": bc.alpha,
        "beta": bc.beta,
        "gamma": bc.gamma,
        "k": bc.k if bc.k is not None else "stream",
        "decay_horizon": bc.decay_horizon,
        "repeats": bc.repeats,
        "warmup": "on" if bc.warmup else "off",
        "queries": n_queries,
        "items": n_items,
        "events": n_events,
        "wall_query_s": statistics.fmean(query_times),
        "wall_match_s": wall_match,
        "wall_match_runs": ",".join(f"{t:.6f}" for t in match_times),
        # process CPU time of the whole run (queries included)
        "cpu_s": statistics.fmean(cpu_times),
        "cpu_runs": ",".join(f"{t:.6f}" for t in cpu_times),
        "throughput_records_per_min": (n_items + n_events) / wall_match * 60.0 if wall_match > 0 else 0.0,
    }
    for name in COUNT_FIELDS:
        report[name] = getattr(m, name)
    if bc.mode == "rrts":
        report["visited_fraction"] = m.visited_fraction
    else:
        report["visited_fraction"] = 0.0
    report["candidate_entries_final"] = eng.candidate_count()
    refresh_counts = [m.refresh_per_item.get(iid, 0) for iid in eng.items]
    for k, v in _percentiles(refresh_counts).items():
        report[f"refreshes_per_item_{k}"] = v
    list_sizes = [len(lst) for lst in eng.cands.values()]
    for k, v in _percentiles(list_sizes).items():
        report[f"candidate_list_size_{k}"] = v
    return report


def refresh_counts(records: Sequence[StreamRecord], bc: BenchConfig) -> Dict[str, int]:
    """Per-item refresh counts of a single unmeasured run."""
    records = prepare(records, bc)
    eng = _execute(records, bc, event_totals(records))[0]
    return {iid: eng.metrics.refresh_per_item.get(iid, 0) for iid in eng.items}


def sweep(records: Sequence[StreamRecord], bc: BenchConfig, axis: str, values: Sequence[float]) -> List[Dict[str, object]]:
    if axis not in SWEEP_AXES:
        raise ValueError(f"unknown sweep axis {axis!r}; choose from {', '.join(SWEEP_AXES)}")
    series = []
    for v in values:
        if axis == "theta_fraction":
            point = replace(bc, theta_strategy=f"fraction:{v}")
        elif axis == "theta_global":
            point = replace(bc, theta_strategy=f"global:{v}")
        elif axis == "gamma":
            rest = (1.0 - v) / 2.0
            point = replace(bc, alpha=rest, beta=rest, gamma=v)
        elif axis == "k":
            point = replace(bc, k=int(v))
        elif axis == "n_queries":
            point = replace(bc, n_queries=int(v))
        else:
            point = replace(bc, decay_horizon=float(v))
        report = run(records, point)
        report = {"axis": axis, "value": v, **report}
        series.append(report)
    return series


def check(
    records: Sequence[StreamRecord],
    bc: BenchConfig,
    variants: Sequence[str] = VARIANTS,
    include_naive: bool = True,
    oracle_cap: int = 50_000,
    thetas: Optional[Sequence[str]] = None,
) -> Dict[str, Optional[str]]:
    """Lockstep comparison against the oracle; label -> first mismatch (None if clean).

    All threshold strategies in ``thetas`` (default: ``bc.theta_strategy``)
    share a single oracle pass.
    """
    records = prepare(records, bc)
    if len(records) > oracle_cap:
        raise OracleLimitError(f"stream has {len(records)} records, oracle cap is {oracle_cap}")
    matrix: List[MatrixEntry] = [MatrixEntry("naive")] if include_naive else []
    matrix += [MatrixEntry("rrts", v, t) for t in (thetas or [bc.theta_strategy]) for v in variants]

    def factory(rc: MatrixEntry, totals):
        point = replace(bc, mode=rc.mode, eh_index=rc.variant or bc.eh_index, theta_strategy=rc.theta)
        return make_engine(point, totals)

    return lockstep(records, bc.score_config(), matrix, engine_factory=factory)


def calibration_run(
    records: Sequence[StreamRecord], bc: BenchConfig, thetas: Sequence[float]
) -> CostConstants:
    """Instrumented runs under a few global thresholds, fitted to cost constants."""
    records = prepare(records, bc)
    totals = event_totals(records)
    stats = ProbeRunStats()
    for theta in thetas:
        point = replace(bc, mode="rrts", theta_strategy=f"global:{theta}")
        eng = _execute(records, point, totals, stats=stats)[0]
        item_stats = stats.items
        eng.finish_stats()
        stats.items = item_stats + stats.items
    return calibrate(stats)
