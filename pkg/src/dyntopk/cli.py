"""Command-line entry point: run | sweep | check | generate | filter | calibrate."""

from __future__ import annotations

import argparse
import csv
import io
import math
import sys
from fractions import Fraction
from typing import List, Optional, Sequence

from . import bench
from .candidates import VARIANTS
from .engine import MODES
from .fuzz import THETA_SETTINGS
from .model import StreamError
from .oracle import OracleLimitError
from .streams import event_totals, filter_min_events, format_kv, read_stream, stream_stats, write_stream
from .workload import PRESETS, generate_workload, preset


def _horizon(text: str) -> float:
    if text.strip().lower() in ("inf", "infinity", "none"):
        return math.inf
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError("decay horizon must be positive or 'inf'")
    return value


def _on_off(text: str) -> bool:
    if text not in ("on", "off"):
        raise argparse.ArgumentTypeError("expected 'on' or 'off'")
    return text == "on"


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("expected a positive integer")
    return value


def _floats(text: str) -> List[float]:
    # "1/3" is accepted as well as decimals
    try:
        return [float(Fraction(v.strip())) for v in text.split(",") if v.strip()]
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"expected comma separated numbers, got {text!r}") from None


def _engine_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--input", required=True, help="stream file (one JSON record per line)")
    p.add_argument("--mode", choices=MODES, default="rrts")
    p.add_argument("--eh-index", choices=VARIANTS, default="itempart")
    p.add_argument(
        "--theta-strategy",
        default="fraction:0.5",
        help="zero | fraction:F | global:V | optimal:CONSTS_PATH (default fraction:0.5)",
    )
    p.add_argument("--alpha", type=float, default=0.3)
    p.add_argument("--beta", type=float, default=0.3)
    p.add_argument("--gamma", type=float, default=0.4)
    p.add_argument("--k", type=_positive_int, default=None, help="override every query's k (default: keep the stream's)")
    p.add_argument("--decay-horizon", type=_horizon, default=math.inf, help="seconds or 'inf' (default inf)")
    p.add_argument("--cumulative-refresh", action="store_true", help="add to the refresh counter instead of resetting it")
    p.add_argument("--drop-stale", action="store_true", help="drop candidates that cannot pass even at the window top")
    p.add_argument("--no-prune", action="store_true", help="disable the query index upper-bound skip")


def _bench_config(args) -> bench.BenchConfig:
    return bench.BenchConfig(
        mode=args.mode,
        eh_index=args.eh_index,
        theta_strategy=args.theta_strategy,
        alpha=args.alpha,
        beta=args.beta,
        gamma=args.gamma,
        k=args.k,
        decay_horizon=args.decay_horizon,
        repeats=getattr(args, "repeats", 3),
        warmup=getattr(args, "warmup", True),
        prune=not args.no_prune,
        cumulative_refresh=args.cumulative_refresh,
        drop_stale=args.drop_stale,
    )


def _emit(text: str, path: Optional[str]) -> None:
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dyntopk", description="Continuous top-k search with feedback scores.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="measure one configuration on a stream")
    _engine_flags(p)
    p.add_argument("--repeats", type=_positive_int, default=3)
    p.add_argument("--warmup", type=_on_off, default=True, metavar="{on,off}")
    p.add_argument("--report", help="write the key=value report here (default stdout)")
    p.add_argument("--deltas", help="write result deltas of the last run as JSON lines")

    p = sub.add_parser("sweep", help="one run per value of a parameter")
    _engine_flags(p)
    p.add_argument("--axis", required=True, choices=bench.SWEEP_AXES)
    p.add_argument("--values", required=True, type=_floats, help="comma separated values")
    p.add_argument("--repeats", type=_positive_int, default=3)
    p.add_argument("--warmup", type=_on_off, default=True, metavar="{on,off}")
    p.add_argument("--format", choices=("kv", "csv"), default="kv")
    p.add_argument("--report", help="write the series here (default stdout)")

    p = sub.add_parser("check", help="compare engines against the brute-force oracle")
    _engine_flags(p)
    p.add_argument("--variants", default=",".join(VARIANTS), help="comma separated candidate indexes")
    p.add_argument(
        "--thetas",
        default=None,
        help="comma separated threshold strategies (default: --theta-strategy; 'matrix' for the standard set)",
    )
    p.add_argument("--no-naive", action="store_true")
    p.add_argument("--oracle-cap", type=_positive_int, default=50_000, help="refuse longer streams")

    p = sub.add_parser("generate", help="write a synthetic workload")
    p.add_argument("--preset", choices=sorted(PRESETS), default="ds5")
    p.add_argument("--queries", type=int, default=1000)
    p.add_argument("--items", type=int, default=1000)
    p.add_argument("--events-mean", type=float, default=None)
    p.add_argument("--events-min", type=int, default=None)
    p.add_argument("--vocab", type=int, default=5000)
    p.add_argument("--zipf", type=float, default=1.0)
    p.add_argument("--ngram-dist", type=_floats, default=None, help="probabilities of 1,2,3-term queries")
    p.add_argument("--k", type=_positive_int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", required=True)

    p = sub.add_parser("filter", help="keep items with at least N events")
    p.add_argument("--input", required=True)
    p.add_argument("--min-events", type=int, required=True)
    p.add_argument("--output", required=True)

    p = sub.add_parser("calibrate", help="fit cost constants from instrumented runs")
    _engine_flags(p)
    p.add_argument("--thetas", type=_floats, default=None, help="global thresholds to probe (default: 4 values around the mean maximum)")
    p.add_argument("--output", help="constants file (default stdout)")
    return parser


def cmd_run(args) -> int:
    records = read_stream(args.input)
    report = bench.run(records, _bench_config(args), deltas_path=args.deltas)
    _emit(format_kv(report), args.report)
    return 0


def cmd_sweep(args) -> int:
    records = read_stream(args.input)
    series = bench.sweep(records, _bench_config(args), args.axis, args.values)
    if args.format == "csv":
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=list(series[0]) if series else ["axis", "value"])
        writer.writeheader()
        writer.writerows(series)
        text = buf.getvalue()
    else:
        text = "\n".join(f"# point {n}\n" + format_kv(point) for n, point in enumerate(series))
    _emit(text, args.report)
    return 0


def cmd_check(args) -> int:
    records = read_stream(args.input)
    bc = _bench_config(args)
    variants = [v for v in args.variants.split(",") if v]
    if args.thetas == "matrix":
        thetas: Sequence[str] = THETA_SETTINGS
    elif args.thetas:
        thetas = [t for t in args.thetas.split(",") if t]
    else:
        thetas = [bc.theta_strategy]
    outcome = bench.check(
        records,
        bc,
        variants,
        include_naive=not args.no_naive,
        oracle_cap=args.oracle_cap,
        thetas=thetas,
    )
    failed = False
    for label, mismatch in outcome.items():
        if mismatch is None:
            print(f"ok   {label}")
        else:
            failed = True
            print(f"FAIL {label}: {mismatch}")
    return 1 if failed else 0


def cmd_generate(args) -> int:
    overrides = dict(
        n_queries=args.queries,
        n_items=args.items,
        vocab_size=args.vocab,
        term_zipf_s=args.zipf,
        k=args.k,
        seed=args.seed,
    )
    if args.events_mean is not None:
        overrides["events_per_item_mean"] = args.events_mean
    if args.events_min is not None:
        overrides["events_per_item_min"] = args.events_min
    if args.ngram_dist is not None:
        overrides["query_ngram_dist"] = tuple(args.ngram_dist)
    records = generate_workload(preset(args.preset, **overrides))
    write_stream(args.output, records)
    sys.stderr.write(format_kv(stream_stats(records)))
    return 0


def cmd_filter(args) -> int:
    records = filter_min_events(read_stream(args.input), args.min_events)
    write_stream(args.output, records)
    sys.stderr.write(format_kv(stream_stats(records)))
    return 0


def cmd_calibrate(args) -> int:
    records = read_stream(args.input)
    bc = _bench_config(args)
    thetas = args.thetas
    if not thetas:
        finals = [v for v in event_totals(records).values() if v > 0]
        if not finals:
            raise ValueError("calibration needs a stream with events")
        mean_max = sum(finals) / len(finals)
        thetas = [mean_max * f for f in (0.125, 0.25, 0.5, 1.0)]
    constants = bench.calibration_run(records, bc, thetas)
    _emit(constants.to_text(), args.output)
    return 0


COMMANDS = {
    "run": cmd_run,
    "sweep": cmd_sweep,
    "check": cmd_check,
    "generate": cmd_generate,
    "filter": cmd_filter,
    "calibrate": cmd_calibrate,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (StreamError, OracleLimitError, ValueError, OSError) as exc:
        print(f"dyntopk {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
