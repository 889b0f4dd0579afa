"""Per-item threshold assignment and the refresh/probe cost model.

The cost of one item over its lifetime is modelled as

    cost(theta) = (theta_max / theta) * (C_M + b * theta) + E * a * theta * C_T

refresh count times (item match + list construction), plus every event
probing a candidate list of ``a * theta`` entries. Its minimum sits at
``sqrt(theta_max * C_M / (E * a * C_T))``.
"""

from __future__ import annotations

import math
from fractions import Fraction
from dataclasses import asdict, dataclass, field, fields
from typing import Dict, List, Mapping, Optional, Sequence, Tuple


@dataclass(frozen=True)
class CostConstants:
    a: float
    b: float
    C_M: float
    C_T: float
    theta_max: float
    E: float

    def __post_init__(self):
        for f in fields(self):
            if getattr(self, f.name) < 0:
                raise ValueError(f"cost constant {f.name} must be non-negative")

    def to_text(self) -> str:
        return "".join(f"{k}={v!r}\n" for k, v in asdict(self).items())

    @classmethod
    def from_text(cls, text: str) -> "CostConstants":
        values: Dict[str, float] = {}
        names = {f.name for f in fields(cls)}
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, _, value = line.partition("=")
            key = key.strip()
            if key in names:
                values[key] = float(value)
        missing = names - set(values)
        if missing:
            raise ValueError(f"cost constants missing: {', '.join(sorted(missing))}")
        return cls(**values)


def optimal_theta(c: CostConstants) -> float:
    if c.a <= 0 or c.E <= 0 or c.C_T <= 0:
        raise ZeroDivisionError("optimal_theta needs a, E and C_T > 0")
    return math.sqrt((1.0 / c.a) * (c.theta_max / c.E) * (c.C_M / c.C_T))


def predicted_cost(theta: float, c: CostConstants) -> float:
    if theta <= 0:
        raise ValueError("predicted_cost is defined for theta > 0")
    refreshes = c.theta_max / theta
    return refreshes * (c.C_M + c.b * theta) + theta * c.E * c.a * c.C_T


# -- threshold strategies -------------------------------------------------


@dataclass(frozen=True)
class Zero:
    def __str__(self):
        return "zero"


@dataclass(frozen=True)
class ExactFraction:
    """``fraction`` of each item's final aggregated event score."""

    fraction: float
    theta_max: Optional[Mapping[str, float]] = field(default=None, compare=False, repr=False)

    def __str__(self):
        return f"fraction:{self.fraction:g}"


@dataclass(frozen=True)
class Global:
    theta: float

    def __str__(self):
        return f"global:{self.theta:g}"


@dataclass(frozen=True)
class Optimal:
    constants: CostConstants

    def __str__(self):
        return f"optimal:{optimal_theta(self.constants):g}"


def theta_for_item(item, strategy) -> float:
    if isinstance(strategy, Zero):
        return 0.0
    if isinstance(strategy, Global):
        return float(strategy.theta)
    if isinstance(strategy, ExactFraction):
        if strategy.theta_max is None:
            raise ValueError("fraction threshold needs per-item maximal scores (pre-scan the stream)")
        return strategy.fraction * strategy.theta_max.get(item.id, 0.0)
    if isinstance(strategy, Optimal):
        return optimal_theta(strategy.constants)
    raise TypeError(f"unknown threshold strategy {strategy!r}")


def score_cap(item, strategy) -> float:
    """Final dynamic score of ``item`` when the strategy knows it, else inf."""
    if isinstance(strategy, ExactFraction) and strategy.theta_max is not None:
        return strategy.theta_max.get(item.id, math.inf)
    return math.inf


def _number(text: str) -> float:
    # accepts "0.5" as well as exact ratios such as "1/3"
    try:
        return float(Fraction(text.strip()))
    except (ValueError, ZeroDivisionError):
        raise ValueError(f"not a number: {text!r}") from None


def parse_strategy(text: str, theta_max: Optional[Mapping[str, float]] = None):
    """Parse ``zero``, ``fraction:F``, ``global:V`` or ``optimal:PATH``."""
    name, _, arg = text.partition(":")
    if name == "zero":
        return Zero()
    if name == "fraction":
        f = _number(arg)
        if f < 0:
            raise ValueError("fraction must be non-negative")
        return ExactFraction(f, theta_max)
    if name == "global":
        v = _number(arg)
        if v < 0:
            raise ValueError("global threshold must be non-negative")
        return Global(v)
    if name == "optimal":
        with open(arg, encoding="utf-8") as fh:
            return Optimal(CostConstants.from_text(fh.read()))
    raise ValueError(f"unknown threshold strategy {text!r}")


# -- calibration ----------------------------------------------------------


@dataclass
class ProbeRunStats:
    """Measurements collected by an instrumented engine run (seconds)."""

    # (theta, candidate list size, list construction time) per refresh
    refreshes: List[Tuple[float, int, float]] = field(default_factory=list)
    match_times: List[float] = field(default_factory=list)
    probe_time: float = 0.0
    probes: int = 0
    # per item: (final aggregated score, event count)
    items: List[Tuple[float, int]] = field(default_factory=list)


def _slope_through_origin(xs: Sequence[float], ys: Sequence[float]) -> float:
    sxx = sum(x * x for x in xs)
    if sxx == 0:
        raise ValueError("cannot fit a slope without positive thresholds")
    return sum(x * y for x, y in zip(xs, ys)) / sxx


def calibrate(stats: ProbeRunStats) -> CostConstants:
    thetas = [t for t, _, _ in stats.refreshes if t > 0]
    if len(set(thetas)) < 2:
        raise ValueError("calibration needs refreshes under at least 2 distinct thresholds")
    pts = [(t, n, dt) for t, n, dt in stats.refreshes if t > 0]
    a = _slope_through_origin([p[0] for p in pts], [p[1] for p in pts])
    b = _slope_through_origin([p[0] for p in pts], [p[2] for p in pts])
    if not stats.match_times:
        raise ValueError("calibration needs item match timings")
    c_m = sum(stats.match_times) / len(stats.match_times)
    if stats.probes == 0:
        raise ValueError("calibration needs at least one candidate probe")
    c_t = stats.probe_time / stats.probes
    with_events = [(d, n) for d, n in stats.items if n > 0]
    if not with_events:
        raise ValueError("calibration needs items with events")
    theta_max = sum(d for d, _ in with_events) / len(with_events)
    e = sum(n for _, n in with_events) / len(with_events)
    return CostConstants(a=a, b=b, C_M=c_m, C_T=c_t, theta_max=theta_max, E=e)
