"""Continuous top-k publish/subscribe with scores that grow on feedback events."""

from .candidates import VARIANTS, build
from .engine import MODES, Engine, Metrics, ResultDelta
from .model import Event, Item, Query, ScoreConfig, StreamError, TermProfile, text_score, total_score
from .oracle import OracleState, diff_states
from .planner import CostConstants, ExactFraction, Global, Optimal, Zero, calibrate, optimal_theta, parse_strategy
from .streams import EventRec, ItemRec, QueryRec, read_stream, write_stream
from .workload import WorkloadParams, generate_workload, preset

__version__ = "0.1.0"
