from __future__ import annotations

import dyntopk.candidates as cand
from dyntopk.candidates import VARIANTS
from dyntopk.fuzz import THETA_SETTINGS, RunConfig, config_matrix, lockstep, random_stream
from dyntopk.model import ScoreConfig
from dyntopk.streams import EventRec, ItemRec, dumps, iter_lines


def test_random_stream_is_valid_and_deterministic():
    for seed in range(20):
        recs = random_stream(seed)
        assert dumps(recs) == dumps(random_stream(seed))
        list(iter_lines(dumps(recs).splitlines()))
        assert any(isinstance(r, ItemRec) for r in recs)


def test_random_stream_respects_caps():
    for seed in range(50):
        recs = random_stream(seed, max_queries=5, max_items=7, max_events=9)
        assert sum(isinstance(r, EventRec) for r in recs) <= 9
        assert sum(isinstance(r, ItemRec) for r in recs) <= 7


def test_config_matrix():
    matrix = config_matrix(VARIANTS)
    assert len(matrix) == 1 + len(VARIANTS) * len(THETA_SETTINGS) == 26
    assert len({rc.label() for rc in matrix}) == 26


def test_lockstep_clean_on_random_streams():
    for seed in range(15):
        out = lockstep(random_stream(seed), ScoreConfig(), config_matrix(VARIANTS), check_invariants=True)
        assert all(v is None for v in out.values()), out


def test_lockstep_flags_a_broken_stopping_condition(monkeypatch):
    real = cand._walk_sorted

    def too_early(pairs, limit, probe, eps, stop_on_miss):
        return real(pairs, limit - 0.3, probe, eps, stop_on_miss)

    monkeypatch.setattr(cand, "_walk_sorted", too_early)
    broken = [RunConfig("rrts", "lazy", "fraction:10")]
    caught = False
    for seed in range(40):
        out = lockstep(random_stream(seed), ScoreConfig(), broken)
        if out[broken[0].label()] is not None:
            caught = True
            assert "query=" in out[broken[0].label()]
            break
    assert caught


def test_lockstep_empty_stream():
    assert lockstep([], ScoreConfig(), config_matrix(VARIANTS)) == {rc.label(): None for rc in config_matrix(VARIANTS)}
