"""Acceptance gate: one test per shipping criterion, at stated tolerance.

Each test is self-contained and prints as a single pass/fail line under
pytest -v. Runtime budgets are asserted where the criterion states one.
"""

from __future__ import annotations

import random
import time
from pathlib import Path

import numpy as np
import pytest

import vistream
from vistream.cli import main
from vistream.context import FusionConfig, FusionMode, fuse, fuse_add, fuse_linear
from vistream.data import (
    TIMED_SUBTASKS,
    Subtask,
    default_mix,
    gen_traces,
)
from vistream.engine import EngineConfig, Terminated, run_session
from vistream.evaluator import (
    aggregate_rows,
    evaluate,
    interruption_probe,
    time_accuracy,
)
from vistream.gating import GatingConfig, should_speak
from vistream.judges import MockJudge
from vistream.protocol import NoiseConfig, ScriptedBackend

from suite_helpers import ControlledBackend, make_annotation, reply, video_trace

FIXTURE_CSV = Path(vistream.__file__).parent / "fixtures" / "baseline_rows.csv"
DEFAULT_MARGIN = 2.0


def test_criterion_published_rows_reproduce_under_aggregation():
    """Seven baseline rows: overall within 0.015, summary columns within 0.01, < 1 s."""
    started = time.monotonic()
    published = {
        "gpt-4o": (87.50, 3.27, 2.99),
        "internvl-2.5": (68.42, 2.66, 1.98),
        "qwen2.5-vl-72b": (79.58, 3.09, 2.62),
        "vita-1.5": (56.42, 2.31, 1.54),
        "flash-vstream": (50.92, 2.22, 1.24),
        "dispider": (70.17, 2.06, 1.63),
        "streaming-duplex-7b": (80.42, 3.25, 2.76),
    }
    rows = aggregate_rows(FIXTURE_CSV)
    assert len(rows) == 7
    for row in rows:
        time_all, text_all, score = published[row["model"]]
        assert abs(row["time_all"] - time_all) <= 0.01, row["model"]
        assert abs(row["text_all"] - text_all) <= 0.01, row["model"]
        assert abs(row["overall"] - score) <= 0.015, row["model"]
    assert time.monotonic() - started < 1.0


def test_criterion_timing_rule_matches_brute_force_enumerator():
    """1,000 random (window, response time, margin) instances agree exactly, < 5 s."""
    started = time.monotonic()

    def enumerator(t_res, t1, t2, margin):
        # independent reading: count the explicit miss conditions
        if t_res is None:
            return 0
        if t_res < t1:
            return 0
        if t_res > t2 + margin:
            return 0
        return 1

    rng = random.Random(1009)
    instances = []
    for _ in range(1000):
        t1 = round(rng.uniform(0.0, 60.0), 3)
        t2 = t1 + round(rng.uniform(0.0, 12.0), 3)
        margin = rng.choice([None, 0.0, round(rng.uniform(0.0, 6.0), 3)])
        effective = DEFAULT_MARGIN if margin is None else margin
        t_res = rng.choice(
            [None, round(rng.uniform(0.0, 80.0), 3), t1, t2 + effective,
             t1 - 1e-9, t2 + effective + 1e-9]
        )
        instances.append((make_annotation(t1=t1, t2=t2, margin=margin), t_res, effective))

    for batch_start in range(0, 1000, 10):
        batch = instances[batch_start:batch_start + 10]
        pairs = [(ann, t_res) for ann, t_res, _ in batch]
        expected = sum(enumerator(t_res, ann.t1, ann.t2, eff) for ann, t_res, eff in batch) / len(batch)
        assert time_accuracy(pairs) == expected
    assert time.monotonic() - started < 5.0


def closed_loop_time_accuracies(bundles, shift: float) -> dict[str, float]:
    transcripts = []
    for i, bundle in enumerate(bundles):
        backend = ScriptedBackend(bundle.plan, NoiseConfig(shift_seconds=shift, seed=i))
        transcripts.append(
            run_session(bundle.events, backend, EngineConfig(), bundle.annotation.id)
        )
    report = evaluate([b.annotation for b in bundles], transcripts, MockJudge())
    return {s.value: report.subtasks[s.value].time_accuracy for s in TIMED_SUBTASKS}


def test_criterion_closed_loop_hits_then_forced_misses():
    """700-trace mix: zero noise → accuracy 1.0 on six timed subtasks; +(margin+1) s shift → 0.0; < 60 s."""
    started = time.monotonic()
    bundles = gen_traces(2024, default_mix(700))
    assert len(bundles) == 700

    on_time = closed_loop_time_accuracies(bundles, shift=0.0)
    assert all(acc == 1.0 for acc in on_time.values()), on_time

    late = closed_loop_time_accuracies(bundles, shift=DEFAULT_MARGIN + 1.0)
    assert all(acc == 0.0 for acc in late.values()), late
    assert time.monotonic() - started < 60.0


def test_criterion_gate_threshold_properties():
    """Raising the threshold never adds responses; 1.0 is mute; the boundary is silent."""
    rng = random.Random(7)
    for _ in range(100):
        scores = [rng.random() for _ in range(20)]
        low, high = sorted((rng.random(), rng.random()))
        fired_low = {i for i, s in enumerate(scores)
                     if should_speak(s, GatingConfig(threshold=low))}
        fired_high = {i for i, s in enumerate(scores)
                      if should_speak(s, GatingConfig(threshold=high))}
        assert fired_high <= fired_low

    # a fully trusting threshold never opens: strict inequality against 1.0
    (bundle,) = gen_traces(5, {Subtask.VISUAL_WAKE_UP: 1})
    mute = EngineConfig(gating=GatingConfig(threshold=1.0))
    transcript = run_session(bundle.events, ScriptedBackend(bundle.plan), mute, "mute")
    assert transcript.entries == []

    # a score exactly at the threshold stays silent
    theta = 0.35
    assert not should_speak(theta, GatingConfig(threshold=theta))
    backend = ControlledBackend(replies={3.0: reply(visual=theta, action="wave")})
    cfg = EngineConfig(gating=GatingConfig(threshold=theta))
    assert run_session(video_trace(6), backend, cfg, "boundary").entries == []


def test_criterion_fusion_algebra():
    """Identity-linear equals add within 1e-9; saturated gates copy a stream; shapes survive."""
    rng = np.random.default_rng(12)
    dim = 16
    identity_pair = np.hstack([np.eye(dim), np.eye(dim)])
    linear_cfg = FusionConfig(mode=FusionMode.LINEAR, dim=dim,
                              weight=identity_pair, bias=np.zeros(dim))
    user_gate = FusionConfig(mode=FusionMode.ADAPTIVE, dim=dim,
                             gate=np.zeros(2 * dim), gate_bias=1000.0)
    agent_gate = FusionConfig(mode=FusionMode.ADAPTIVE, dim=dim,
                              gate=np.zeros(2 * dim), gate_bias=-1000.0)
    for _ in range(200):
        u = rng.standard_normal(dim)
        a = rng.standard_normal(dim)
        assert np.allclose(fuse_linear(u, a, linear_cfg), fuse_add(u, a, dim), atol=1e-9)
        assert np.array_equal(fuse(u, a, user_gate), u)
        assert np.array_equal(fuse(u, a, agent_gate), a)

    for _ in range(1000):
        d = int(rng.integers(1, 48))
        mode = [FusionMode.ADD, FusionMode.LINEAR, FusionMode.ADAPTIVE][int(rng.integers(3))]
        cfg = FusionConfig.default(mode, d, seed=int(rng.integers(1 << 16)))
        fused = fuse(rng.standard_normal(d), rng.standard_normal(d), cfg)
        assert fused.shape == (d,)


def test_criterion_interruptions_land_inside_the_window_at_marks():
    """100/100 probes stop inside [t1, t2+margin]; every truncation sits on a segment mark."""
    bundles = gen_traces(31, {Subtask.VISUAL_INTERRUPTION: 100})
    assert len(bundles) == 100
    for bundle in bundles:
        ann = bundle.annotation
        marks = {ev.time for ev in bundle.events}

        probe_time = interruption_probe(
            ScriptedBackend(bundle.plan), bundle.events, ann.long_reply
        )
        assert probe_time is not None, ann.id
        assert ann.t1 <= probe_time <= ann.t2 + DEFAULT_MARGIN, ann.id
        assert probe_time in marks, ann.id

        transcript = run_session(
            bundle.events, ScriptedBackend(bundle.plan), EngineConfig(), ann.id
        )
        cut = [e for e in transcript.entries if e.terminated_by is Terminated.INTERRUPTED]
        stops = [e for e in transcript.entries if e.text == "⇓ Stop!"]
        assert len(cut) == 1 and len(stops) == 1, ann.id
        assert cut[0].end_time == stops[0].time, ann.id
        assert {cut[0].end_time, cut[0].time, stops[0].time} <= marks, ann.id


def test_criterion_pipeline_is_deterministic_byte_for_byte(tmp_path):
    """Two seeded generate/simulate/evaluate runs write identical report files."""
    reports = []
    for run in ("one", "two"):
        base = tmp_path / run
        base.mkdir()
        traces = str(base / "traces.jsonl")
        transcripts = str(base / "transcripts.jsonl")
        report = str(base / "report.json")
        assert main(["gen-traces", "--total", "70", "--seed", "11", "--out", traces]) == 0
        assert main(["simulate", "--traces", traces, "--seed", "11", "--out", transcripts]) == 0
        assert main(["eval", "--traces", traces, "--transcripts", transcripts,
                     "--judge", "mock", "--out", report]) == 0
        reports.append(Path(report).read_bytes())
    assert reports[0] == reports[1]
