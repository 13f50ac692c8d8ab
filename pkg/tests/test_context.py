"""Two-stream context growth and alignment invariants."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vistream.context import (
    Modality,
    SegmentEvent,
    TwoStreamContext,
    append_segment,
    embed_token,
)
from vistream.errors import RejectedInput

from suite_helpers import video_event

DIM = 16


def test_single_video_segment_appends_payload_and_mark():
    ctx = TwoStreamContext(dim=DIM)
    append_segment(ctx, video_event(1.0, DIM))
    assert len(ctx.user) == len(ctx.agent) == 2  # payload + segment mark
    assert ctx.seg_marks == [1]
    assert np.array_equal(ctx.agent[0], np.zeros(DIM))
    assert np.array_equal(ctx.agent[1], np.zeros(DIM))


def test_text_segment_appends_one_position_per_token():
    ctx = TwoStreamContext(dim=DIM)
    ev = SegmentEvent(time=1.0, modality=Modality.TEXT, payload=["what", "is", "this"])
    append_segment(ctx, ev)
    assert len(ctx.user) == 4  # 3 tokens + mark
    assert ctx.seg_marks == [3]


def test_sixty_segments_make_sixty_marks():
    ctx = TwoStreamContext(dim=DIM)
    for t in range(1, 61):
        append_segment(ctx, video_event(float(t), DIM))
    assert len(ctx.seg_marks) == 60
    assert len(ctx.user) == len(ctx.agent) == 120
    times = [ctx.seg_time(i) for i in range(60)]
    assert times == [float(t) for t in range(1, 61)]


def test_out_of_order_segment_rejected():
    ctx = TwoStreamContext(dim=DIM)
    append_segment(ctx, video_event(5.0, DIM))
    with pytest.raises(RejectedInput):
        append_segment(ctx, video_event(4.0, DIM))


def test_payload_dim_mismatch_rejected():
    ctx = TwoStreamContext(dim=DIM)
    with pytest.raises(RejectedInput):
        append_segment(ctx, video_event(1.0, dim=DIM + 1))


def test_nonfinite_payload_rejected():
    with pytest.raises(RejectedInput):
        SegmentEvent(time=1.0, modality=Modality.VIDEO, payload=np.full(DIM, np.nan))


def test_negative_time_rejected():
    with pytest.raises(RejectedInput):
        SegmentEvent(time=-0.5, modality=Modality.VIDEO, payload=np.zeros(DIM))


def test_embed_token_deterministic_and_distinct():
    a1 = embed_token("hello", DIM)
    a2 = embed_token("hello", DIM)
    b = embed_token("goodbye", DIM)
    assert np.array_equal(a1, a2)
    assert not np.array_equal(a1, b)
    assert a1.shape == (DIM,)


def test_write_agent_token_fills_only_that_position():
    ctx = TwoStreamContext(dim=DIM)
    append_segment(ctx, video_event(1.0, DIM))
    ctx.write_agent_token(ctx.last_seg_index, "⇓")
    assert not np.array_equal(ctx.agent[1], np.zeros(DIM))
    assert np.array_equal(ctx.agent[0], np.zeros(DIM))


@given(
    token_counts=st.lists(st.integers(min_value=0, max_value=5), min_size=1, max_size=30)
)
@settings(max_examples=100)
def test_streams_always_aligned(token_counts):
    """User and agent streams grow in lockstep for any event mix."""
    ctx = TwoStreamContext(dim=DIM)
    for i, n_tokens in enumerate(token_counts, start=1):
        if n_tokens == 0:
            ev = video_event(float(i), DIM)
        else:
            ev = SegmentEvent(
                time=float(i), modality=Modality.TEXT, payload=[f"w{j}" for j in range(n_tokens)]
            )
        append_segment(ctx, ev)
    assert len(ctx.user) == len(ctx.agent) == len(ctx.times)
    assert len(ctx.seg_marks) == len(token_counts)
    # marks strictly increase and each one closes its segment
    assert all(b > a for a, b in zip(ctx.seg_marks, ctx.seg_marks[1:]))
    assert ctx.seg_marks[-1] == len(ctx.user) - 1
