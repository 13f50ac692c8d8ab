"""Session state machine driving one streaming interaction.

Segments are ingested one per second of virtual time. At each segment
mark the engine either starts a response (text turn or open visual
gate), keeps generating an active response one token per step, or cuts
an active response short when the backend recognizes a stop signal
while the agent is speaking. Responses start and end only at segment
marks, so every transcript timestamp is a segment time.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from .context import (
    Channel,
    FusionConfig,
    SegmentEvent,
    TwoStreamContext,
    append_segment,
    fuse,
)
from .errors import ConnectionFailed, ContractViolation, ProtocolError
from .gating import GateAction, GatingConfig, decide, should_speak
from .protocol import Backend, SegmentReply

DEFAULT_TOKEN_CAP = 256
STOP_ACTION = "stop"
WAVE_ACTION = "wave"
STOP_TEXT = "Stop!"


class Phase(str, Enum):
    IDLE = "idle"
    IN_CONVERSATION = "in_conversation"
    AGENT_SPEAKING = "agent_speaking"


class WaveKind(str, Enum):
    VISUAL_WAKE_UP = "visual_wake_up"
    VISUAL_TERMINATION = "visual_termination"


class Terminated(str, Enum):
    COMPLETED = "completed"
    INTERRUPTED = "interrupted"


@dataclass
class EngineConfig:
    gating: GatingConfig = field(default_factory=GatingConfig)
    fusion: FusionConfig = field(default_factory=FusionConfig.default)
    dim: int = 16
    token_cap: int = DEFAULT_TOKEN_CAP


@dataclass
class TranscriptEntry:
    """One agent response: starts at ``time``, ends at ``end_time``."""

    time: float
    end_time: float
    channel: Channel
    text: str
    terminated_by: Terminated


@dataclass
class SessionTranscript:
    question_id: str
    entries: list[TranscriptEntry] = field(default_factory=list)
    aborted: dict | None = None


@dataclass
class EngineEvent:
    """Observable step outcome, mostly for tests and debugging."""

    kind: str
    time: float
    detail: str = ""


@dataclass
class _ActiveResponse:
    channel: Channel
    start_time: float
    tokens: list[str]
    last_time: float


@dataclass
class SessionState:
    config: EngineConfig
    context: TwoStreamContext = field(init=False)
    fused: list = field(default_factory=list)
    phase: Phase = Phase.IDLE
    dialogue_started: bool = False
    active: _ActiveResponse | None = None
    pending_text_turn: bool = False
    entries: list[TranscriptEntry] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.context = TwoStreamContext(dim=self.config.dim)

    @property
    def active_response(self) -> bool:
        return self.active is not None


def classify_wave(state: SessionState) -> WaveKind:
    """A wave before any dialogue wakes the agent; afterwards it ends it."""
    if state.dialogue_started:
        return WaveKind.VISUAL_TERMINATION
    return WaveKind.VISUAL_WAKE_UP


def start_response(state: SessionState, channel: Channel, time: float) -> EngineEvent:
    """Open a response at the current segment mark.

    The first emitted token is the channel prefix glyph, written into
    the agent stream at the mark position. Starting while another
    response is active is a contract violation.
    """
    if state.phase is Phase.AGENT_SPEAKING or state.active is not None:
        raise ContractViolation("cannot start a response while one is active")
    glyph = channel.glyph
    state.context.write_agent_token(state.context.last_seg_index, glyph)
    state.active = _ActiveResponse(channel=channel, start_time=time, tokens=[glyph], last_time=time)
    state.phase = Phase.AGENT_SPEAKING
    state.dialogue_started = True
    return EngineEvent(kind="response_started", time=time, detail=channel.value)


def _close_active(state: SessionState, end_time: float, how: Terminated) -> TranscriptEntry:
    resp = state.active
    entry = TranscriptEntry(
        time=resp.start_time,
        end_time=end_time,
        channel=resp.channel,
        text=" ".join(resp.tokens),
        terminated_by=how,
    )
    state.entries.append(entry)
    state.active = None
    state.phase = Phase.IN_CONVERSATION
    return entry


def _is_stop_signal(reply: SegmentReply, cfg: GatingConfig) -> bool:
    return reply.recognized_action == STOP_ACTION and should_speak(
        reply.score_at(cfg.score_position.value), cfg
    )


def advance(state: SessionState, ev: SegmentEvent, backend: Backend) -> list[EngineEvent]:
    """Ingest one segment and run the per-mark decision.

    While the agent is speaking only the interruption check runs (plus
    queueing of text turns); new triggers are otherwise suppressed until
    the active response ends.
    """
    cfg = state.config
    events: list[EngineEvent] = []

    before = len(state.context)
    append_segment(state.context, ev)
    for i in range(before, len(state.context)):
        state.fused.append(fuse(state.context.user[i], state.context.agent[i], cfg.fusion))
    t = ev.time

    reply = backend.on_segment(ev)

    if state.phase is Phase.AGENT_SPEAKING:
        if reply.text_turn:
            state.pending_text_turn = True
            events.append(EngineEvent(kind="text_turn_queued", time=t))
        if _is_stop_signal(reply, cfg.gating):
            _close_active(state, t, Terminated.INTERRUPTED)
            stop_text = f"{Channel.VISUAL.glyph} {STOP_TEXT}"
            state.context.write_agent_token(state.context.last_seg_index, Channel.VISUAL.glyph)
            state.entries.append(
                TranscriptEntry(
                    time=t,
                    end_time=t,
                    channel=Channel.VISUAL,
                    text=stop_text,
                    terminated_by=Terminated.COMPLETED,
                )
            )
            events.append(EngineEvent(kind="interrupted", time=t, detail=stop_text))
            return events

        begin = len(state.active.tokens) == 1
        step = backend.next_token(state.active.channel, t, begin)
        if step.token:
            state.context.write_agent_token(state.context.last_seg_index, step.token)
            state.active.tokens.append(step.token)
            state.active.last_time = t
            events.append(EngineEvent(kind="token", time=t, detail=step.token))
        if step.done or len(state.active.tokens) >= cfg.token_cap:
            _close_active(state, t, Terminated.COMPLETED)
            events.append(EngineEvent(kind="response_completed", time=t))
        return events

    if state.pending_text_turn:
        state.pending_text_turn = False
        events.append(start_response(state, Channel.TEXT, t))
        return events

    decision = decide(reply, cfg.gating)
    if decision.action is GateAction.RESPOND:
        if decision.channel is Channel.VISUAL and reply.recognized_action == WAVE_ACTION:
            kind = classify_wave(state)
            events.append(EngineEvent(kind="wave_classified", time=t, detail=kind.value))
        events.append(start_response(state, decision.channel, t))
    return events


def run_session(
    trace: list[SegmentEvent],
    backend: Backend,
    cfg: EngineConfig,
    question_id: str = "",
) -> SessionTranscript:
    """Drive a full session over a trace and return its transcript.

    Deterministic for deterministic backends. A protocol or connection
    failure aborts the session and is recorded on the transcript rather
    than raised, so batch runs keep going.
    """
    state = SessionState(config=cfg)
    transcript = SessionTranscript(question_id=question_id)
    backend.init(question_id, {"dim": cfg.dim, "threshold": cfg.gating.threshold,
                               "score_position": cfg.gating.score_position.value})
    try:
        for ev in trace:
            advance(state, ev, backend)
    except (ProtocolError, ConnectionFailed) as exc:
        when = state.context.last_event_time if len(state.context) else 0.0
        transcript.aborted = {"time": when, "error": type(exc).__name__, "message": str(exc)}
    finally:
        if state.active is not None:
            _close_active(state, state.active.last_time, Terminated.COMPLETED)
        try:
            backend.close()
        except (ProtocolError, ConnectionFailed):
            pass
    transcript.entries = state.entries
    return transcript
