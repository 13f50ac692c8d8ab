"""Streaming two-stream interaction engine and benchmark harness."""

from .context import (
    Channel,
    FusionConfig,
    FusionMode,
    Modality,
    SegmentEvent,
    TwoStreamContext,
    append_segment,
    fuse,
    fuse_add,
    fuse_adaptive,
    fuse_linear,
    fused_view,
)
from .data import (
    Annotation,
    DialogueTurn,
    Subtask,
    TraceBundle,
    TraceGenConfig,
    default_mix,
    gen_traces,
    load_annotations,
    load_traces,
    load_transcripts,
    save_annotations,
    save_traces,
    save_transcripts,
)
from .engine import (
    EngineConfig,
    Phase,
    SessionState,
    SessionTranscript,
    TranscriptEntry,
    WaveKind,
    advance,
    classify_wave,
    run_session,
    start_response,
)
from .errors import (
    ConnectionFailed,
    ContractViolation,
    ProtocolError,
    RejectedInput,
    SchemaError,
    VistreamError,
)
from .evaluator import (
    BenchReport,
    JudgeVerdict,
    SubtaskReport,
    aggregate_rows,
    build_judge_prompt,
    emit_report,
    evaluate,
    interruption_probe,
    judge_text,
    overall,
    response_time,
    score_choice,
    time_accuracy,
    two_step_offline,
)
from .gating import GateAction, GateDecision, GatingConfig, ScorePosition, decide, should_speak
from .judges import CommandJudge, HttpJudge, Judge, MockJudge, make_judge
from .protocol import (
    Backend,
    GenerateReply,
    Message,
    NoiseConfig,
    RemoteBackend,
    ScorePlan,
    ScriptedBackend,
    SegmentReply,
    decode_frame,
    encode_frame,
    iter_frames,
)

__version__ = "0.1.0"
