"""Dataset types, trace generation, and JSONL persistence.

Three file kinds, all newline-delimited JSON with a one-line schema
header: annotations (ground truth per question), traces (annotation
plus segment events plus the scripted backend's plan), and transcripts
(engine output per session). Serialization is canonical - fixed key
order, compact separators - so saving what was loaded reproduces the
file byte for byte. Loading is strict: every invalid line is collected
and reported in a single SchemaError naming line and field.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .context import Modality, SegmentEvent
from .engine import SessionTranscript, Terminated, TranscriptEntry
from .errors import RejectedInput, SchemaError
from .context import Channel
from .protocol import ScorePlan

SCHEMA_VERSION = 1
DEFAULT_MARGIN = 2.0
_JSON_OPTS = {"separators": (",", ":"), "ensure_ascii": False}


class Subtask(str, Enum):
    VISUAL_WAKE_UP = "VW"
    ANOMALY_WARNING = "AW"
    GESTURE_UNDERSTANDING = "GU"
    VISUAL_REFERENCE = "VR"
    VISUAL_INTERRUPTION = "VI"
    HUMOR_REACTION = "HR"
    VISUAL_TERMINATION = "VT"


# column orders used everywhere a report or table is rendered
TIMED_SUBTASKS = (
    Subtask.ANOMALY_WARNING,
    Subtask.VISUAL_INTERRUPTION,
    Subtask.HUMOR_REACTION,
    Subtask.VISUAL_WAKE_UP,
    Subtask.VISUAL_TERMINATION,
    Subtask.GESTURE_UNDERSTANDING,
)
TEXT_SUBTASKS = (Subtask.VISUAL_REFERENCE,) + TIMED_SUBTASKS
ALL_SUBTASKS = TEXT_SUBTASKS

# benchmark question mix, as weights out of 10
MIX_WEIGHTS = {
    Subtask.VISUAL_WAKE_UP: 1,
    Subtask.ANOMALY_WARNING: 2,
    Subtask.GESTURE_UNDERSTANDING: 2,
    Subtask.VISUAL_REFERENCE: 2,
    Subtask.VISUAL_INTERRUPTION: 1,
    Subtask.HUMOR_REACTION: 1,
    Subtask.VISUAL_TERMINATION: 1,
}


def default_mix(total: int) -> dict[Subtask, int]:
    """Scale the standard subtask mix to ``total`` questions."""
    if total <= 0 or total % 10 != 0:
        raise RejectedInput(f"total must be a positive multiple of 10, got {total}")
    return {task: MIX_WEIGHTS[task] * total // 10 for task in ALL_SUBTASKS}


@dataclass
class DialogueTurn:
    role: str  # "user" | "agent"
    channel: str
    text: str
    time: float

    def to_dict(self) -> dict:
        return {"role": self.role, "channel": self.channel, "text": self.text, "time": self.time}

    @classmethod
    def from_dict(cls, obj: dict) -> "DialogueTurn":
        return cls(role=obj["role"], channel=obj["channel"], text=obj["text"], time=float(obj["time"]))


@dataclass
class Annotation:
    """Ground truth for one benchmark question.

    ``t1``/``t2`` bound the annotated event; a response landing inside
    [t1, t2 + margin] counts as timely. ``action`` names the visual
    event a backend is expected to recognize. ``choices``/
    ``answer_index`` exist only for multi-choice questions, and
    ``long_reply`` only for interruption questions (the answer being
    spoken when the stop signal arrives).
    """

    id: str
    subtask: Subtask
    t1: float
    t2: float
    margin: float | None = None
    action: str | None = None
    reference: str = ""
    context: list[DialogueTurn] = field(default_factory=list)
    choices: list[str] | None = None
    answer_index: int | None = None
    long_reply: str | None = None

    def __post_init__(self) -> None:
        self.subtask = Subtask(self.subtask)

    def validate(self) -> list[tuple[str, str]]:
        problems: list[tuple[str, str]] = []
        if not self.id or not isinstance(self.id, str):
            problems.append(("id", "must be a non-empty string"))
        if not isinstance(self.t1, (int, float)) or not isinstance(self.t2, (int, float)):
            problems.append(("t1", "t1/t2 must be numbers"))
        else:
            if self.t1 < 0:
                problems.append(("t1", "must be >= 0"))
            if self.t2 < self.t1:
                problems.append(("t2", f"t2={self.t2} earlier than t1={self.t1}"))
        if self.margin is not None and (not isinstance(self.margin, (int, float)) or self.margin < 0):
            problems.append(("margin", "must be null or a number >= 0"))
        if self.subtask is Subtask.VISUAL_REFERENCE:
            if not self.choices or len(self.choices) != 4:
                problems.append(("choices", "multi-choice question needs exactly 4 choices"))
            elif len(set(self.choices)) != 4:
                problems.append(("choices", "choices must be distinct"))
            if self.answer_index is None or not (0 <= int(self.answer_index) < 4):
                problems.append(("answer_index", "must be within [0, 3]"))
        elif self.choices is not None or self.answer_index is not None:
            problems.append(("choices", "only multi-choice questions carry choices"))
        if self.subtask is Subtask.VISUAL_INTERRUPTION and not self.long_reply:
            problems.append(("long_reply", "interruption question needs the reply being spoken"))
        for i, turn in enumerate(self.context):
            if turn.role not in ("user", "agent"):
                problems.append((f"context[{i}].role", f"unknown role '{turn.role}'"))
            if turn.time < 0:
                problems.append((f"context[{i}].time", "must be >= 0"))
        return problems

    def to_dict(self) -> dict:
        obj = {
            "id": self.id,
            "subtask": self.subtask.value,
            "t1": self.t1,
            "t2": self.t2,
            "margin": self.margin,
            "action": self.action,
            "reference": self.reference,
            "context": [t.to_dict() for t in self.context],
        }
        if self.choices is not None:
            obj["choices"] = list(self.choices)
            obj["answer_index"] = self.answer_index
        if self.long_reply is not None:
            obj["long_reply"] = self.long_reply
        return obj

    @classmethod
    def from_dict(cls, obj: dict) -> "Annotation":
        return cls(
            id=obj["id"],
            subtask=Subtask(obj["subtask"]),
            t1=float(obj["t1"]),
            t2=float(obj["t2"]),
            margin=None if obj.get("margin") is None else float(obj["margin"]),
            action=obj.get("action"),
            reference=obj.get("reference", ""),
            context=[DialogueTurn.from_dict(t) for t in obj.get("context", [])],
            choices=list(obj["choices"]) if obj.get("choices") is not None else None,
            answer_index=None if obj.get("answer_index") is None else int(obj["answer_index"]),
            long_reply=obj.get("long_reply"),
        )


@dataclass
class TraceBundle:
    """Everything one closed-loop session needs: truth, inputs, script."""

    annotation: Annotation
    events: list[SegmentEvent]
    plan: ScorePlan

    @property
    def duration(self) -> float:
        return self.events[-1].time if self.events else 0.0

    def to_dict(self) -> dict:
        events = []
        for ev in self.events:
            payload = list(ev.payload) if ev.modality is Modality.TEXT else [float(x) for x in ev.payload]
            events.append({"time": ev.time, "modality": ev.modality.value, "payload": payload})
        return {"id": self.annotation.id, "annotation": self.annotation.to_dict(),
                "events": events, "plan": self.plan.to_dict()}

    @classmethod
    def from_dict(cls, obj: dict) -> "TraceBundle":
        events = [
            SegmentEvent(time=float(e["time"]), modality=Modality(e["modality"]), payload=e["payload"])
            for e in obj["events"]
        ]
        return cls(
            annotation=Annotation.from_dict(obj["annotation"]),
            events=events,
            plan=ScorePlan.from_dict(obj["plan"]),
        )


# ---------------------------------------------------------------------------
# trace generation

@dataclass
class TraceGenConfig:
    dim: int = 16
    margin: float | None = None  # copied into annotations when set

    def __post_init__(self) -> None:
        if self.dim <= 0:
            raise RejectedInput(f"dim must be positive, got {self.dim}")
        if self.margin is not None and self.margin < 0:
            raise RejectedInput(f"margin must be >= 0, got {self.margin}")


_GREETINGS = [
    "Hello! How can I assist you today?",
    "Hi there! What can I do for you?",
    "Welcome back! How can I help?",
]
_FAREWELLS = [
    "Goodbye! Talk to you next time.",
    "See you later! Ending our chat now.",
    "Bye! It was nice talking with you.",
]
_GESTURES = [
    ("thumbs_up", "I see your thumbs up, glad you like it!"),
    ("ok_sign", "You made an OK sign, so we are all set."),
    ("heart_hands", "A heart gesture, thank you for the love!"),
    ("raised_fist", "A raised fist, I can feel the determination!"),
]
_ANOMALIES = [
    "Someone just fell off the bike, please check if they are hurt and call for help if needed.",
    "A pot is boiling over on the stove, you should turn down the heat right away.",
    "The child knocked a vase off the table, watch out for broken glass on the floor.",
]
_HUMOR = [
    "That cat just slipped off the couch while sleeping, such a clumsy nap!",
    "The dog keeps chasing its own tail in circles and never catches it!",
    "He walked straight into the glass door he had just cleaned, classic slapstick.",
]
_VR_POOL = [
    "a red mug", "a blue notebook", "a pair of scissors", "a desk lamp",
    "a potted plant", "a coffee grinder", "a stapler", "a water bottle",
]
_CONTEXT_QA = [
    ("Can you tell me something interesting?", "Of course, did you know honey never spoils?"),
    ("What is the weather like for a picnic?", "Mild and sunny, a great day to be outside."),
    ("Any suggestion for a quick snack?", "Sliced apples with peanut butter are quick and tasty."),
]
_LONG_REPLY = (
    "Sure. Photosynthesis is the process by which green plants convert sunlight water "
    "and carbon dioxide into glucose and oxygen through chlorophyll inside leaf cells "
    "over many daylight hours across every growing season."
)
_VI_QUESTION = "Can you explain photosynthesis in detail?"
_VR_QUESTION = "What is this item I am pointing at?"
STOP_REFERENCE = "Stop!"


def _tokens(text: str) -> list[str]:
    return text.split()


def gen_traces(
    seed: int,
    counts: dict[Subtask, int],
    cfg: TraceGenConfig | None = None,
) -> list[TraceBundle]:
    """Deterministically build trace bundles for the requested mix.

    Every bundle places its annotated event at a single segment mark
    (t1 == t2), far enough after any scripted context exchange that the
    agent is idle when the event lands; interruption traces instead
    place the stop signal while the scripted long reply is still being
    spoken. All event times are whole seconds.
    """
    cfg = cfg or TraceGenConfig()
    bundles: list[TraceBundle] = []
    index = 0
    for subtask in ALL_SUBTASKS:
        for _ in range(counts.get(subtask, 0)):
            bundles.append(_gen_one(seed, index, subtask, cfg))
            index += 1
    return bundles


def _gen_one(seed: int, index: int, subtask: Subtask, cfg: TraceGenConfig) -> TraceBundle:
    rng = random.Random(f"{seed}:{index}:{subtask.value}")
    np_rng = np.random.default_rng(np.random.SeedSequence([seed, index]))
    qid = f"{subtask.value.lower()}-{index:04d}"

    context: list[DialogueTurn] = []
    text_turns: dict[float, list[str]] = {}
    question_events: dict[float, list[str]] = {}
    choices = None
    answer_index = None
    long_reply = None

    if subtask in (Subtask.GESTURE_UNDERSTANDING, Subtask.VISUAL_TERMINATION, Subtask.VISUAL_REFERENCE):
        question, reply = rng.choice(_CONTEXT_QA)
        q_time = 1.0
        reply_tokens = _tokens(reply)
        text_turns[q_time] = reply_tokens
        question_events[q_time] = _tokens(question)
        context.append(DialogueTurn(role="user", channel="text", text=question, time=q_time))
        context.append(DialogueTurn(role="agent", channel="text", text=reply, time=q_time))
        # reply occupies marks q_time .. q_time+len(reply_tokens)
        earliest = q_time + len(reply_tokens) + 2
    elif subtask is Subtask.VISUAL_INTERRUPTION:
        q_time = 1.0
        long_reply = _LONG_REPLY
        reply_tokens = _tokens(long_reply)
        text_turns[q_time] = reply_tokens
        question_events[q_time] = _tokens(_VI_QUESTION)
        context.append(DialogueTurn(role="user", channel="text", text=_VI_QUESTION, time=q_time))
        earliest = q_time + 3
    else:
        earliest = 2.0

    if subtask is Subtask.VISUAL_WAKE_UP:
        action, reference = "wave", rng.choice(_GREETINGS)
    elif subtask is Subtask.VISUAL_TERMINATION:
        action, reference = "wave", rng.choice(_FAREWELLS)
    elif subtask is Subtask.GESTURE_UNDERSTANDING:
        action, reference = rng.choice(_GESTURES)
    elif subtask is Subtask.ANOMALY_WARNING:
        action, reference = "anomaly", rng.choice(_ANOMALIES)
    elif subtask is Subtask.HUMOR_REACTION:
        action, reference = "funny_event", rng.choice(_HUMOR)
    elif subtask is Subtask.VISUAL_INTERRUPTION:
        action, reference = "stop", STOP_REFERENCE
    else:
        action = "point"
        choices = rng.sample(_VR_POOL, 4)
        answer_index = rng.randrange(4)
        reference = choices[answer_index]

    if subtask is Subtask.VISUAL_INTERRUPTION:
        # stop lands while the long reply is still being spoken
        reply_len = len(_tokens(long_reply))
        t1 = float(rng.randint(int(earliest), reply_len - 3))
        duration = t1 + rng.randint(3, 6)
        response_tokens = [STOP_REFERENCE]
    elif subtask is Subtask.VISUAL_REFERENCE:
        t1 = float(rng.randint(int(earliest), int(earliest) + 4))
        answer_tokens = _tokens(reference)
        text_turns[t1] = answer_tokens
        question_events[t1] = _tokens(_VR_QUESTION)
        context.append(DialogueTurn(role="user", channel="text", text=_VR_QUESTION, time=t1))
        duration = t1 + len(answer_tokens) + rng.randint(2, 4)
        response_tokens = answer_tokens
    else:
        t1 = float(rng.randint(int(earliest), int(earliest) + 4))
        response_tokens = _tokens(reference)
        duration = t1 + len(response_tokens) + rng.randint(2, 4)

    annotation = Annotation(
        id=qid,
        subtask=subtask,
        t1=t1,
        t2=t1,
        margin=cfg.margin,
        action=action,
        reference=reference,
        context=context,
        choices=choices,
        answer_index=answer_index,
        long_reply=long_reply,
    )

    events: list[SegmentEvent] = []
    for step in range(1, int(duration) + 1):
        t = float(step)
        if t in question_events:
            events.append(SegmentEvent(time=t, modality=Modality.TEXT, payload=question_events[t]))
        else:
            events.append(
                SegmentEvent(time=t, modality=Modality.VIDEO, payload=np_rng.standard_normal(cfg.dim))
            )

    plan = ScorePlan(
        high_start=t1,
        high_end=t1,
        action=action,
        response_tokens=response_tokens,
        text_turns=text_turns,
    )
    return TraceBundle(annotation=annotation, events=events, plan=plan)


# ---------------------------------------------------------------------------
# JSONL persistence

def _dump_line(obj: dict) -> str:
    return json.dumps(obj, **_JSON_OPTS) + "\n"


def _header(schema: str) -> dict:
    return {"schema": schema, "version": SCHEMA_VERSION}


def _read_lines(path: str | Path, schema: str) -> list[tuple[int, dict]]:
    path = Path(path)
    problems: list[tuple[int, str, str]] = []
    rows: list[tuple[int, dict]] = []
    with path.open("r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise SchemaError(str(path), [(1, "schema", "empty file, expected a header line")])
    try:
        head = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise SchemaError(str(path), [(1, "schema", f"unparsable header: {exc}")]) from exc
    if not isinstance(head, dict) or head.get("schema") != schema:
        raise SchemaError(str(path), [(1, "schema", f"expected schema '{schema}', got {head!r}")])
    if head.get("version") != SCHEMA_VERSION:
        raise SchemaError(str(path), [(1, "version", f"unsupported version {head.get('version')!r}")])
    for n, raw in enumerate(lines[1:], start=2):
        if not raw.strip():
            continue
        try:
            obj = json.loads(raw)
            if not isinstance(obj, dict):
                raise ValueError("line is not a JSON object")
        except (json.JSONDecodeError, ValueError) as exc:
            problems.append((n, "json", str(exc)))
            continue
        rows.append((n, obj))
    if problems:
        raise SchemaError(str(path), problems)
    return rows


def save_annotations(path: str | Path, annotations: list[Annotation]) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        fh.write(_dump_line(_header("annotations")))
        for ann in annotations:
            fh.write(_dump_line(ann.to_dict()))


def load_annotations(path: str | Path) -> list[Annotation]:
    rows = _read_lines(path, "annotations")
    problems: list[tuple[int, str, str]] = []
    out: list[Annotation] = []
    for n, obj in rows:
        try:
            ann = Annotation.from_dict(obj)
        except (KeyError, ValueError, TypeError) as exc:
            problems.append((n, "record", f"cannot parse annotation: {exc!r}"))
            continue
        for fname, msg in ann.validate():
            problems.append((n, fname, msg))
        out.append(ann)
    if problems:
        raise SchemaError(str(path), problems)
    return out


def save_traces(path: str | Path, bundles: list[TraceBundle]) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        fh.write(_dump_line(_header("traces")))
        for bundle in bundles:
            fh.write(_dump_line(bundle.to_dict()))


def load_traces(path: str | Path) -> list[TraceBundle]:
    rows = _read_lines(path, "traces")
    problems: list[tuple[int, str, str]] = []
    out: list[TraceBundle] = []
    for n, obj in rows:
        try:
            bundle = TraceBundle.from_dict(obj)
        except (KeyError, ValueError, TypeError, RejectedInput) as exc:
            problems.append((n, "record", f"cannot parse trace: {exc!r}"))
            continue
        for fname, msg in bundle.annotation.validate():
            problems.append((n, fname, msg))
        out.append(bundle)
    if problems:
        raise SchemaError(str(path), problems)
    return out


def transcript_to_dict(tr: SessionTranscript) -> dict:
    return {
        "question_id": tr.question_id,
        "entries": [
            {
                "time": e.time,
                "end_time": e.end_time,
                "channel": e.channel.value,
                "text": e.text,
                "terminated_by": e.terminated_by.value,
            }
            for e in tr.entries
        ],
        "aborted": tr.aborted,
    }


def transcript_from_dict(obj: dict) -> SessionTranscript:
    entries = [
        TranscriptEntry(
            time=float(e["time"]),
            end_time=float(e["end_time"]),
            channel=Channel(e["channel"]),
            text=e["text"],
            terminated_by=Terminated(e["terminated_by"]),
        )
        for e in obj.get("entries", [])
    ]
    return SessionTranscript(
        question_id=obj["question_id"], entries=entries, aborted=obj.get("aborted")
    )


def save_transcripts(path: str | Path, transcripts: list[SessionTranscript]) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        fh.write(_dump_line(_header("transcripts")))
        for tr in transcripts:
            fh.write(_dump_line(transcript_to_dict(tr)))


def load_transcripts(path: str | Path) -> list[SessionTranscript]:
    rows = _read_lines(path, "transcripts")
    problems: list[tuple[int, str, str]] = []
    out: list[SessionTranscript] = []
    for n, obj in rows:
        try:
            out.append(transcript_from_dict(obj))
        except (KeyError, ValueError, TypeError) as exc:
            problems.append((n, "record", f"cannot parse transcript: {exc!r}"))
    if problems:
        raise SchemaError(str(path), problems)
    return out
