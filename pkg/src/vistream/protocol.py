"""Backend wire protocol: framing, codec, and backend implementations.

The engine talks to a model backend through a tiny request/reply
protocol. In-process backends implement :class:`Backend` directly; a
remote backend speaks newline-delimited JSON over a byte stream (one
frame per line, UTF-8, strictly lockstep: each request is answered
before the next is sent, and both sides carry a shared sequence
number). The exact frame schemas are documented in protocol.md at the
repository root; that file is normative for field names.

Two failure families are kept distinct on purpose:

* :class:`~vistream.errors.ProtocolError` - the peer answered, but with
  a malformed frame, a wrong sequence number, an out-of-range score, or
  not within the timeout.
* :class:`~vistream.errors.ConnectionFailed` - the peer could not be
  reached, or the connection died mid-session.
"""

from __future__ import annotations

import json
import random
import socket
from dataclasses import dataclass, field
from typing import Iterator

from .context import Channel, Modality, SegmentEvent
from .errors import ConnectionFailed, ContractViolation, ProtocolError

PROTOCOL_VERSION = 1
DEFAULT_TIMEOUT = 30.0

REQUEST_KINDS = ("init", "segment", "generate", "close")
REPLY_KINDS = ("init_ok", "segment_reply", "token", "bye", "error")

_JSON_OPTS = {"separators": (",", ":"), "ensure_ascii": False, "sort_keys": False}


# ---------------------------------------------------------------------------
# messages

@dataclass(frozen=True)
class SegmentReply:
    """Backend verdict about one ingested segment.

    Carries the informativeness score read at both candidate positions
    (segment mark and last visual token) so switching between them is
    purely an engine-side config choice. ``text_turn`` flags that the
    user just addressed the agent directly; ``recognized_action`` names
    a ground-truth visual event when the backend saw one.
    """

    inform_score_seg: float
    inform_score_visual: float
    text_turn: bool = False
    recognized_action: str | None = None

    def score_at(self, position: str) -> float:
        if position == "seg_token":
            return self.inform_score_seg
        if position == "last_visual_token":
            return self.inform_score_visual
        raise ProtocolError(f"unknown score position '{position}'")


@dataclass(frozen=True)
class GenerateReply:
    """One generation step: a token and whether the response is finished."""

    token: str
    done: bool


@dataclass(frozen=True)
class Message:
    """A decoded wire frame: sequence number, kind, and payload fields."""

    seq: int
    kind: str
    fields: dict

    def get(self, name: str, default=None):
        return self.fields.get(name, default)


_REQUIRED_FIELDS = {
    "init": ("session", "dim"),
    "segment": ("time", "modality", "payload"),
    "generate": ("channel", "time", "begin"),
    "close": (),
    "init_ok": (),
    "segment_reply": ("inform_score_seg", "inform_score_visual", "text_turn"),
    "token": ("token", "done"),
    "bye": (),
    "error": ("message",),
}


def encode_frame(msg: Message) -> bytes:
    """Serialize one frame to a single NDJSON line (trailing newline)."""
    body = {"seq": msg.seq, "kind": msg.kind}
    body.update(msg.fields)
    return (json.dumps(body, **_JSON_OPTS) + "\n").encode("utf-8")


def decode_frame(line: bytes, byte_offset: int = 0) -> Message:
    """Parse one frame line; raises ProtocolError with the byte offset."""
    try:
        obj = json.loads(line.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ProtocolError(f"malformed frame: {exc}", byte_offset) from exc
    if not isinstance(obj, dict):
        raise ProtocolError("frame must be a JSON object", byte_offset)
    seq = obj.pop("seq", None)
    kind = obj.pop("kind", None)
    if not isinstance(seq, int) or seq < 0:
        raise ProtocolError("frame missing non-negative integer 'seq'", byte_offset)
    if kind not in _REQUIRED_FIELDS:
        raise ProtocolError(f"unknown frame kind '{kind}'", byte_offset)
    for name in _REQUIRED_FIELDS[kind]:
        if name not in obj:
            raise ProtocolError(f"frame kind '{kind}' missing field '{name}'", byte_offset)
    return Message(seq=seq, kind=kind, fields=obj)


def iter_frames(data: bytes) -> Iterator[tuple[int, Message]]:
    """Decode a buffer of frames, yielding (byte_offset, message) pairs."""
    offset = 0
    for raw in data.split(b"\n"):
        if raw:
            yield offset, decode_frame(raw, offset)
        offset += len(raw) + 1


def validate_segment_reply(msg: Message, byte_offset: int | None = None) -> SegmentReply:
    """Range-check a segment_reply frame and lift it into a SegmentReply."""
    scores = {}
    for name in ("inform_score_seg", "inform_score_visual"):
        value = msg.get(name)
        if not isinstance(value, (int, float)) or isinstance(value, bool) or not (0.0 <= value <= 1.0):
            raise ProtocolError(f"{name}={value!r} outside [0, 1]", byte_offset)
        scores[name] = float(value)
    text_turn = msg.get("text_turn")
    if not isinstance(text_turn, bool):
        raise ProtocolError(f"text_turn must be a boolean, got {text_turn!r}", byte_offset)
    action = msg.get("recognized_action")
    if action is not None and not isinstance(action, str):
        raise ProtocolError(f"recognized_action must be a string or null, got {action!r}", byte_offset)
    return SegmentReply(
        inform_score_seg=scores["inform_score_seg"],
        inform_score_visual=scores["inform_score_visual"],
        text_turn=text_turn,
        recognized_action=action,
    )


# ---------------------------------------------------------------------------
# backend interface

class Backend:
    """What the engine needs from a model backend.

    One session per backend instance. ``next_token`` is called once per
    engine step while a response is active; ``begin`` is true on the
    first pull of each response so the backend can select what to say.
    """

    def init(self, session_id: str, config: dict) -> None:
        raise NotImplementedError

    def on_segment(self, ev: SegmentEvent) -> SegmentReply:
        raise NotImplementedError

    def next_token(self, channel: Channel, time: float, begin: bool) -> GenerateReply:
        raise NotImplementedError

    def close(self) -> None:
        raise NotImplementedError


# ---------------------------------------------------------------------------
# scripted backend

@dataclass
class NoiseConfig:
    """Deterministic disturbance applied to a scripted backend.

    ``shift_seconds`` moves the whole visual plan (scores and action
    recognition) later in time; ``score_jitter`` adds seeded uniform
    noise of that amplitude to every score, clamped to [0, 1]. Large
    jitter can break the above-threshold guarantee; that is the point.
    """

    shift_seconds: float = 0.0
    score_jitter: float = 0.0
    seed: int = 0


@dataclass
class ScorePlan:
    """Ground-truth script a trace carries for its backend.

    ``high_start``/``high_end`` bound the segment times at which the
    informativeness scores exceed any reasonable threshold and
    ``action`` is recognized. ``text_turns`` maps a segment time to the
    reply tokens for a user question arriving at that time.
    ``response_tokens`` is the proactive reference response.
    """

    high_start: float
    high_end: float
    action: str
    response_tokens: list[str]
    text_turns: dict[float, list[str]] = field(default_factory=dict)
    high_visual: float = 0.9
    high_seg: float = 0.8
    low_visual: float = 0.05
    low_seg: float = 0.02

    def to_dict(self) -> dict:
        return {
            "high_start": self.high_start,
            "high_end": self.high_end,
            "action": self.action,
            "response_tokens": list(self.response_tokens),
            "text_turns": {str(t): list(toks) for t, toks in sorted(self.text_turns.items())},
            "high_visual": self.high_visual,
            "high_seg": self.high_seg,
            "low_visual": self.low_visual,
            "low_seg": self.low_seg,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "ScorePlan":
        return cls(
            high_start=float(obj["high_start"]),
            high_end=float(obj["high_end"]),
            action=obj["action"],
            response_tokens=list(obj["response_tokens"]),
            text_turns={float(t): list(toks) for t, toks in obj.get("text_turns", {}).items()},
            high_visual=float(obj.get("high_visual", 0.9)),
            high_seg=float(obj.get("high_seg", 0.8)),
            low_visual=float(obj.get("low_visual", 0.05)),
            low_seg=float(obj.get("low_seg", 0.02)),
        )


class ScriptedBackend(Backend):
    """Deterministic backend that replays a trace's ground-truth plan.

    Emits above-threshold scores exactly at segment times inside
    [high_start, high_end] (after the configured shift), recognizes the
    annotated action there, flags scripted text turns, and generates
    reference responses verbatim, one token per pull.
    """

    def __init__(self, plan: ScorePlan, noise: NoiseConfig | None = None):
        self.plan = plan
        self.noise = noise or NoiseConfig()
        self._rng = random.Random(self.noise.seed)
        self._pending_text: list[list[str]] = []
        self._stream: list[str] = []
        self._cursor = 0
        self._initialized = False

    def init(self, session_id: str, config: dict) -> None:
        self._initialized = True

    def _jittered(self, base: float) -> float:
        if self.noise.score_jitter > 0.0:
            base += self._rng.uniform(-self.noise.score_jitter, self.noise.score_jitter)
        return min(1.0, max(0.0, base))

    def on_segment(self, ev: SegmentEvent) -> SegmentReply:
        if not self._initialized:
            raise ContractViolation("backend used before init")
        shift = self.noise.shift_seconds
        in_window = (self.plan.high_start + shift) <= ev.time <= (self.plan.high_end + shift)
        reply_tokens = self.plan.text_turns.get(ev.time)
        if reply_tokens is not None:
            self._pending_text.append(list(reply_tokens))
        return SegmentReply(
            inform_score_seg=self._jittered(self.plan.high_seg if in_window else self.plan.low_seg),
            inform_score_visual=self._jittered(self.plan.high_visual if in_window else self.plan.low_visual),
            text_turn=reply_tokens is not None,
            recognized_action=self.plan.action if in_window else None,
        )

    def next_token(self, channel: Channel, time: float, begin: bool) -> GenerateReply:
        if begin:
            if channel is Channel.TEXT and self._pending_text:
                self._stream = self._pending_text.pop(0)
            else:
                self._stream = list(self.plan.response_tokens)
            self._cursor = 0
        if self._cursor >= len(self._stream):
            return GenerateReply(token="", done=True)
        token = self._stream[self._cursor]
        self._cursor += 1
        return GenerateReply(token=token, done=self._cursor >= len(self._stream))

    def close(self) -> None:
        self._initialized = False


# ---------------------------------------------------------------------------
# remote backend client

def parse_address(spec: str) -> tuple[str, int]:
    """Parse 'host:port' (the part after a 'remote:' backend spec)."""
    host, sep, port = spec.rpartition(":")
    if not sep or not host:
        raise RejectedAddress(spec)
    try:
        return host, int(port)
    except ValueError:
        raise RejectedAddress(spec) from None


class RejectedAddress(ProtocolError):
    def __init__(self, spec: str):
        super().__init__(f"backend address must look like host:port, got '{spec}'")


class RemoteBackend(Backend):
    """Client for a backend served over a socket, one session per connection."""

    def __init__(self, host: str, port: int, timeout: float = DEFAULT_TIMEOUT):
        self._addr = (host, port)
        self._timeout = timeout
        self._sock: socket.socket | None = None
        self._file = None
        self._seq = 0

    def _connect(self) -> None:
        try:
            self._sock = socket.create_connection(self._addr, timeout=self._timeout)
        except OSError as exc:
            raise ConnectionFailed(f"cannot reach backend at {self._addr[0]}:{self._addr[1]}: {exc}") from exc
        self._file = self._sock.makefile("rb")

    def _roundtrip(self, kind: str, fields: dict) -> Message:
        if self._sock is None:
            raise ContractViolation("remote backend used before init")
        seq = self._seq
        self._seq += 1
        try:
            self._sock.sendall(encode_frame(Message(seq=seq, kind=kind, fields=fields)))
            line = self._file.readline()
        except socket.timeout as exc:
            raise ProtocolError(f"backend reply timed out after {self._timeout}s") from exc
        except OSError as exc:
            raise ConnectionFailed(f"connection to backend lost: {exc}") from exc
        if not line:
            raise ConnectionFailed("backend closed the connection mid-session")
        reply = decode_frame(line)
        if reply.kind == "error":
            raise ProtocolError(f"backend error: {reply.get('message')}")
        if reply.seq != seq:
            raise ProtocolError(f"sequence mismatch: sent {seq}, got {reply.seq}")
        return reply

    def init(self, session_id: str, config: dict) -> None:
        self._connect()
        reply = self._roundtrip("init", {"session": session_id, **config})
        if reply.kind != "init_ok":
            raise ProtocolError(f"expected init_ok, got '{reply.kind}'")

    def on_segment(self, ev: SegmentEvent) -> SegmentReply:
        payload = list(ev.payload) if ev.modality is Modality.TEXT else [float(x) for x in ev.payload]
        reply = self._roundtrip(
            "segment", {"time": ev.time, "modality": ev.modality.value, "payload": payload}
        )
        if reply.kind != "segment_reply":
            raise ProtocolError(f"expected segment_reply, got '{reply.kind}'")
        return validate_segment_reply(reply)

    def next_token(self, channel: Channel, time: float, begin: bool) -> GenerateReply:
        reply = self._roundtrip(
            "generate", {"channel": channel.value, "time": time, "begin": begin}
        )
        if reply.kind != "token":
            raise ProtocolError(f"expected token, got '{reply.kind}'")
        token = reply.get("token")
        done = reply.get("done")
        if not isinstance(token, str) or not isinstance(done, bool):
            raise ProtocolError(f"bad token frame: token={token!r} done={done!r}")
        return GenerateReply(token=token, done=done)

    def close(self) -> None:
        if self._sock is None:
            return
        try:
            self._roundtrip("close", {})
        except (ProtocolError, ConnectionFailed):
            pass
        finally:
            try:
                self._file.close()
                self._sock.close()
            except OSError:
                pass
            self._sock = None
