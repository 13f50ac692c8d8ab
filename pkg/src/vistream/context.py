"""Time-aligned two-stream contexts and stream fusion.

The engine keeps two parallel streams of equal length: one for user
input (video frames, audio, text tokens, arriving in 1-second segments)
and one for the agent's own output, zero-padded wherever the agent is
silent. Every ingested segment is closed with a segment mark, and agent
responses may start or be cut only at those marks. Before the streams
would reach a language model they are merged position by position with
one of three fusion rules: elementwise addition, a learned linear map
over the concatenated pair, or an adaptive convex gate.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import ContractViolation, RejectedInput

SEG_TOKEN = "<seg>"
DEFAULT_DIM = 16


class Modality(str, Enum):
    VIDEO = "video"
    AUDIO = "audio"
    TEXT = "text"


class Channel(str, Enum):
    """Response channel; each renders as the glyph that prefixes a response."""

    TEXT = "text"
    AUDIO = "audio"
    VISUAL = "visual"

    @property
    def glyph(self) -> str:
        return _CHANNEL_GLYPHS[self]


_CHANNEL_GLYPHS = {
    Channel.TEXT: "⇐",    # ⇐  reply to a typed/asked question
    Channel.AUDIO: "⇒",   # ⇒  audio turn taking (carried, not emitted here)
    Channel.VISUAL: "⇓",  # ⇓  proactive reply to something seen
}

GLYPH_TO_CHANNEL = {v: k for k, v in _CHANNEL_GLYPHS.items()}


def embed_token(token: str, dim: int) -> np.ndarray:
    """Deterministic pseudo-embedding for a text token.

    Hash-seeded so the same token maps to the same vector across runs
    and processes; stands in for a real embedding table.
    """
    digest = hashlib.sha256(token.encode("utf-8")).digest()
    seed = int.from_bytes(digest[:8], "big")
    rng = np.random.default_rng(seed)
    return rng.standard_normal(dim)


@dataclass
class SegmentEvent:
    """One 1-second slice of user input, timestamped at its end.

    ``payload`` is a length-``d`` feature vector for video/audio, or a
    list of token strings for text.
    """

    time: float
    modality: Modality
    payload: object

    def __post_init__(self) -> None:
        self.modality = Modality(self.modality)
        if not math.isfinite(self.time) or self.time < 0:
            raise RejectedInput(f"segment time must be finite and >= 0, got {self.time}")
        if self.modality is Modality.TEXT:
            if not isinstance(self.payload, (list, tuple)) or not all(
                isinstance(t, str) for t in self.payload
            ):
                raise RejectedInput("text segment payload must be a list of token strings")
            self.payload = list(self.payload)
        else:
            vec = np.asarray(self.payload, dtype=float)
            if vec.ndim != 1 or vec.size == 0:
                raise RejectedInput("feature payload must be a non-empty 1-d vector")
            if not np.isfinite(vec).all():
                raise RejectedInput("feature payload must be finite")
            self.payload = vec


@dataclass
class TwoStreamContext:
    """User stream and agent stream, always the same length.

    Positions are vectors of dimension ``dim``. ``seg_marks`` holds the
    indices of segment-mark positions; ``times`` the timestamp each
    position belongs to. The agent stream holds zero vectors wherever
    the agent said nothing.
    """

    dim: int = DEFAULT_DIM
    user: list[np.ndarray] = field(default_factory=list)
    agent: list[np.ndarray] = field(default_factory=list)
    times: list[float] = field(default_factory=list)
    seg_marks: list[int] = field(default_factory=list)
    last_event_time: float = -1.0

    def __post_init__(self) -> None:
        if self.dim <= 0:
            raise RejectedInput(f"context dim must be positive, got {self.dim}")

    def __len__(self) -> int:
        return len(self.user)

    @property
    def last_seg_index(self) -> int:
        if not self.seg_marks:
            raise ContractViolation("context has no segment marks yet")
        return self.seg_marks[-1]

    def seg_time(self, mark_index: int) -> float:
        return self.times[self.seg_marks[mark_index]]

    def write_agent_token(self, position: int, token: str) -> None:
        """Place a generated token's vector into the agent stream."""
        if position < 0 or position >= len(self.agent):
            raise ContractViolation(f"agent position {position} out of range")
        self.agent[position] = embed_token(token, self.dim)


def append_segment(ctx: TwoStreamContext, ev: SegmentEvent) -> TwoStreamContext:
    """Ingest one segment: payload positions plus a closing segment mark.

    Rejects out-of-order events. Both streams grow by the same amount;
    the agent side is padded with zeros and may be overwritten later by
    ``write_agent_token``.
    """
    if ev.time < ctx.last_event_time:
        raise RejectedInput(
            f"segment at t={ev.time} arrived after t={ctx.last_event_time}"
        )
    if ev.modality is Modality.TEXT:
        new_user = [embed_token(tok, ctx.dim) for tok in ev.payload]
    else:
        if ev.payload.shape[0] != ctx.dim:
            raise RejectedInput(
                f"payload length {ev.payload.shape[0]} != configured dim {ctx.dim}"
            )
        new_user = [ev.payload]
    new_user.append(embed_token(SEG_TOKEN, ctx.dim))

    zero = np.zeros(ctx.dim)
    for vec in new_user:
        ctx.user.append(vec)
        ctx.agent.append(zero.copy())
        ctx.times.append(ev.time)
    ctx.seg_marks.append(len(ctx.user) - 1)
    ctx.last_event_time = ev.time
    return ctx


class FusionMode(str, Enum):
    ADD = "add"
    LINEAR = "linear"
    ADAPTIVE = "adaptive"


@dataclass
class FusionConfig:
    """Parameters for merging a (user, agent) position pair.

    LINEAR needs ``weight`` (d x 2d) and ``bias`` (d). ADAPTIVE needs
    ``gate`` (2d) and ``gate_bias``; its two stream weights are produced
    by a logistic squash and sum to 1 by construction. ADD needs nothing.
    """

    mode: FusionMode = FusionMode.ADAPTIVE
    dim: int = DEFAULT_DIM
    weight: np.ndarray | None = None
    bias: np.ndarray | None = None
    gate: np.ndarray | None = None
    gate_bias: float = 0.0

    def __post_init__(self) -> None:
        self.mode = FusionMode(self.mode)
        if self.dim <= 0:
            raise RejectedInput(f"fusion dim must be positive, got {self.dim}")
        if self.mode is FusionMode.LINEAR:
            if self.weight is None or self.bias is None:
                raise RejectedInput("linear fusion requires weight and bias")
            self.weight = _checked(np.asarray(self.weight, dtype=float), (self.dim, 2 * self.dim), "weight")
            self.bias = _checked(np.asarray(self.bias, dtype=float), (self.dim,), "bias")
        elif self.mode is FusionMode.ADAPTIVE:
            if self.gate is None:
                raise RejectedInput("adaptive fusion requires a gate vector")
            self.gate = _checked(np.asarray(self.gate, dtype=float), (2 * self.dim,), "gate")
            if not math.isfinite(self.gate_bias):
                raise RejectedInput("gate_bias must be finite")

    @classmethod
    def default(cls, mode: FusionMode = FusionMode.ADAPTIVE, dim: int = DEFAULT_DIM, seed: int = 0) -> "FusionConfig":
        """Seeded parameter initialization, handy for scripts and tests."""
        mode = FusionMode(mode)
        rng = np.random.default_rng(seed)
        if mode is FusionMode.ADD:
            return cls(mode=mode, dim=dim)
        if mode is FusionMode.LINEAR:
            scale = 1.0 / math.sqrt(2 * dim)
            return cls(
                mode=mode,
                dim=dim,
                weight=rng.standard_normal((dim, 2 * dim)) * scale,
                bias=rng.standard_normal(dim) * 0.01,
            )
        return cls(
            mode=mode,
            dim=dim,
            gate=rng.standard_normal(2 * dim) / math.sqrt(2 * dim),
            gate_bias=0.0,
        )


def _checked(arr: np.ndarray, shape: tuple[int, ...], name: str) -> np.ndarray:
    if arr.shape != shape:
        raise RejectedInput(f"fusion {name} must have shape {shape}, got {arr.shape}")
    if not np.isfinite(arr).all():
        raise RejectedInput(f"fusion {name} must be finite")
    return arr


def _pair(u: np.ndarray, a: np.ndarray, dim: int) -> tuple[np.ndarray, np.ndarray]:
    u = np.asarray(u, dtype=float)
    a = np.asarray(a, dtype=float)
    if u.shape != (dim,) or a.shape != (dim,):
        raise RejectedInput(f"fusion inputs must both have shape ({dim},)")
    return u, a


def _sigmoid(z: float) -> float:
    # numerically stable; saturates to exactly 0.0 / 1.0 for large |z|
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


def fuse_add(u: np.ndarray, a: np.ndarray, dim: int = DEFAULT_DIM) -> np.ndarray:
    """Elementwise sum of the two streams at one position."""
    u, a = _pair(u, a, dim)
    return u + a


def fuse_linear(u: np.ndarray, a: np.ndarray, cfg: FusionConfig) -> np.ndarray:
    """Learned linear map over the concatenated pair: W @ [u;a] + b."""
    if cfg.mode is not FusionMode.LINEAR:
        raise ContractViolation("fuse_linear requires a LINEAR config")
    u, a = _pair(u, a, cfg.dim)
    return cfg.weight @ np.concatenate([u, a]) + cfg.bias


def fuse_adaptive(u: np.ndarray, a: np.ndarray, cfg: FusionConfig) -> np.ndarray:
    """Convex gate: w = squash(g . [u;a] + c), result = w*u + (1-w)*a.

    The two weights sum to 1 by construction, so a saturated gate
    returns one stream exactly.
    """
    if cfg.mode is not FusionMode.ADAPTIVE:
        raise ContractViolation("fuse_adaptive requires an ADAPTIVE config")
    u, a = _pair(u, a, cfg.dim)
    w = _sigmoid(float(cfg.gate @ np.concatenate([u, a])) + cfg.gate_bias)
    return w * u + (1.0 - w) * a


def fuse(u: np.ndarray, a: np.ndarray, cfg: FusionConfig) -> np.ndarray:
    """Merge one position pair with whichever rule ``cfg`` selects."""
    if cfg.mode is FusionMode.ADD:
        return fuse_add(u, a, cfg.dim)
    if cfg.mode is FusionMode.LINEAR:
        return fuse_linear(u, a, cfg)
    return fuse_adaptive(u, a, cfg)


def fused_view(ctx: TwoStreamContext, cfg: FusionConfig) -> np.ndarray:
    """Merge the whole context into an (n, d) array, position by position."""
    if cfg.dim != ctx.dim:
        raise RejectedInput(f"fusion dim {cfg.dim} != context dim {ctx.dim}")
    if not ctx.user:
        return np.zeros((0, ctx.dim))
    return np.stack([fuse(u, a, cfg) for u, a in zip(ctx.user, ctx.agent)])
