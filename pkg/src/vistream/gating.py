"""Segment-gated response triggering.

At every segment mark the backend hands back an informativeness score;
the engine speaks proactively only when that score strictly exceeds the
configured threshold. A direct text question from the user always wins
over visual gating. The score can be read at either of two positions
(the segment mark itself, or the last visual token before it); both are
always transmitted, so the choice is a pure config switch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from .context import Channel
from .errors import RejectedInput
from .protocol import SegmentReply

DEFAULT_THRESHOLD = 0.35


class ScorePosition(str, Enum):
    SEG_TOKEN = "seg_token"
    LAST_VISUAL_TOKEN = "last_visual_token"


class GateAction(str, Enum):
    SILENT = "silent"
    RESPOND = "respond"


@dataclass(frozen=True)
class GatingConfig:
    threshold: float = DEFAULT_THRESHOLD
    score_position: ScorePosition = ScorePosition.LAST_VISUAL_TOKEN

    def __post_init__(self) -> None:
        if not math.isfinite(self.threshold) or not (0.0 <= self.threshold <= 1.0):
            raise RejectedInput(f"threshold must be within [0, 1], got {self.threshold}")
        object.__setattr__(self, "score_position", ScorePosition(self.score_position))


@dataclass(frozen=True)
class GateDecision:
    action: GateAction
    channel: Channel | None = None

    def __post_init__(self) -> None:
        # a decision to respond always names its channel
        if self.action is GateAction.RESPOND and self.channel is None:
            raise RejectedInput("RESPOND decision requires a channel")
        if self.action is GateAction.SILENT and self.channel is not None:
            raise RejectedInput("SILENT decision carries no channel")


SILENT = GateDecision(GateAction.SILENT)


def should_speak(score: float, cfg: GatingConfig) -> bool:
    """Strict threshold test on one informativeness score."""
    if not isinstance(score, (int, float)) or isinstance(score, bool) or not math.isfinite(score):
        raise RejectedInput(f"score must be a finite number, got {score!r}")
    if not (0.0 <= score <= 1.0):
        raise RejectedInput(f"score must be within [0, 1], got {score}")
    return score > cfg.threshold


def decide(reply: SegmentReply, cfg: GatingConfig) -> GateDecision:
    """Gate one segment reply.

    An explicit text turn takes precedence over visual gating; otherwise
    the score at the configured position decides, strictly above
    threshold.
    """
    if reply.text_turn:
        return GateDecision(GateAction.RESPOND, Channel.TEXT)
    if should_speak(reply.score_at(cfg.score_position.value), cfg):
        return GateDecision(GateAction.RESPOND, Channel.VISUAL)
    return SILENT
