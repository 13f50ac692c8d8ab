"""Neural mode: real encoders and a language model behind a hook.

The adapter itself ships no model weights. A deployment supplies a hook
object (loaded from a ``module:attribute`` spec) that wraps its
per-second encoders and language model; the session layer here only
adapts hook outputs to the wire protocol and enforces its range
contracts, so a misbehaving model can never produce an out-of-range
frame.
"""

from __future__ import annotations

import importlib


class ModelHook:
    """What a neural deployment must provide.

    ``score_segment`` consumes one input segment and returns a mapping
    with ``seg`` and ``visual`` scores (any real numbers; the session
    clamps), plus optional ``action`` (string) and ``text_turn`` (bool).
    ``next_token`` mirrors the generate step: return (token, done).
    """

    def score_segment(self, time: float, modality: str, payload) -> dict:
        raise NotImplementedError

    def next_token(self, channel: str, time: float, begin: bool) -> tuple[str, bool]:
        raise NotImplementedError


def resolve_hook_factory(spec: str):
    """Resolve ``module:attribute`` to a zero-argument hook factory.

    A class or factory function yields a fresh hook per call (one per
    session); an already-built instance is shared across sessions and
    must then tolerate sequential reuse.
    """
    module_name, sep, attr = spec.partition(":")
    if not sep or not module_name or not attr:
        raise ValueError(f"model hook spec must look like module:attribute, got '{spec}'")
    module = importlib.import_module(module_name)
    target = getattr(module, attr)
    if isinstance(target, type) or (callable(target) and not hasattr(target, "score_segment")):
        return target
    return lambda: target


def load_hook(spec: str) -> ModelHook:
    """Resolve ``module:attribute`` and build one hook instance."""
    return resolve_hook_factory(spec)()


def clamp01(value) -> float:
    return min(1.0, max(0.0, float(value)))


class NeuralSession:
    """Adapts a model hook to protocol replies, clamping at the boundary."""

    def __init__(self, hook: ModelHook):
        self.hook = hook

    def on_segment(self, time: float, modality: str = "video", payload=None) -> dict:
        raw = self.hook.score_segment(time, modality, payload)
        action = raw.get("action")
        return {
            "inform_score_seg": clamp01(raw.get("seg", 0.0)),
            "inform_score_visual": clamp01(raw.get("visual", 0.0)),
            "text_turn": bool(raw.get("text_turn", False)),
            "recognized_action": str(action) if action is not None else None,
        }

    def next_token(self, channel: str, time: float, begin: bool) -> dict:
        token, done = self.hook.next_token(channel, float(time), bool(begin))
        return {"token": str(token), "done": bool(done)}
