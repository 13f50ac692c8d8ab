"""Deterministic rule-based session: replays a sidecar plan exactly.

The behavioral contract is the plan semantics in docs/formats.md:
above-threshold scores and the recognized action exactly at segment
times inside [high_start, high_end], a text-turn flag plus a queued
reply at scripted times, and verbatim token streaming one token per
generate step. No wall clock, no randomness: identical inputs must
yield identical frames.
"""

from __future__ import annotations


class StubSession:
    def __init__(self, plan: dict):
        self.plan = plan
        self._pending_text: list[list[str]] = []
        self._stream: list[str] = []
        self._cursor = 0

    def on_segment(self, time: float, modality: str = "video", payload=None) -> dict:
        plan = self.plan
        in_window = plan["high_start"] <= time <= plan["high_end"]
        reply_tokens = plan["text_turns"].get(time)
        if reply_tokens is not None:
            self._pending_text.append(list(reply_tokens))
        return {
            "inform_score_seg": plan["high_seg"] if in_window else plan["low_seg"],
            "inform_score_visual": plan["high_visual"] if in_window else plan["low_visual"],
            "text_turn": reply_tokens is not None,
            "recognized_action": plan["action"] if in_window else None,
        }

    def next_token(self, channel: str, time: float, begin: bool) -> dict:
        if begin:
            if channel == "text" and self._pending_text:
                self._stream = self._pending_text.pop(0)
            else:
                self._stream = list(self.plan["response_tokens"])
            self._cursor = 0
        if self._cursor >= len(self._stream):
            return {"token": "", "done": True}
        token = self._stream[self._cursor]
        self._cursor += 1
        return {"token": token, "done": self._cursor >= len(self._stream)}
