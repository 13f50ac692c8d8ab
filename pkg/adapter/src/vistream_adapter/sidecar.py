"""Reader for the traces sidecar the stub replays.

The file format is docs/formats.md in the engine repository: newline
delimited JSON with a ``{"schema": "traces", "version": 1}`` header, one
record per session carrying the backend script under ``plan``. Only the
plan and the record id matter here; events and annotations belong to the
engine side.
"""

from __future__ import annotations

import json
from pathlib import Path


class SidecarError(Exception):
    """The sidecar file does not match the documented format."""


def _parse_plan(obj: dict, line_no: int) -> dict:
    try:
        plan = obj["plan"]
        return {
            "high_start": float(plan["high_start"]),
            "high_end": float(plan["high_end"]),
            "action": plan["action"],
            "response_tokens": [str(t) for t in plan["response_tokens"]],
            "text_turns": {float(t): [str(x) for x in toks]
                           for t, toks in plan.get("text_turns", {}).items()},
            "high_visual": float(plan.get("high_visual", 0.9)),
            "high_seg": float(plan.get("high_seg", 0.8)),
            "low_visual": float(plan.get("low_visual", 0.05)),
            "low_seg": float(plan.get("low_seg", 0.02)),
        }
    except (KeyError, TypeError, ValueError) as exc:
        raise SidecarError(f"line {line_no}: bad plan record: {exc!r}") from exc


def load_plans(path: str | Path) -> dict[str, dict]:
    """Map session id to its backend plan for every record in the file."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines:
        raise SidecarError(f"{path}: empty file, expected a schema header")
    try:
        head = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise SidecarError(f"{path}: unparsable header: {exc}") from exc
    if not isinstance(head, dict) or head.get("schema") != "traces":
        raise SidecarError(f"{path}: expected schema 'traces', got {head!r}")
    if head.get("version") != 1:
        raise SidecarError(f"{path}: unsupported version {head.get('version')!r}")

    plans: dict[str, dict] = {}
    for line_no, raw in enumerate(lines[1:], start=2):
        if not raw.strip():
            continue
        try:
            obj = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise SidecarError(f"{path}: line {line_no}: {exc}") from exc
        if not isinstance(obj, dict) or "id" not in obj:
            raise SidecarError(f"{path}: line {line_no}: record without an id")
        plans[str(obj["id"])] = _parse_plan(obj, line_no)
    return plans
