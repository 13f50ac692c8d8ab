"""Frame codec for the wire protocol, server side.

protocol.md at the repository root is normative: one JSON object per
line, an integer ``seq`` plus a ``kind`` string, and per-kind required
fields. This module validates the request kinds a server receives and
encodes the reply kinds it sends.
"""

from __future__ import annotations

import json


class WireError(Exception):
    """A received line violates the wire protocol."""


REQUEST_FIELDS = {
    "init": ("session", "dim"),
    "segment": ("time", "modality", "payload"),
    "generate": ("channel", "time", "begin"),
    "close": (),
}

MODALITIES = ("video", "audio", "text")
CHANNELS = ("text", "audio", "visual")


def decode_line(line: bytes) -> dict:
    """Parse one request line into a dict with ``seq`` and ``kind``."""
    try:
        obj = json.loads(line.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise WireError(f"malformed frame: {exc}") from exc
    if not isinstance(obj, dict):
        raise WireError("frame must be a JSON object")
    seq = obj.get("seq")
    if not isinstance(seq, int) or isinstance(seq, bool) or seq < 0:
        raise WireError("frame missing non-negative integer 'seq'")
    kind = obj.get("kind")
    if kind not in REQUEST_FIELDS:
        raise WireError(f"unknown frame kind {kind!r}")
    for name in REQUEST_FIELDS[kind]:
        if name not in obj:
            raise WireError(f"frame kind '{kind}' missing field '{name}'")
    if kind == "segment" and obj["modality"] not in MODALITIES:
        raise WireError(f"unknown modality {obj['modality']!r}")
    if kind == "generate" and obj["channel"] not in CHANNELS:
        raise WireError(f"unknown channel {obj['channel']!r}")
    return obj


def encode_frame(seq: int, kind: str, **fields) -> bytes:
    """Serialize one reply frame as a single NDJSON line."""
    body = {"seq": seq, "kind": kind}
    body.update(fields)
    return (json.dumps(body, separators=(",", ":"), ensure_ascii=False) + "\n").encode("utf-8")
