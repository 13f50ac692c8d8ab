"""Shared exception taxonomy.

Input validation problems raise RejectedInput. Wire-format violations
raise ProtocolError (with a byte offset when one is known). Failures to
reach a peer at all raise ConnectionFailed, which is deliberately a
different type from ProtocolError so callers can tell "the endpoint is
down" apart from "the endpoint is speaking garbage". Misuse of an API
against its stated contract raises ContractViolation.
"""

from __future__ import annotations


class VistreamError(Exception):
    """Base class for every error this package raises on purpose."""


class RejectedInput(VistreamError):
    """An input value fails validation (range, shape, ordering)."""


class SchemaError(VistreamError):
    """A data file does not match its schema.

    ``problems`` lists every offending line as ``(line_no, field, message)``
    so a bad file is reported in one shot rather than line by line.
    """

    def __init__(self, path: str, problems: list[tuple[int, str, str]]):
        self.path = path
        self.problems = problems
        lines = "; ".join(f"line {n}: field '{f}': {m}" for n, f, m in problems)
        super().__init__(f"{path}: {len(problems)} invalid line(s): {lines}")


class ProtocolError(VistreamError):
    """A peer violated the wire protocol (bad frame, bad seq, bad range)."""

    def __init__(self, message: str, byte_offset: int | None = None):
        self.byte_offset = byte_offset
        if byte_offset is not None:
            message = f"{message} (at byte offset {byte_offset})"
        super().__init__(message)


class ConnectionFailed(VistreamError):
    """A peer could not be reached or went away mid-session."""


class ContractViolation(VistreamError):
    """An operation was invoked in a state its contract forbids."""
