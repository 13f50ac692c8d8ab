"""Reference backend for the vistream wire protocol.

Implements the server side of protocol.md (repository root) against the
traces sidecar documented in docs/formats.md, without depending on the
engine package: a deterministic rule-based stub for conformance testing,
an optional neural mode that wraps externally supplied per-second
encoders and a language model behind a hook interface, and an HTTP
bridge that forwards judge prompts to an LLM API.
"""

from .config import AdapterConfig, ConfigError
from .judge import JudgeBridge, UpstreamError
from .server import AdapterServer
from .sidecar import SidecarError, load_plans
from .stub import StubSession
from .neural import NeuralSession, clamp01, load_hook, resolve_hook_factory
from .wire import WireError, decode_line, encode_frame

__version__ = "0.1.0"

__all__ = [
    "AdapterConfig",
    "AdapterServer",
    "ConfigError",
    "JudgeBridge",
    "NeuralSession",
    "SidecarError",
    "StubSession",
    "UpstreamError",
    "WireError",
    "clamp01",
    "decode_line",
    "encode_frame",
    "load_hook",
    "load_plans",
    "resolve_hook_factory",
    "__version__",
]
