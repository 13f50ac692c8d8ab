"""Adapter configuration."""

from __future__ import annotations

from dataclasses import dataclass


class ConfigError(Exception):
    """The adapter was configured inconsistently."""


@dataclass
class AdapterConfig:
    """Server settings; mode-specific fields are required only by their mode.

    Stub mode replays the traces sidecar at ``traces``. Neural mode loads
    the model hook named by ``model`` (a ``module:attribute`` spec).
    """

    mode: str = "stub"
    host: str = "127.0.0.1"
    port: int = 0
    traces: str | None = None
    model: str | None = None

    def __post_init__(self) -> None:
        if self.mode not in ("stub", "neural"):
            raise ConfigError(f"mode must be 'stub' or 'neural', got '{self.mode}'")
        if self.mode == "stub" and not self.traces:
            raise ConfigError("stub mode needs --traces (the sidecar to replay)")
        if self.mode == "neural" and not self.model:
            raise ConfigError("neural mode needs --model (a module:attribute hook spec)")
        if self.port < 0 or self.port > 65535:
            raise ConfigError(f"port must be in [0, 65535], got {self.port}")
