"""Shared fixtures for the adapter tests; factories live in adapter_helpers."""

from __future__ import annotations

import pytest

from vistream_adapter import AdapterConfig, AdapterServer

from adapter_helpers import WireClient, write_sidecar


@pytest.fixture
def sidecar(tmp_path):
    return write_sidecar(
        tmp_path / "traces.jsonl",
        {"q-1": {}, "q-2": {"action": "nodding", "response_tokens": ["A", "nod."]}},
    )


@pytest.fixture
def stub_server(sidecar):
    with AdapterServer(AdapterConfig(mode="stub", traces=str(sidecar))) as server:
        yield server


@pytest.fixture
def connect():
    clients: list[WireClient] = []

    def _connect(port: int) -> WireClient:
        client = WireClient(port)
        clients.append(client)
        return client

    yield _connect
    for client in clients:
        client.close()
