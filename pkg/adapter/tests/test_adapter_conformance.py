"""Acceptance: transcripts through this server match the engine's own backend.

The engine CLI generates a deterministic trace suite covering every
subtask, runs it once against its in-process scripted backend, and once
against this adapter over a real TCP socket. The transcript files must
be byte-identical: equal scores, equal tokens, equal timing, equal
serialization. The engine is driven purely through its console script —
nothing here imports the engine package.
"""

import shutil
import subprocess

import pytest

from vistream_adapter import AdapterConfig, AdapterServer

from adapter_helpers import spawned_server

VISTREAM = shutil.which("vistream")
ADAPTER = shutil.which("vistream-adapter")

pytestmark = pytest.mark.skipif(
    VISTREAM is None, reason="engine console script not installed"
)


def engine(*args) -> None:
    proc = subprocess.run([VISTREAM, *args], capture_output=True, text=True)
    assert proc.returncode == 0, f"vistream {args[0]} failed: {proc.stderr}"


@pytest.fixture(scope="module")
def suite(tmp_path_factory):
    """One deterministic trace suite plus its local (in-process) transcripts."""
    root = tmp_path_factory.mktemp("conformance")
    traces = root / "traces.jsonl"
    local = root / "local.jsonl"
    engine("gen-traces", "--total", "70", "--seed", "4242", "--out", str(traces))
    engine("simulate", "--traces", str(traces), "--out", str(local))
    return {"root": root, "traces": traces, "local_bytes": local.read_bytes()}


def simulate_remote(suite, port: int, out_name: str, *extra) -> bytes:
    out = suite["root"] / out_name
    engine(
        "simulate", "--traces", str(suite["traces"]),
        "--backend", f"remote:127.0.0.1:{port}", "--out", str(out), *extra,
    )
    return out.read_bytes()


def test_criterion_stub_transcripts_are_byte_identical_over_a_real_socket(suite):
    config = AdapterConfig(mode="stub", traces=str(suite["traces"]))
    with AdapterServer(config) as server:
        remote = simulate_remote(suite, server.port, "remote.jsonl")
    assert remote == suite["local_bytes"]


def test_concurrent_engine_workers_see_the_same_bytes(suite):
    config = AdapterConfig(mode="stub", traces=str(suite["traces"]))
    with AdapterServer(config) as server:
        remote = simulate_remote(suite, server.port, "remote_jobs.jsonl", "--jobs", "4")
    assert remote == suite["local_bytes"]


def test_the_served_cli_process_conforms_too(suite):
    argv = [ADAPTER, "serve", "--listen", "127.0.0.1:0", "--traces", str(suite["traces"])]
    with spawned_server(argv) as (_host, port, _proc):
        remote = simulate_remote(suite, port, "remote_cli.jsonl")
    assert remote == suite["local_bytes"]
