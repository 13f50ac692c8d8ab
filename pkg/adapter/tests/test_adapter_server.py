"""Socket server behavior: sessions, violations, determinism, neural mode."""

import threading

import pytest

from vistream_adapter import (
    AdapterConfig,
    AdapterServer,
    ConfigError,
    NeuralSession,
    load_hook,
    resolve_hook_factory,
)

from adapter_helpers import write_sidecar


class TestConfig:
    def test_stub_needs_a_traces_path(self):
        with pytest.raises(ConfigError, match="traces"):
            AdapterConfig(mode="stub")

    def test_neural_needs_a_model_spec(self):
        with pytest.raises(ConfigError, match="model"):
            AdapterConfig(mode="neural")

    def test_unknown_mode_is_rejected(self):
        with pytest.raises(ConfigError, match="mode"):
            AdapterConfig(mode="hybrid", traces="x")

    def test_out_of_range_port_is_rejected(self):
        with pytest.raises(ConfigError, match="port"):
            AdapterConfig(mode="stub", traces="x", port=70000)

    def test_port_property_requires_start(self, sidecar):
        server = AdapterServer(AdapterConfig(mode="stub", traces=str(sidecar)))
        with pytest.raises(RuntimeError, match="not started"):
            server.port


class TestSession:
    def test_full_session_round_trip(self, stub_server, connect):
        client = connect(stub_server.port)
        assert client.ask(0, "init", session="q-1", dim=4) == {"seq": 0, "kind": "init_ok"}

        reply = client.ask(1, "segment", time=1.0, modality="video", payload=[0.0] * 4)
        assert reply == {
            "seq": 1,
            "kind": "segment_reply",
            "inform_score_seg": 0.02,
            "inform_score_visual": 0.05,
            "text_turn": False,
            "recognized_action": None,
        }

        reply = client.ask(2, "segment", time=6.0, modality="video", payload=[0.0] * 4)
        assert reply["inform_score_visual"] == 0.9
        assert reply["recognized_action"] == "waving hand"

        assert client.ask(3, "generate", channel="visual", time=6.0, begin=True) == {
            "seq": 3, "kind": "token", "token": "Nice", "done": False,
        }
        assert client.ask(4, "generate", channel="visual", time=7.0, begin=False) == {
            "seq": 4, "kind": "token", "token": "wave!", "done": True,
        }

        assert client.ask(5, "close") == {"seq": 5, "kind": "bye"}
        assert client.at_eof()

    def test_text_turn_reply_takes_priority_on_text_begin(self, stub_server, connect):
        client = connect(stub_server.port)
        client.ask(0, "init", session="q-1", dim=4)
        reply = client.ask(1, "segment", time=12.0, modality="text", payload=["Hi!"])
        assert reply["text_turn"] is True
        assert client.ask(2, "generate", channel="text", time=13.0, begin=True)["token"] == "Hello"

    def test_extra_init_fields_are_ignored(self, stub_server, connect):
        client = connect(stub_server.port)
        reply = client.ask(0, "init", session="q-2", dim=16, threshold=0.35,
                           score_position="last_visual_token", flavor="mint")
        assert reply["kind"] == "init_ok"

    def test_sessions_are_isolated_per_connection(self, stub_server, connect):
        first = connect(stub_server.port)
        first.ask(0, "init", session="q-1", dim=4)
        first.ask(1, "segment", time=12.0, modality="text", payload=["Hi!"])

        second = connect(stub_server.port)
        second.ask(0, "init", session="q-1", dim=4)
        # the first connection's queued text reply must not leak here
        token = second.ask(1, "generate", channel="text", time=13.0, begin=True)
        assert token["token"] == "Nice"


class TestViolations:
    def test_unknown_session_gets_error_then_close(self, stub_server, connect):
        client = connect(stub_server.port)
        reply = client.ask(0, "init", session="nope", dim=4)
        assert reply["kind"] == "error"
        assert "unknown session 'nope'" in reply["message"]
        assert client.at_eof()

    def test_wrong_seq_gets_error_then_close(self, stub_server, connect):
        client = connect(stub_server.port)
        client.ask(0, "init", session="q-1", dim=4)
        reply = client.ask(5, "close")
        assert reply["kind"] == "error"
        assert "expected seq 1, got 5" in reply["message"]
        assert client.at_eof()

    def test_malformed_line_gets_error_then_close(self, stub_server, connect):
        client = connect(stub_server.port)
        client.send_raw(b"{this is not json\n")
        reply = client.recv()
        assert reply["kind"] == "error"
        assert "malformed frame" in reply["message"]
        assert client.at_eof()

    def test_request_before_init_gets_error_then_close(self, stub_server, connect):
        client = connect(stub_server.port)
        reply = client.ask(0, "segment", time=1.0, modality="video", payload=[])
        assert reply["kind"] == "error"
        assert "before init" in reply["message"]
        assert client.at_eof()

    def test_second_init_gets_error_then_close(self, stub_server, connect):
        client = connect(stub_server.port)
        client.ask(0, "init", session="q-1", dim=4)
        reply = client.ask(1, "init", session="q-2", dim=4)
        assert reply["kind"] == "error"
        assert "init received twice" in reply["message"]
        assert client.at_eof()

    def test_unknown_kind_gets_error_then_close(self, stub_server, connect):
        client = connect(stub_server.port)
        reply = client.ask(0, "reboot")
        assert reply["kind"] == "error"
        assert "unknown frame kind" in reply["message"]
        assert client.at_eof()

    def test_client_hangup_without_close_is_tolerated(self, stub_server, connect):
        client = connect(stub_server.port)
        client.ask(0, "init", session="q-1", dim=4)
        client.close()
        # the server must keep serving new connections afterwards
        again = connect(stub_server.port)
        assert again.ask(0, "init", session="q-1", dim=4)["kind"] == "init_ok"


class TestDeterminism:
    SCRIPT = [
        dict(kind="init", session="q-1", dim=4),
        dict(kind="segment", time=1.0, modality="video", payload=[0.5, 0.5, 0.5, 0.5]),
        dict(kind="segment", time=5.0, modality="video", payload=[0.1, 0.2, 0.3, 0.4]),
        dict(kind="generate", channel="visual", time=5.0, begin=True),
        dict(kind="generate", channel="visual", time=6.0, begin=False),
        dict(kind="close"),
    ]

    def run_script(self, port, connect) -> bytes:
        client = connect(port)
        raw = b""
        for seq, request in enumerate(self.SCRIPT):
            fields = dict(request)
            kind = fields.pop("kind")
            client.send(seq, kind, **fields)
            raw += client.recv_raw()
        return raw

    def test_identical_sessions_produce_identical_reply_bytes(self, stub_server, connect):
        first = self.run_script(stub_server.port, connect)
        second = self.run_script(stub_server.port, connect)
        assert first == second
        assert first.count(b"\n") == len(self.SCRIPT)


class TestConcurrency:
    def test_interleaved_connections_both_complete(self, stub_server, connect):
        ports = stub_server.port
        a = connect(ports)
        b = connect(ports)
        assert a.ask(0, "init", session="q-1", dim=4)["kind"] == "init_ok"
        assert b.ask(0, "init", session="q-2", dim=4)["kind"] == "init_ok"
        ra = a.ask(1, "segment", time=6.0, modality="video", payload=[0.0] * 4)
        rb = b.ask(1, "segment", time=6.0, modality="video", payload=[0.0] * 4)
        assert ra["recognized_action"] == "waving hand"
        assert rb["recognized_action"] == "nodding"
        assert a.ask(2, "close")["kind"] == "bye"
        assert b.ask(2, "close")["kind"] == "bye"

    def test_many_threads_hammering_distinct_sessions(self, tmp_path, connect):
        sessions = {f"q-{i}": {"action": f"act-{i}"} for i in range(8)}
        sidecar = write_sidecar(tmp_path / "many.jsonl", sessions)
        results: dict[str, str] = {}
        lock = threading.Lock()

        with AdapterServer(AdapterConfig(mode="stub", traces=str(sidecar))) as server:
            def worker(qid: str) -> None:
                client = connect(server.port)
                client.ask(0, "init", session=qid, dim=2)
                reply = client.ask(1, "segment", time=7.0, modality="video", payload=[0.0, 0.0])
                client.ask(2, "close")
                with lock:
                    results[qid] = reply["recognized_action"]

            threads = [threading.Thread(target=worker, args=(qid,)) for qid in sessions]
            for t in threads:
                t.start()
            for t in threads:
                t.join(timeout=10.0)

        assert results == {f"q-{i}": f"act-{i}" for i in range(8)}


class WildHook:
    """Returns out-of-range scores; the session must clamp them."""

    def score_segment(self, time, modality, payload):
        return {"seg": 7.3, "visual": -2.0, "action": "spin", "text_turn": 1}

    def next_token(self, channel, time, begin):
        return ("ok", True)


class FailingHook:
    def score_segment(self, time, modality, payload):
        raise RuntimeError("weights fell over")

    def next_token(self, channel, time, begin):
        raise RuntimeError("weights fell over")


def make_wild_hook():
    return WildHook()


PREBUILT_HOOK = WildHook()


class TestNeural:
    def test_session_clamps_scores_to_the_unit_interval(self):
        session = NeuralSession(WildHook())
        reply = session.on_segment(3.0, "video", [0.0])
        assert reply["inform_score_seg"] == 1.0
        assert reply["inform_score_visual"] == 0.0
        assert reply["text_turn"] is True
        assert reply["recognized_action"] == "spin"

    def test_load_hook_instantiates_a_class_spec(self):
        hook = load_hook("test_adapter_server:WildHook")
        assert isinstance(hook, WildHook)

    def test_load_hook_calls_a_factory_spec(self):
        hook = load_hook("test_adapter_server:make_wild_hook")
        assert isinstance(hook, WildHook)

    def test_load_hook_passes_an_instance_through(self):
        assert load_hook("test_adapter_server:PREBUILT_HOOK") is PREBUILT_HOOK

    def test_class_specs_make_a_fresh_hook_per_call(self):
        factory = resolve_hook_factory("test_adapter_server:WildHook")
        assert factory() is not factory()

    def test_instance_specs_share_the_hook(self):
        factory = resolve_hook_factory("test_adapter_server:PREBUILT_HOOK")
        assert factory() is factory() is PREBUILT_HOOK

    def test_bad_spec_shape_is_rejected(self):
        with pytest.raises(ValueError, match="module:attribute"):
            load_hook("no-colon-here")

    def test_neural_server_clamps_on_the_wire(self, connect):
        config = AdapterConfig(mode="neural", model="test_adapter_server:WildHook")
        with AdapterServer(config) as server:
            client = connect(server.port)
            client.ask(0, "init", session="anything", dim=2)
            reply = client.ask(1, "segment", time=1.0, modality="video", payload=[0.0, 0.0])
            assert reply["inform_score_seg"] == 1.0
            assert reply["inform_score_visual"] == 0.0
            assert reply["text_turn"] is True
            token = client.ask(2, "generate", channel="visual", time=1.0, begin=True)
            assert token == {"seq": 2, "kind": "token", "token": "ok", "done": True}
            assert client.ask(3, "close")["kind"] == "bye"

    def test_neural_mode_accepts_any_session_id(self, connect):
        config = AdapterConfig(mode="neural", model="test_adapter_server:WildHook")
        with AdapterServer(config) as server:
            client = connect(server.port)
            assert client.ask(0, "init", session="q-unseen-9999", dim=2)["kind"] == "init_ok"

    def test_hook_failure_becomes_an_error_frame(self, connect):
        config = AdapterConfig(mode="neural", model="test_adapter_server:FailingHook")
        with AdapterServer(config) as server:
            client = connect(server.port)
            client.ask(0, "init", session="x", dim=2)
            reply = client.ask(1, "segment", time=1.0, modality="video", payload=[0.0, 0.0])
            assert reply["kind"] == "error"
            assert "internal failure" in reply["message"]
            assert "weights fell over" in reply["message"]
            assert client.at_eof()
