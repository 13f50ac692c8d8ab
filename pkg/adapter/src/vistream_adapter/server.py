"""TCP server speaking the backend wire protocol.

One session per connection, strictly lockstep, shared sequence counter
starting at 0 — see protocol.md at the engine repository root. Any
violation (malformed line, wrong seq, request before init, unknown
session, internal failure) is answered with an ``error`` frame and the
connection is closed, as that document requires of servers.
"""

from __future__ import annotations

import socket
import threading

from .config import AdapterConfig
from .neural import NeuralSession, resolve_hook_factory
from .sidecar import load_plans
from .stub import StubSession
from .wire import WireError, decode_line, encode_frame


class AdapterServer:
    """Serves stub or neural sessions; accepts many connections.

    ``start`` binds and spawns the accept loop (port 0 picks an
    ephemeral port, readable from :attr:`port` afterwards); ``stop``
    closes the listener and any live connections. Also usable as a
    context manager.
    """

    def __init__(self, config: AdapterConfig):
        self.config = config
        if config.mode == "stub":
            self._plans = load_plans(config.traces)
            self._hook_factory = None
        else:
            self._plans = None
            self._hook_factory = resolve_hook_factory(config.model)
        self._listener: socket.socket | None = None
        self._accept_thread: threading.Thread | None = None
        self._conn_threads: list[threading.Thread] = []
        self._live_conns: set[socket.socket] = set()
        self._lock = threading.Lock()
        self._stopping = threading.Event()

    # -- lifecycle ----------------------------------------------------------

    @property
    def port(self) -> int:
        if self._listener is None:
            raise RuntimeError("server not started")
        return self._listener.getsockname()[1]

    def start(self) -> None:
        listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        listener.bind((self.config.host, self.config.port))
        listener.listen()
        self._listener = listener
        self._accept_thread = threading.Thread(target=self._accept_loop, daemon=True)
        self._accept_thread.start()

    def stop(self) -> None:
        self._stopping.set()
        if self._listener is not None:
            # closing alone does not wake a blocked accept() on Linux;
            # shut the listener down and nudge it with a throwaway connect
            try:
                port = self._listener.getsockname()[1]
            except OSError:
                port = None
            try:
                self._listener.shutdown(socket.SHUT_RDWR)
            except OSError:
                pass
            if port is not None:
                try:
                    socket.create_connection(("127.0.0.1", port), timeout=0.2).close()
                except OSError:
                    pass
            try:
                self._listener.close()
            except OSError:
                pass
        with self._lock:
            conns = list(self._live_conns)
        for conn in conns:
            try:
                conn.shutdown(socket.SHUT_RDWR)
            except OSError:
                pass
        if self._accept_thread is not None:
            self._accept_thread.join(timeout=5.0)
        for thread in self._conn_threads:
            thread.join(timeout=5.0)

    def wait(self) -> None:
        """Block until :meth:`stop` is called (foreground serving)."""
        self._stopping.wait()

    def __enter__(self) -> "AdapterServer":
        self.start()
        return self

    def __exit__(self, *exc_info) -> None:
        self.stop()

    # -- serving ------------------------------------------------------------

    def _accept_loop(self) -> None:
        while not self._stopping.is_set():
            try:
                conn, _ = self._listener.accept()
            except OSError:
                return  # listener closed by stop()
            if self._stopping.is_set():
                try:
                    conn.close()
                except OSError:
                    pass
                return
            with self._lock:
                self._live_conns.add(conn)
            thread = threading.Thread(target=self._serve_connection, args=(conn,), daemon=True)
            self._conn_threads.append(thread)
            thread.start()

    def _open_session(self, session_id: str):
        if self.config.mode == "stub":
            plan = self._plans.get(str(session_id))
            if plan is None:
                raise KeyError(session_id)
            return StubSession(plan)
        return NeuralSession(self._hook_factory())

    def _serve_connection(self, conn: socket.socket) -> None:
        try:
            self._pump(conn)
        except OSError:
            pass  # peer reset; nothing left to answer
        finally:
            with self._lock:
                self._live_conns.discard(conn)
            try:
                conn.close()
            except OSError:
                pass

    def _pump(self, conn: socket.socket) -> None:
        file = conn.makefile("rb")
        expected_seq = 0
        session = None
        while True:
            line = file.readline()
            if not line:
                return  # client closed without a close frame; drop quietly
            try:
                frame = decode_line(line)
            except WireError as exc:
                conn.sendall(encode_frame(expected_seq, "error", message=str(exc)))
                return
            seq, kind = frame["seq"], frame["kind"]
            if seq != expected_seq:
                conn.sendall(
                    encode_frame(seq, "error", message=f"expected seq {expected_seq}, got {seq}")
                )
                return
            expected_seq += 1

            if kind == "init":
                if session is not None:
                    conn.sendall(encode_frame(seq, "error", message="init received twice"))
                    return
                try:
                    session = self._open_session(frame["session"])
                except KeyError:
                    conn.sendall(
                        encode_frame(seq, "error", message=f"unknown session '{frame['session']}'")
                    )
                    return
                conn.sendall(encode_frame(seq, "init_ok"))
                continue
            if session is None:
                conn.sendall(encode_frame(seq, "error", message=f"'{kind}' before init"))
                return
            if kind == "close":
                conn.sendall(encode_frame(seq, "bye"))
                return
            try:
                if kind == "segment":
                    fields = session.on_segment(
                        float(frame["time"]), frame["modality"], frame["payload"]
                    )
                    conn.sendall(encode_frame(seq, "segment_reply", **fields))
                else:  # generate
                    fields = session.next_token(
                        frame["channel"], float(frame["time"]), bool(frame["begin"])
                    )
                    conn.sendall(encode_frame(seq, "token", **fields))
            except OSError:
                raise
            except Exception as exc:  # a misbehaving hook must not kill the thread
                conn.sendall(encode_frame(seq, "error", message=f"internal failure: {exc}"))
                return
