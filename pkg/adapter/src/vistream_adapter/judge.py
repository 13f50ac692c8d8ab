"""HTTP bridge from the evaluator's judge protocol to an LLM API.

The evaluator's HTTP judge POSTs an assembled prompt as a plain-text
request body and uses the plain-text response body as the judge reply.
This bridge accepts that shape and forwards the prompt, unmodified, as
the single user message of an OpenAI-style chat completions call.

Failure containment: when the upstream call fails (unreachable, bad
status, unexpected reply shape), the bridge answers HTTP 200 with an
empty body. An empty body is an unparsable judge reply, which the
evaluator already handles per question (retry, then score 0) — whereas
a non-200 status would abort the whole evaluation run. Credentials are
resolved once at startup, never per request.
"""

from __future__ import annotations

import json
import threading
import urllib.error
import urllib.request
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

DEFAULT_UPSTREAM_TIMEOUT = 60.0


class UpstreamError(Exception):
    """The chat completions call failed or returned an unusable reply."""


class _Handler(BaseHTTPRequestHandler):
    def do_POST(self) -> None:  # noqa: N802 (http.server naming)
        length = int(self.headers.get("Content-Length") or 0)
        prompt = self.rfile.read(length).decode("utf-8", "replace")
        try:
            reply = self.server.bridge.ask_upstream(prompt)
        except UpstreamError:
            reply = ""
        data = reply.encode("utf-8")
        self.send_response(200)
        self.send_header("Content-Type", "text/plain; charset=utf-8")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def log_message(self, *args) -> None:  # keep test output clean
        pass


class JudgeBridge:
    """Serves judge prompts by delegating to a chat completions API."""

    def __init__(
        self,
        upstream: str,
        model: str,
        api_key: str,
        host: str = "127.0.0.1",
        port: int = 0,
        timeout: float = DEFAULT_UPSTREAM_TIMEOUT,
    ):
        if not api_key:
            raise ValueError("api_key must be non-empty")
        self.upstream = upstream
        self.model = model
        self.api_key = api_key
        self.timeout = timeout
        self._httpd = ThreadingHTTPServer((host, port), _Handler)
        self._httpd.bridge = self
        self._thread: threading.Thread | None = None
        self._stopping = threading.Event()

    @property
    def port(self) -> int:
        return self._httpd.server_address[1]

    def start(self) -> None:
        self._thread = threading.Thread(
            target=lambda: self._httpd.serve_forever(poll_interval=0.05), daemon=True
        )
        self._thread.start()

    def stop(self) -> None:
        self._stopping.set()
        self._httpd.shutdown()
        self._httpd.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5.0)

    def wait(self) -> None:
        """Block until :meth:`stop` is called (foreground serving)."""
        self._stopping.wait()

    def __enter__(self) -> "JudgeBridge":
        self.start()
        return self

    def __exit__(self, *exc_info) -> None:
        self.stop()

    def ask_upstream(self, prompt: str) -> str:
        """One chat completions round trip; the prompt is the user message."""
        body = json.dumps(
            {
                "model": self.model,
                "messages": [{"role": "user", "content": prompt}],
                "temperature": 0,
            }
        ).encode("utf-8")
        request = urllib.request.Request(
            self.upstream,
            data=body,
            headers={
                "Content-Type": "application/json",
                "Authorization": f"Bearer {self.api_key}",
            },
            method="POST",
        )
        try:
            with urllib.request.urlopen(request, timeout=self.timeout) as resp:
                payload = json.load(resp)
            return str(payload["choices"][0]["message"]["content"])
        except (OSError, urllib.error.URLError, ValueError, KeyError, IndexError, TypeError) as exc:
            raise UpstreamError(f"chat completions call failed: {exc}") from exc
