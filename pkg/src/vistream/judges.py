"""Judge endpoints: prompt text in, raw reply text out.

Three implementations share that one-method contract: a deterministic
in-process mock for tests and offline runs, a subprocess bridge (prompt
on stdin, reply on stdout), and an HTTP bridge (POST the prompt, read
the body). The environment variable VISPEAK_JUDGE_ENDPOINT, when set,
overrides whatever judge spec was configured.
"""

from __future__ import annotations

import os
import re
import shlex
import subprocess

import requests

from .errors import ConnectionFailed, RejectedInput

JUDGE_ENV_VAR = "VISPEAK_JUDGE_ENDPOINT"
DEFAULT_JUDGE_TIMEOUT = 30.0

# labeled blocks the prompt assembler appends after each template
GPT_TEXT_LABEL = "[GPT Text]"
GROUND_TRUTH_LABEL = "[Ground Truth]"
REFERENCE_LABEL = "[Contextual Reference Text]"


class Judge:
    """Anything that can answer a scoring prompt with raw reply text."""

    def reply_to(self, prompt: str) -> str:
        raise NotImplementedError


class MockJudge(Judge):
    """Keyword-overlap judge with deterministic verdicts.

    Pulls the reference and candidate blocks out of the assembled
    prompt, measures word overlap (candidate covering the reference's
    vocabulary), and maps it to the 0-5 scale - split 0-3/0-2 when the
    template asks for two components. Replies with the same JSON shapes
    a real judge is instructed to produce, so the parser downstream is
    exercised identically on both paths.
    """

    def reply_to(self, prompt: str) -> str:
        reference = _block(prompt, REFERENCE_LABEL) or _block(prompt, GROUND_TRUTH_LABEL) or ""
        candidate = _block(prompt, GPT_TEXT_LABEL) or ""
        fraction = _overlap(candidate, reference)
        reason = f"keyword overlap {fraction:.3f}"
        if '"description"' in prompt.split(GPT_TEXT_LABEL)[0]:
            description = round(3 * fraction)
            advice = round(2 * fraction)
            return (
                f'{{"description": {description}, "advice": {advice}, "reason": "{reason}"}}'
            )
        return f'{{"score": {round(5 * fraction)}, "reason": "{reason}"}}'


def _block(prompt: str, label: str) -> str | None:
    """Text under ``label`` up to the next bracketed label or the end.

    Searches from the last occurrence: templates may mention a label in
    prose, but the filled blocks are always appended after the template.
    """
    start = prompt.rfind(label)
    if start < 0:
        return None
    body = prompt[start + len(label):]
    nxt = re.search(r"^\[[A-Z][^\]]*\]$", body, flags=re.MULTILINE)
    if nxt:
        body = body[: nxt.start()]
    return body.strip()


def _words(text: str) -> set[str]:
    return set(re.findall(r"[a-z0-9']+", text.lower()))


def _overlap(candidate: str, reference: str) -> float:
    ref = _words(reference)
    if not ref:
        return 0.0
    return len(_words(candidate) & ref) / len(ref)


class CommandJudge(Judge):
    """Runs a command per verdict; prompt on stdin, reply on stdout."""

    def __init__(self, command: str, timeout: float = DEFAULT_JUDGE_TIMEOUT):
        if not command.strip():
            raise RejectedInput("judge command must not be empty")
        self.argv = shlex.split(command)
        self.timeout = timeout

    def reply_to(self, prompt: str) -> str:
        try:
            proc = subprocess.run(
                self.argv,
                input=prompt.encode("utf-8"),
                capture_output=True,
                timeout=self.timeout,
            )
        except (OSError, subprocess.TimeoutExpired) as exc:
            raise ConnectionFailed(f"judge command failed: {exc}") from exc
        if proc.returncode != 0:
            raise ConnectionFailed(
                f"judge command exited {proc.returncode}: {proc.stderr.decode('utf-8', 'replace')[:200]}"
            )
        return proc.stdout.decode("utf-8", "replace")


class HttpJudge(Judge):
    """POSTs the prompt as the request body and returns the response body."""

    def __init__(self, url: str, timeout: float = DEFAULT_JUDGE_TIMEOUT):
        self.url = url
        self.timeout = timeout

    def reply_to(self, prompt: str) -> str:
        try:
            resp = requests.post(
                self.url,
                data=prompt.encode("utf-8"),
                headers={"Content-Type": "text/plain; charset=utf-8"},
                timeout=self.timeout,
            )
        except requests.RequestException as exc:
            raise ConnectionFailed(f"judge endpoint unreachable: {exc}") from exc
        if resp.status_code != 200:
            raise ConnectionFailed(f"judge endpoint returned HTTP {resp.status_code}")
        return resp.text


def make_judge(spec: str, timeout: float = DEFAULT_JUDGE_TIMEOUT) -> Judge:
    """Build a judge from a spec string, honoring the env override.

    Specs: ``mock``, ``cmd:<command line>``, or an ``http(s)://`` URL.
    """
    override = os.environ.get(JUDGE_ENV_VAR)
    if override:
        spec = override
    if spec == "mock":
        return MockJudge()
    if spec.startswith("cmd:"):
        return CommandJudge(spec[len("cmd:"):], timeout=timeout)
    if spec.startswith("http://") or spec.startswith("https://"):
        return HttpJudge(spec, timeout=timeout)
    raise RejectedInput(f"unknown judge spec '{spec}' (use mock, cmd:..., or an http URL)")
