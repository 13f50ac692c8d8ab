"""Command line entry point for the adapter.

Subcommands: serve (answer engine sessions over the wire protocol,
replaying a traces sidecar or delegating to a neural hook) and
judge-bridge (forward judge prompts to a chat completions API). Both
print ``listening on host:port`` once ready — with port 0 that line is
how callers learn the ephemeral port — then serve until interrupted.
Usage errors exit with 2, runtime failures with 1 and one diagnostic
line on stderr.
"""

from __future__ import annotations

import argparse
import os
import sys

from .config import AdapterConfig, ConfigError
from .judge import JudgeBridge
from .server import AdapterServer
from .sidecar import SidecarError


def _split_listen(spec: str) -> tuple[str, int]:
    host, sep, port = spec.rpartition(":")
    if not sep or not host:
        raise ConfigError(f"--listen must look like host:port, got '{spec}'")
    try:
        return host, int(port)
    except ValueError:
        raise ConfigError(f"--listen must look like host:port, got '{spec}'") from None


def _cmd_serve(args: argparse.Namespace) -> int:
    host, port = _split_listen(args.listen)
    config = AdapterConfig(
        mode=args.mode, host=host, port=port, traces=args.traces, model=args.model
    )
    server = AdapterServer(config)
    server.start()
    try:
        print(f"listening on {host}:{server.port}", flush=True)
        server.wait()
    except KeyboardInterrupt:
        pass
    finally:
        server.stop()
    return 0


def _cmd_judge_bridge(args: argparse.Namespace) -> int:
    api_key = os.environ.get(args.api_key_env)
    if not api_key:
        raise ConfigError(
            f"environment variable {args.api_key_env} is not set (upstream credential)"
        )
    host, port = _split_listen(args.listen)
    bridge = JudgeBridge(
        upstream=args.upstream, model=args.model, api_key=api_key, host=host, port=port
    )
    bridge.start()
    try:
        print(f"listening on {host}:{bridge.port}", flush=True)
        bridge.wait()
    except KeyboardInterrupt:
        pass
    finally:
        bridge.stop()
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vistream-adapter",
        description="Model-side adapter: wire protocol server and judge bridge",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("serve", help="answer engine sessions over the wire protocol")
    p.add_argument("--listen", default="127.0.0.1:0", metavar="HOST:PORT",
                   help="bind address; port 0 picks an ephemeral port")
    p.add_argument("--mode", choices=("stub", "neural"), default="stub",
                   help="stub replays a traces sidecar; neural wraps a model hook")
    p.add_argument("--traces", help="traces JSONL sidecar to replay (stub mode)")
    p.add_argument("--model", help="module:attribute spec of a model hook (neural mode)")
    p.set_defaults(func=_cmd_serve)

    p = sub.add_parser("judge-bridge", help="forward judge prompts to a chat completions API")
    p.add_argument("--listen", default="127.0.0.1:0", metavar="HOST:PORT",
                   help="bind address; port 0 picks an ephemeral port")
    p.add_argument("--upstream", required=True, help="chat completions endpoint URL")
    p.add_argument("--model", required=True, help="upstream model name")
    p.add_argument("--api-key-env", default="JUDGE_API_KEY",
                   help="environment variable holding the bearer token")
    p.set_defaults(func=_cmd_judge_bridge)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, SidecarError, ImportError, AttributeError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
