#!/usr/bin/env python3
"""End-to-end demo: generate traces, simulate sessions, score a report.

Runs the whole closed loop in a working directory and prints the summary
table. The noise knobs make it easy to watch the timing metric fall off:

    python3 scripts/run_pipeline.py --workdir /tmp/demo
    python3 scripts/run_pipeline.py --workdir /tmp/demo --shift 3.0
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from vistream.cli import main as vistream_main


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--workdir", required=True, help="directory for intermediate files")
    parser.add_argument("--total", type=int, default=70, help="question count (multiple of 10)")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--theta", type=float, default=0.35, help="gate threshold")
    parser.add_argument("--shift", type=float, default=0.0, help="backend plan time shift (s)")
    parser.add_argument("--score-jitter", type=float, default=0.0, help="backend score noise")
    args = parser.parse_args(argv)

    workdir = Path(args.workdir)
    workdir.mkdir(parents=True, exist_ok=True)
    traces = str(workdir / "traces.jsonl")
    transcripts = str(workdir / "transcripts.jsonl")
    report = str(workdir / "report.json")

    steps = [
        ["gen-traces", "--total", str(args.total), "--seed", str(args.seed), "--out", traces],
        ["simulate", "--traces", traces, "--seed", str(args.seed),
         "--theta", str(args.theta), "--shift", str(args.shift),
         "--score-jitter", str(args.score_jitter), "--out", transcripts],
        ["eval", "--traces", traces, "--transcripts", transcripts,
         "--judge", "mock", "--out", report],
    ]
    for step in steps:
        code = vistream_main(step)
        if code != 0:
            return code
    return 0


if __name__ == "__main__":
    sys.exit(main())
