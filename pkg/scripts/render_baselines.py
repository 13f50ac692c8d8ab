#!/usr/bin/env python3
"""Render the packaged baseline results table with recomputed summaries.

Reads a per-model CSV of per-subtask numbers (the packaged fixture by
default), recomputes the overall and All columns, and prints the table.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import vistream
from vistream.evaluator import aggregate_rows, render_aggregate


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--fixtures",
                        default=str(Path(vistream.__file__).parent / "fixtures" / "baseline_rows.csv"),
                        help="per-subtask CSV (default: packaged baseline rows)")
    parser.add_argument("--format", choices=["markdown", "csv"], default="markdown")
    args = parser.parse_args(argv)

    print(render_aggregate(aggregate_rows(args.fixtures), args.format), end="")
    return 0


if __name__ == "__main__":
    sys.exit(main())
