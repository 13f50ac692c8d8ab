#!/usr/bin/env python3
"""Demo of the interruption probe on generated stop-signal traces.

Generates interruption questions, force-feeds each long reply to a
scripted backend, and reports where the reply was cut relative to the
annotated stop window.
"""

from __future__ import annotations

import argparse
import sys

from vistream.data import Subtask, gen_traces
from vistream.evaluator import interruption_probe
from vistream.protocol import NoiseConfig, ScriptedBackend


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--count", type=int, default=20, help="number of probes")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--shift", type=float, default=0.0, help="shift the stop later (s)")
    parser.add_argument("--margin", type=float, default=2.0, help="timing margin (s)")
    args = parser.parse_args(argv)

    bundles = gen_traces(args.seed, {Subtask.VISUAL_INTERRUPTION: args.count})
    hits = 0
    print(f"{'question':<12} {'window':<12} {'cut at':>8}  timely")
    for bundle in bundles:
        ann = bundle.annotation
        backend = ScriptedBackend(bundle.plan, NoiseConfig(shift_seconds=args.shift))
        cut = interruption_probe(backend, bundle.events, ann.long_reply)
        timely = cut is not None and ann.t1 <= cut <= ann.t2 + args.margin
        hits += timely
        shown = "-" if cut is None else f"{cut:.1f}"
        window = f"[{ann.t1:.1f}, {ann.t2:.1f}]"
        print(f"{ann.id:<12} {window:<12} {shown:>8}  {'yes' if timely else 'no'}")
    print(f"\ntimely: {hits}/{len(bundles)}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
