#!/usr/bin/env python3
"""Obfuscate the fixture corpus under every matrix option and tabulate the overhead.

Prints one row per option with validity, differential agreement and the
median / max size and step ratios; ``--json`` also dumps the per-pair data.
"""

from __future__ import annotations

import argparse
import json
import statistics
import sys
import time

from wasmobf.analysis import validate_module
from wasmobf.binfmt import decode_module, encode_module
from wasmobf.config import MATRIX, PRESETS, with_seed
from wasmobf.fixtures import corpus
from wasmobf.interp import differential_check, run_vectors
from wasmobf.pipeline import metrics_report, obfuscate


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--vectors", type=int, default=100)
    p.add_argument("--seed", type=lambda s: int(s, 0), default=0x5EED)
    p.add_argument("--presets", action="store_true", help="also run the o1/o2 combined presets")
    p.add_argument("--fixtures", nargs="*", help="restrict to these fixture names")
    p.add_argument("--json", metavar="PATH", help="write per-pair results")
    a = p.parse_args(argv)

    options = dict(PRESETS) if a.presets else dict(MATRIX)
    fixtures = [fx for fx in corpus() if not a.fixtures or fx.name in a.fixtures]
    rows, pairs = [], []
    failed = 0
    for opt, cfg in options.items():
        t0 = time.perf_counter()
        valid = equal = 0
        size, steps = [], []
        for fx in fixtures:
            vecs = fx.vectors(a.vectors, seed=a.seed)
            out = decode_module(encode_module(obfuscate(fx.module, with_seed(cfg, a.seed)).module))
            ok_valid = validate_module(out).ok
            entry = fx.entry
            v = differential_check(fx.module, out, entry, vecs)
            before = run_vectors(fx.module, entry, vecs).steps
            after = run_vectors(out, entry, vecs).steps
            r = metrics_report(fx.module, out, steps=(before, after))["ratios"]
            valid += ok_valid
            equal += v.equal
            size.append(r["size"])
            steps.append(r["steps"])
            pairs.append({"fixture": fx.name, "option": opt, "valid": ok_valid, "equal": v.equal,
                          "detail": v.detail, **r})
        failed += (len(fixtures) - valid) + (len(fixtures) - equal)
        rows.append((opt, valid, equal, statistics.median(size), max(size),
                     statistics.median(steps), max(steps), time.perf_counter() - t0))

    n = len(fixtures)
    print(f"{'option':<20} {'valid':>7} {'equal':>7} {'size med':>9} {'size max':>9} "
          f"{'steps med':>10} {'steps max':>10} {'sec':>6}")
    for opt, valid, equal, smed, smax, tmed, tmax, sec in rows:
        print(f"{opt:<20} {valid:>3}/{n:<3} {equal:>3}/{n:<3} {smed:>9.2f} {smax:>9.2f} "
              f"{tmed:>10.1f} {tmax:>10.1f} {sec:>6.1f}")
    if a.json:
        with open(a.json, "w") as f:
            json.dump(pairs, f, indent=2)
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
