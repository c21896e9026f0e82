#!/usr/bin/env python3
"""Differential fuzzing: random valid modules through every pass configuration.

Each failing (seed, config) pair is printed with the divergence detail; the
seed reproduces the module via ``wasmobf.gen.random_module``.
"""

from __future__ import annotations

import argparse
import random
import sys
import time

from wasmobf.analysis import validate_module
from wasmobf.binfmt import decode_module, encode_module
from wasmobf.config import PRESETS, ObfConfig, with_seed
from wasmobf.fixtures import random_arg
from wasmobf.gen import random_module
from wasmobf.interp import differential_check
from wasmobf.pipeline import obfuscate

EXTRA = {
    "alias100-simple": ObfConfig(alias=100, opaque="simple"),
    "alias100+o2": ObfConfig(alias=100, collatz="o2"),
    "flatten8+o2": ObfConfig(flatten=8, collatz="o2"),
    "mem-L1": ObfConfig(memory=True, key_length=1),
    "mem-L2": ObfConfig(memory=True, key_length=2),
}


def check(seed: int, name: str, cfg: ObfConfig, vectors: int) -> str | None:
    m = random_module(random.Random(seed), max_funcs=4, max_stmts=5)
    out = decode_module(encode_module(obfuscate(m, with_seed(cfg, seed)).module))
    rep = validate_module(out)
    if not rep.ok:
        return f"invalid output: {rep}"
    rng = random.Random(seed)
    for fi in m.defined_indices():
        vecs = [[random_arg(rng, t) for t in m.func_type(fi).params] for _ in range(vectors)]
        v = differential_check(m, out, fi, vecs, fuel=2_000_000)
        if not (v.equal or v.inconclusive):
            return f"func {fi}: {v.detail}"
    return None


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("-n", "--modules", type=int, default=200)
    p.add_argument("--start", type=int, default=0, help="first seed")
    p.add_argument("--vectors", type=int, default=8)
    a = p.parse_args(argv)
    configs = {**PRESETS, **EXTRA}
    t0 = time.perf_counter()
    failures = 0
    for seed in range(a.start, a.start + a.modules):
        for name, cfg in configs.items():
            err = check(seed, name, cfg, a.vectors)
            if err:
                failures += 1
                print(f"seed={seed} config={name}: {err}")
    print(f"{a.modules} modules x {len(configs)} configs, {failures} failures, "
          f"{time.perf_counter() - t0:.1f}s")
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
