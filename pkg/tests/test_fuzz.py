"""Property tests over randomly generated modules."""

import random

from hypothesis import given, settings
from hypothesis import strategies as st

from wasmobf.analysis import validate_module
from wasmobf.binfmt import decode_module, encode_module
from wasmobf.config import ObfConfig
from wasmobf.fixtures import random_arg
from wasmobf.gen import random_module
from wasmobf.interp import differential_check
from wasmobf.pipeline import obfuscate

CONFIGS = [
    ObfConfig(name=True, exports=True),
    ObfConfig(memory=True, key_length=4),
    ObfConfig(flatten=4),
    ObfConfig(flatten=6, collatz="o2"),
    ObfConfig(alias=100, opaque="simple"),
    ObfConfig(alias=50, flatten=5, memory=True, collatz="o1"),
]

seeds = st.integers(0, 2 ** 32 - 1)


@given(seeds)
@settings(max_examples=100)
def test_generated_modules_roundtrip(seed):
    m = random_module(random.Random(seed), runnable=False)
    assert validate_module(m).ok
    data = encode_module(m)
    assert encode_module(decode_module(data)) == data


@given(seeds, st.sampled_from(CONFIGS))
@settings(max_examples=30)
def test_passes_preserve_behaviour(seed, cfg):
    m = random_module(random.Random(seed), max_funcs=3, max_stmts=4)
    out = obfuscate(m, ObfConfig(**{**cfg.as_dict(), "allowlist": tuple(cfg.allowlist), "seed": seed})).module
    out = decode_module(encode_module(out))
    assert validate_module(out).ok
    rng = random.Random(seed)
    for fi in m.defined_indices():
        vecs = [[random_arg(rng, t) for t in m.func_type(fi).params] for _ in range(5)]
        v = differential_check(m, out, fi, vecs, fuel=2_000_000)
        assert v.equal or v.inconclusive, (fi, v.detail)
