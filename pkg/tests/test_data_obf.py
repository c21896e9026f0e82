import json
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wasmobf.analysis import validate_module
from wasmobf.asm import asm
from wasmobf.binfmt import (
    KIND_FUNC, KIND_MEMORY, DataSegment, Export, FuncBody, FuncType, Import, Instr, Limits, Module,
    encode_module, get_name_data,
)
from wasmobf.data_obf import (
    ROLE_INIT, MemAccessSpec, MemKey, encrypt_data_segments, obfuscate_exports,
    obfuscate_function_names, obfuscate_memory, synthesize_mem_helpers,
)
from wasmobf.errors import PassError
from wasmobf.fixtures import load_fixture
from wasmobf.interp import differential_check, instantiate, invoke

KEY = MemKey(bytes([0x5A, 0xC3, 0x11, 0xFE, 0x00, 0x42, 0x99, 0x7E]))


def mem_module(body, results=("i32",), data=(), params=(), maximum=None):
    return Module(types=[FuncType(tuple(params), tuple(results))], functions=[0],
                  memories=[Limits(1, maximum)],
                  data=[DataSegment(0, [Instr("i32.const", a)], bytes(b)) for a, b in data],
                  code=[FuncBody([], asm(body))])


def run(m, *args):
    assert validate_module(m).ok
    r = invoke(instantiate(m), 0, list(args))
    assert r.trap is None, r.trap
    return [v.bits for v in r.values]


# ---------------------------------------------------------------- keystream

def test_key_examples():
    assert MemKey(b"\x5a").apply(b"\x41", 0) == b"\x1b"
    assert MemKey(b"\xff").apply(b"AB", 0) == bytes([0xBE, 0xBD])
    assert MemKey(b"\x01\x02").key_byte(5) == 2


@given(st.binary(max_size=64), st.integers(0, 2 ** 20), st.binary(min_size=1, max_size=8))
def test_xor_is_involution(data, addr, ks):
    if not any(ks):
        ks = b"\x01" + ks[1:]
    k = MemKey(ks)
    assert k.apply(k.apply(data, addr), addr) == data


def test_key_validation():
    with pytest.raises(PassError):
        MemKey(b"")
    with pytest.raises(PassError):
        MemKey(b"\0\0")
    with pytest.raises(PassError):
        MemKey(b"abc").pattern()
    assert MemKey(b"\x01\x02").pattern() == 0x0201020102010201
    assert MemKey.from_seed(7) == MemKey.from_seed(7) != MemKey.from_seed(8)


def test_access_spec():
    assert MemAccessSpec.of("i32.load8_s") == MemAccessSpec("i32.load8_s", "i32", 8, True, False)
    assert MemAccessSpec.of("i64.store32").store
    with pytest.raises(PassError):
        MemAccessSpec.of("i32.add")


# ---------------------------------------------------------------- segments

def test_segment_encryption():
    m = mem_module("i32.const 0", data=[(8, b"hi"), (100, b"abc")])
    e = encrypt_data_segments(m, KEY)
    assert e.data[0].data == KEY.apply(b"hi", 8) and e.data[1].data == KEY.apply(b"abc", 100)
    assert m.data[0].data == b"hi"


@pytest.mark.parametrize("data,offset", [
    ([(0, b"abcd"), (2, b"xy")], None),
    ([(0, b"ab")], [Instr("global.get", 0)]),
])
def test_segment_refusals(data, offset):
    m = mem_module("i32.const 0", data=data)
    if offset is not None:
        m.data[0].offset = offset
    with pytest.raises(PassError):
        obfuscate_memory(m, KEY)


def test_refuses_imported_memory():
    m = Module(imports=[Import(b"env", b"mem", KIND_MEMORY, Limits(1))])
    with pytest.raises(PassError):
        obfuscate_memory(m, KEY)


# ---------------------------------------------------------------- helpers

@pytest.mark.parametrize("body,data,expected", [
    ("i32.const 16; i32.load8_u", [(16, [0x7F])], 0x7F),
    ("i32.const 16; i32.load8_s", [(16, [0x80])], 0xFFFFFF80),
    ("i32.const 3; i32.load16_s offset=2", [(5, [0x34, 0x92])], 0xFFFF9234),
    ("i32.const 8; i64.load", [(8, range(1, 9))], 0x0807060504030201),
    ("i32.const 13; i64.load", [(13, range(1, 9))], 0x0807060504030201),
    ("i32.const 13; i64.load32_s", [(13, [0, 0, 0, 0x80])], 0xFFFFFFFF80000000),
    ("i32.const 40; f32.load", [(40, [0, 0, 0x80, 0x3F])], 0x3F800000),
])
def test_load_helpers(body, data, expected):
    results = ("i64",) if "i64" in body else ("f32",) if "f32" in body else ("i32",)
    m = mem_module(body, results=results, data=data)
    o = obfuscate_memory(m, KEY)
    assert run(o) == run(m) == [expected]


@pytest.mark.parametrize("body,results", [
    ("i32.const 7; i32.const 0x12345678; i32.store; i32.const 7; i32.load", ("i32",)),
    ("i32.const 9; i64.const -2; i64.store16; i32.const 8; i64.load", ("i64",)),
    ("i32.const 100; f64.const 1.5; f64.store offset=4; i32.const 104; i64.load", ("i64",)),
    ("i32.const 65528; i64.const 77; i64.store; i32.const 65528; i64.load", ("i64",)),
])
def test_store_load_roundtrip(body, results):
    m = mem_module(body, results=results)
    assert run(obfuscate_memory(m, KEY)) == run(m)


def test_store_plaintext_never_appears():
    m = mem_module("i32.const 32; i32.const 0x41424344; i32.store; i32.const 0", data=[(0, b"secret")])
    o = obfuscate_memory(m, KEY)
    inst = instantiate(o)
    invoke(inst, 0, [])
    mem = bytes(inst.memory)
    assert mem[32:36] == KEY.apply(b"DCBA", 32)
    assert mem[0:6] == KEY.apply(b"secret", 0)
    # untouched memory decrypts to zero
    assert mem[200:208] == KEY.apply(bytes(8), 200)


def test_oob_still_traps_after_rewrite():
    for body in ("i32.const 65533; i32.load", "i32.const -1; i32.load8_u offset=1",
                 "i32.const 65535; i32.const 1; i32.store16; i32.const 0"):
        m = mem_module(body)
        o = obfuscate_memory(m, KEY)
        assert invoke(instantiate(o), 0, []).trap == invoke(instantiate(m), 0, []).trap == "oob"


def test_grow_fills_new_pages():
    m = mem_module("i32.const 1; memory.grow; drop; i32.const 70000; i64.load; "
                   "i32.const 5; memory.grow; i64.extend_i32_u; i64.add", results=("i64",), maximum=3)
    o = obfuscate_memory(m, KEY)
    assert run(o) == run(m) == [0xFFFFFFFF]


def test_start_function_chained():
    fx = load_fixture("start")
    o = obfuscate_memory(fx.module, KEY)
    assert o.injected[o.start] == ROLE_INIT
    assert differential_check(fx.module, o, fx.entry, fx.vectors(20)).equal


def test_no_memory_leaves_code_identical():
    fx = load_fixture("fact")
    stats = {}
    o = obfuscate_memory(fx.module, KEY, stats)
    assert encode_module(o) == encode_module(fx.module) and stats["memory_helpers"] == 0


def test_helpers_only_for_used_opcodes():
    m = mem_module("i32.const 0; i32.load8_u")
    _, helpers = synthesize_mem_helpers(m, KEY)
    assert set(helpers) == {"i32.load8_u"}


@pytest.mark.parametrize("name", ["mem_rw", "mem_data", "mem_uninit", "mem_grow", "mem_oob", "strhash",
                                  "bubble", "start"])
@pytest.mark.parametrize("length", [1, 2, 4, 8])
def test_memory_fixtures(name, length):
    fx = load_fixture(name)
    o = obfuscate_memory(fx.module, MemKey.from_seed(length * 31, length))
    assert validate_module(o).ok
    assert differential_check(fx.module, o, fx.entry, fx.vectors(30)).equal


# ---------------------------------------------------------------- renaming

def test_function_names_same_size():
    fx = load_fixture("calls20")
    o, rm = obfuscate_function_names(fx.module, random.Random(1))
    assert len(encode_module(o)) == len(encode_module(fx.module))
    before, after = get_name_data(fx.module), get_name_data(o)
    assert len(rm) == before.count == after.count
    assert before.section_len == after.section_len
    for a, b in zip(before.entries, after.entries):
        assert a.index == b.index and a.name_len == b.name_len and a.name != b.name


def test_function_names_without_section():
    m = Module()
    o, rm = obfuscate_function_names(m, random.Random(0))
    assert len(rm) == 0 and encode_module(o) == encode_module(m)


def _export_module():
    return Module(types=[FuncType()], functions=[0, 0, 0], code=[FuncBody([], [])] * 3,
                  memories=[Limits(1)],
                  imports=[Import(b"env", b"log", KIND_FUNC, 0),
                           Import(b"wasi_snapshot_preview1", b"fd_write", KIND_FUNC, 0)],
                  exports=[Export(b"memory", KIND_MEMORY, 0), Export(b"_start", KIND_FUNC, 2),
                           Export(b"compute", KIND_FUNC, 3), Export(b"helper", KIND_FUNC, 4)])


def test_export_renaming():
    m = _export_module()
    o, rm = obfuscate_exports(m, random.Random(0))
    names = [e.name for e in o.exports]
    assert names[:2] == [b"memory", b"_start"]
    assert all(8 <= len(n) <= 16 and n.isalnum() for n in names[2:])
    assert len(set(names)) == 4
    assert rm.renamed("export").keys() == {b"compute", b"helper"}
    assert [i.name for i in o.imports] == [b"log", b"fd_write"]
    doc = json.loads(rm.to_json())
    assert {d["original"] for d in doc} == {"compute", "helper"}


def test_import_renaming_protects_wasi():
    o, rm = obfuscate_exports(_export_module(), random.Random(0), rename_imports=True)
    assert o.imports[1].name == b"fd_write" and o.imports[0].name != b"log"
    assert len(rm.renamed("import")) == 1


def test_custom_allowlist():
    o, _ = obfuscate_exports(_export_module(), random.Random(0), allowlist=["compute"])
    assert [e.name for e in o.exports].count(b"compute") == 1
    assert o.exports[0].name != b"memory"


@given(st.integers(0, 2 ** 32))
@settings(max_examples=20)
def test_renaming_deterministic(seed):
    a, _ = obfuscate_exports(_export_module(), random.Random(seed))
    b, _ = obfuscate_exports(_export_module(), random.Random(seed))
    assert encode_module(a) == encode_module(b)
