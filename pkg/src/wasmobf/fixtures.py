"""Hand-written fixture modules covering arithmetic, control flow, calls,
memory, globals, floats and traps.

Every fixture (except ``calls20``) imports ``env.emit : i32 -> ()`` as
function 0 so that host-visible output takes part in differential checks.
Loop bounds are derived from masked inputs so every call terminates quickly.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from typing import Callable, Optional

from .asm import asm
from .binfmt import (
    KIND_FUNC, KIND_MEMORY, DataSegment, ElemSegment, Export, FuncBody, FuncType, Global,
    GlobalType, Import, Instr, Limits, Module, NameData, NameEntry, TableType, set_name_data,
)

I32_SPECIALS = [0, 1, -1, 2, 7, 10, 255, 256, 0x7FFFFFFF, -0x80000000, 0xFFFF, 1 << 16]
I64_SPECIALS = [0, 1, -1, 1 << 32, (1 << 63) - 1, -(1 << 63), 0xFFFFFFFF]
F_SPECIALS = [0.0, -0.0, 1.0, -1.0, 0.5, math.inf, -math.inf, math.nan, 1e300, 3.4e38]


@dataclass
class Fixture:
    name: str
    module: Module
    entry: int                      # function index of the entry point
    params: tuple[str, ...]
    tags: frozenset = field(default_factory=frozenset)

    def vectors(self, n: int = 100, seed: int = 0) -> list[list]:
        rng = random.Random(f"{self.name}:{seed}")
        return [[random_arg(rng, t) for t in self.params] for _ in range(n)]


def random_arg(rng: random.Random, t: str):
    special = rng.random() < 0.3
    if t == "i32":
        return rng.choice(I32_SPECIALS) if special else rng.getrandbits(32)
    if t == "i64":
        return rng.choice(I64_SPECIALS) if special else rng.getrandbits(64)
    if special:
        return rng.choice(F_SPECIALS)
    return rng.uniform(-1e6, 1e6) if rng.random() < 0.5 else rng.uniform(-10, 10)


class Builder:
    """Incremental module construction with export and name bookkeeping."""

    def __init__(self, emit: bool = True):
        self.m = Module()
        self.names: dict[int, str] = {}
        if emit:
            t = self.m.add_type(FuncType(("i32",), ()))
            self.m.imports.append(Import(b"env", b"emit", KIND_FUNC, t))
            self.names[0] = "emit"

    @property
    def next_index(self) -> int:
        return self.m.num_imported_funcs + len(self.m.functions)

    def func(self, name: str, params: tuple, results: tuple, body: str,
             locals: tuple = (), export: Optional[str] = None) -> int:
        fb = FuncBody(_group(locals), asm(body))
        idx = self.m.add_function(FuncType(tuple(params), tuple(results)), fb)
        self.names[idx] = name
        if export is not None:
            self.m.exports.append(Export(export.encode(), KIND_FUNC, idx))
        return idx

    def memory(self, min_pages: int = 1, max_pages: Optional[int] = None, export: bool = True):
        self.m.memories.append(Limits(min_pages, max_pages))
        if export:
            self.m.exports.append(Export(b"memory", KIND_MEMORY, 0))

    def data(self, offset: int, data: bytes):
        self.m.data.append(DataSegment(0, [Instr("i32.const", offset)], data))

    def table(self, size: int, funcs: list[int], offset: int = 0):
        self.m.tables.append(TableType(limits=Limits(size, size)))
        self.m.elems.append(ElemSegment(0, [Instr("i32.const", offset)], funcs))

    def global_(self, t: str, init: int, mutable: bool = True) -> int:
        self.m.globals.append(Global(GlobalType(t, mutable), [Instr(f"{t}.const", init)]))
        return len(self.m.globals) - 1

    def build(self) -> Module:
        set_name_data(self.m, NameData([NameEntry(i, n.encode()) for i, n in sorted(self.names.items())]))
        return self.m


def _group(locals: tuple) -> list[tuple[int, str]]:
    out: list[tuple[int, str]] = []
    for t in locals:
        if out and out[-1][1] == t:
            out[-1] = (out[-1][0] + 1, t)
        else:
            out.append((1, t))
    return out


# ---------------------------------------------------------------- fixtures

def fx_add():
    b = Builder()
    f = b.func("add", ("i32", "i32"), ("i32",), "local.get 0; local.get 1; i32.add", export="add")
    return b, f


def fx_arith():
    b = Builder()
    f = b.func("arith_mix", ("i32", "i32"), ("i32",), """
        local.get 0; i32.const 3; i32.mul; local.get 1; i32.xor; local.tee 2; call 0
        local.get 2; i32.const 5; i32.rotl; local.get 1; i32.const 31; i32.and; i32.shr_u
        local.get 0; i32.clz; i32.add; local.set 3
        local.get 3; local.get 1; i32.popcnt; i32.sub; local.get 0; i32.ctz; i32.shl
        local.get 3; local.get 0; i32.ge_s; i32.add
        local.get 2; i32.eqz; i32.sub
        """, locals=("i32", "i32"), export="arith_mix")
    return b, f


def fx_fact():
    b = Builder()
    f = b.func("factorial", ("i32",), ("i64",), """
        i64.const 1; local.set 1
        local.get 0; i32.const 15; i32.and; local.set 0
        block
          loop
            local.get 0; i32.eqz; br_if 1
            local.get 1; local.get 0; i64.extend_i32_u; i64.mul; local.set 1
            local.get 0; i32.const 1; i32.sub; local.set 0
            br 0
          end
        end
        local.get 1; i32.wrap_i64; call 0
        local.get 1
        """, locals=("i64",), export="factorial")
    return b, f


def fx_fib():
    b = Builder()
    fib = b.next_index
    b.func("fib", ("i32",), ("i32",), f"""
        local.get 0; i32.const 2; i32.lt_u
        if i32
          local.get 0
        else
          local.get 0; i32.const 1; i32.sub; call {fib}
          local.get 0; i32.const 2; i32.sub; call {fib}
          i32.add
        end
        """)
    f = b.func("fib_main", ("i32",), ("i32",), f"""
        local.get 0; i32.const 7; i32.and; call {fib}; local.tee 1; call 0
        local.get 1; local.get 0; i32.const 8; i32.shr_u; i32.const 3; i32.and; call {fib}; i32.add
        """, locals=("i32",), export="fib")
    return b, f


def fx_gcd():
    b = Builder()
    f = b.func("gcd", ("i32", "i32"), ("i32",), """
        block
          loop
            local.get 1; i32.eqz; br_if 1
            local.get 0; local.get 1; i32.rem_u; local.set 2
            local.get 1; local.set 0
            local.get 2; local.set 1
            local.get 0; call 0
            br 0
          end
        end
        local.get 0
        """, locals=("i32",), export="gcd")
    return b, f


def fx_switch():
    b = Builder()
    f = b.func("switch", ("i32",), ("i32",), """
        block
          block
            block
              block
                local.get 0; i32.const 7; i32.and
                br_table 0 1 2 3 1 0 2 3 3
              end
              i32.const 10; call 0; i32.const 100; return
            end
            i32.const 20; call 0; i32.const 200; return
          end
          i32.const 300; return
        end
        local.get 0; i32.const 4; i32.shl
        """, export="switch")
    return b, f


def fx_divtrap():
    b = Builder()
    f = b.func("divide", ("i32", "i32"), ("i32",), """
        local.get 0; local.get 1; i32.div_s
        local.get 0; local.get 1; i32.rem_u
        i32.add
        local.get 0; call 0
        local.get 0; local.get 1; i32.rem_s; i32.xor
        """, export="divide")
    return b, f


def fx_mem_rw():
    b = Builder()
    b.memory(1)
    f = b.func("mem_rw", ("i32", "i32"), ("i32",), """
        i32.const 100; local.get 0; i32.store
        i32.const 104; local.get 1; i32.store16 offset=2
        i32.const 100; i32.load8_s offset=1
        i32.const 100; i32.load16_u offset=5
        i32.add
        i32.const 96; i64.load offset=4
        i32.wrap_i64; i32.xor
        i32.const 101; i32.load align=0
        i32.add
        i32.const 120; local.get 0; i64.extend_i32_s; i64.const 0x0102030405060708; i64.mul; i64.store
        i32.const 121; i64.load32_s; i32.wrap_i64; call 0
        i32.const 127; i64.load8_s; i64.const 1; i64.add; i32.wrap_i64; i32.add
        i32.const 120; i64.load16_u offset=2; i32.wrap_i64; i32.add
        i32.const 131; local.get 1; i64.extend_i32_u; i64.store32 offset=1
        i32.const 132; i64.load32_u; i64.const 3; i64.shl; i32.wrap_i64; i32.add
        i32.const 140; local.get 0; i64.extend_i32_u; i64.store8
        i32.const 140; i64.load16_s; i32.wrap_i64; i32.sub
        i32.const 150; local.get 1; i32.store8
        i32.const 150; i32.load8_u; i32.add
        """, export="mem_rw")
    return b, f


def fx_mem_data():
    b = Builder()
    b.memory(1)
    text = b"The quick brown fox jumps over the lazy dog"
    b.data(16, text)
    f = b.func("checksum", ("i32",), ("i32",), f"""
        local.get 0; local.set 1
        block
          loop
            local.get 2; i32.const {len(text)}; i32.ge_u; br_if 1
            local.get 1; i32.const 31; i32.mul
            local.get 2; i32.load8_u offset=16; i32.add; local.set 1
            local.get 2; i32.const 7; i32.and; i32.eqz
            if
              local.get 2; i32.load8_u offset=16; call 0
            end
            local.get 2; i32.const 1; i32.add; local.set 2
            br 0
          end
        end
        i32.const 20; i32.load; local.get 1; i32.xor
        """, locals=("i32", "i32"), export="checksum")
    return b, f


def fx_mem_uninit():
    b = Builder()
    b.memory(1)
    b.data(8, b"seeded!!")
    f = b.func("read_uninit", ("i32",), ("i64",), """
        local.get 0; i32.const 1023; i32.and; i32.const 4096; i32.add; local.set 1
        local.get 1; i64.load
        local.get 1; i32.load8_s offset=3; i64.extend_i32_s; i64.add
        local.get 1; f64.load offset=16; i64.trunc_f64_s; i64.add
        local.get 1; f32.load offset=32; f32.const 1; f32.add; i64.trunc_f32_s; i64.add
        local.get 1; local.get 0; i32.store offset=2048
        i32.const 12; i32.load16_u; i64.extend_i32_u; i64.add
        i32.const 5; i64.load; i64.add
        """, locals=("i32",), export="read_uninit")
    return b, f


def fx_mem_grow():
    b = Builder()
    b.memory(1, 4)
    f = b.func("grow", ("i32",), ("i32",), """
        local.get 0; i32.const 1; i32.and; memory.grow; local.set 1
        memory.size; call 0
        memory.size; i32.const 1; i32.sub; i32.const 16; i32.shl; local.set 2
        local.get 2; i64.load offset=8; i32.wrap_i64; call 0
        local.get 2; i32.load8_u offset=65535; call 0
        local.get 2; local.get 0; i32.store offset=12
        local.get 2; f64.const 2.5; f64.store offset=24
        local.get 2; i32.load offset=12; local.get 1; i32.add
        local.get 2; f64.load offset=24; i32.trunc_f64_s; i32.add
        """, locals=("i32", "i32"), export="grow")
    return b, f


def fx_mem_oob():
    b = Builder()
    b.memory(1)
    f = b.func("oob", ("i32",), ("i32",), """
        local.get 0; i32.const 0x100; i32.and
        if
          local.get 0; i32.load offset=0xFFFFFF00; call 0
        end
        local.get 0; i32.const 0x1FFFF; i32.and; local.tee 1; local.get 0; i32.store16
        local.get 1; i32.load16_s
        local.get 1; i32.load offset=3; i32.add
        """, locals=("i32",), export="oob")
    return b, f


def fx_calls20():
    b = Builder(emit=False)
    sq = b.func("square", ("i32",), ("i32",), "local.get 0; local.get 0; i32.mul")
    inc = b.func("inc", ("i32",), ("i32",), "local.get 0; i32.const 1; i32.add")
    mix = b.func("mix", ("i32", "i32"), ("i32",), "local.get 0; i32.const 7; i32.rotl; local.get 1; i32.xor")
    neg = b.func("neg", ("i32",), ("i32",), "i32.const 0; local.get 0; i32.sub")
    rounds = "\n".join(
        f"local.get 0; call {sq}; call {inc}; local.get 1; call {mix}; call {neg}; local.get 2; i32.add; local.set 2"
        if k % 2 == 0 else
        f"local.get 2; call {inc}; local.get 0; call {sq}; call {mix}; call {neg}; local.set 2"
        for k in range(5))
    f = b.func("calls20", ("i32", "i32"), ("i32",), rounds + "\nlocal.get 2",
               locals=("i32",), export="calls20")
    return b, f


def fx_indirect():
    b = Builder()
    t2 = FuncType(("i32", "i32"), ("i32",))
    add = b.func("t_add", ("i32", "i32"), ("i32",), "local.get 0; local.get 1; i32.add")
    sub = b.func("t_sub", ("i32", "i32"), ("i32",), "local.get 0; local.get 1; i32.sub")
    mul = b.func("t_mul", ("i32", "i32"), ("i32",), "local.get 0; local.get 1; i32.mul")
    neg = b.func("t_neg", ("i32",), ("i32",), "i32.const 0; local.get 0; i32.sub")
    b.table(5, [add, sub, mul, neg])
    ti = b.m.add_type(t2)
    f = b.func("dispatch", ("i32", "i32", "i32"), ("i32",), f"""
        local.get 1; local.get 2; call {add}; call 0
        local.get 1; local.get 2; local.get 0; i32.const 7; i32.and; call_indirect {ti}
        local.get 1; local.get 2; call {mul}; i32.add
        """, export="dispatch")
    return b, f


def fx_floats():
    b = Builder()
    f = b.func("floats", ("f64", "f64"), ("f64",), """
        local.get 0; f64.const 1000; f64.min; f64.const -1000; f64.max
        f64.nearest; i32.trunc_f64_s; call 0
        local.get 0; local.get 1; f64.mul; local.get 0; f64.abs; f64.sqrt; f64.add; f64.floor
        local.get 1; f32.demote_f64; f32.const 1.5; f32.add; f32.nearest; f64.promote_f32; f64.max
        local.get 0; f64.neg; f64.copysign
        local.get 1; f64.const 3; f64.div; f64.trunc; f64.sub
        local.get 0; f32.demote_f64; f32.ceil; local.get 1; f32.demote_f64; f32.min; f64.promote_f32
        f64.add
        local.get 0; local.get 1; f64.lt; f64.convert_i32_u; f64.add
        """, export="floats")
    return b, f


def fx_i64():
    b = Builder()
    f = b.func("i64_ops", ("i64", "i64"), ("i64",), """
        local.get 0; local.get 1; i64.mul; local.get 0; i64.clz; i64.rotl
        local.get 1; i64.popcnt; i64.xor
        local.get 0; local.get 1; i64.const 63; i64.and; i64.shr_s; i64.add
        local.get 1; i64.ctz; local.get 0; i64.lt_u; i64.extend_i32_u; i64.sub
        local.get 0; i64.const 0x5555; i64.or; i64.const 17; i64.rem_s; i64.add
        local.get 0; local.get 1; i64.ge_s; call 0
        local.get 0; i64.const 0xFFFF; i64.and; local.get 1; i64.const 0xFF; i64.and; i64.const 1; i64.or; i64.div_u
        i64.add
        """, export="i64_ops")
    return b, f


def fx_globals():
    b = Builder()
    g0 = b.global_("i32", 7)
    g1 = b.global_("i64", 1000)
    f = b.func("counter", ("i32",), ("i32",), f"""
        global.get {g0}; i32.const 31; i32.mul; local.get 0; i32.add; global.set {g0}
        global.get {g1}; local.get 0; i64.extend_i32_u; i64.add; global.set {g1}
        global.get {g0}; call 0
        global.get {g0}; local.get 0; i32.xor
        global.get {g1}; i32.wrap_i64; i32.add
        """, export="counter")
    return b, f


def fx_select_if():
    b = Builder()
    f = b.func("select_if", ("i32", "i32"), ("i32",), """
        local.get 0; local.get 1; i32.lt_s
        if i32
          local.get 1; local.get 0; i32.sub
        else
          local.get 0; local.get 1; i32.sub
        end
        local.set 2
        block i32
          local.get 2; local.get 0; i32.const 1; i32.and; br_if 0
          drop; local.get 2; i32.const 2; i32.mul
        end
        local.get 0; local.get 1; local.get 0; i32.const 4; i32.and; select
        i32.add
        local.get 0; i32.const 2; i32.and
        if
          local.get 1; call 0
        end
        """, locals=("i32",), export="select_if")
    return b, f


def fx_bubble():
    b = Builder()
    b.memory(1)
    f = b.func("bubble_sort", ("i32",), ("i32",), """
        local.get 0; local.set 3
        block
          loop
            local.get 1; i32.const 8; i32.ge_u; br_if 1
            local.get 3; i32.const 1103515245; i32.mul; i32.const 12345; i32.add; local.tee 3
            i32.const 16; i32.shr_u; local.set 4
            local.get 1; i32.const 2; i32.shl; local.get 4; i32.store offset=256
            local.get 1; i32.const 1; i32.add; local.set 1
            br 0
          end
        end
        i32.const 0; local.set 1
        block
          loop
            local.get 1; i32.const 7; i32.ge_u; br_if 1
            i32.const 0; local.set 2
            block
              loop
                local.get 2; i32.const 7; local.get 1; i32.sub; i32.ge_u; br_if 1
                local.get 2; i32.const 2; i32.shl; local.tee 4; i32.load offset=256
                local.get 4; i32.load offset=260
                i32.gt_u
                if
                  local.get 4; i32.load offset=256; local.set 3
                  local.get 4; local.get 4; i32.load offset=260; i32.store offset=256
                  local.get 4; local.get 3; i32.store offset=260
                end
                local.get 2; i32.const 1; i32.add; local.set 2
                br 0
              end
            end
            local.get 1; i32.const 1; i32.add; local.set 1
            br 0
          end
        end
        i32.const 256; i32.load; call 0
        i32.const 284; i32.load; call 0
        i32.const 256; i32.load offset=12; i32.const 256; i32.load offset=16; i32.sub
        """, locals=("i32", "i32", "i32", "i32"), export="bubble_sort")
    return b, f


def fx_unreachable():
    b = Builder()
    f = b.func("maybe_trap", ("i32",), ("i32",), """
        local.get 0; call 0
        local.get 0; i32.const 3; i32.and; i32.eqz
        if
          unreachable
        end
        local.get 0; i32.const 1; i32.add
        """, export="maybe_trap")
    return b, f


def fx_collatz_steps():
    b = Builder()
    f = b.func("collatz_steps", ("i32",), ("i32",), """
        local.get 0; i32.const 1023; i32.and; i32.const 1; i32.add; local.set 0
        block
          loop
            local.get 0; i32.const 1; i32.eq; br_if 1
            local.get 1; i32.const 1; i32.add; local.set 1
            local.get 0; i32.const 1; i32.and
            if i32
              local.get 0; i32.const 3; i32.mul; i32.const 1; i32.add
            else
              local.get 0; i32.const 1; i32.shr_u
            end
            local.set 0
            br 0
          end
        end
        local.get 1
        """, locals=("i32",), export="collatz_steps")
    return b, f


def fx_stack_heavy():
    b = Builder()
    f = b.func("stack_heavy", ("i32", "i32"), ("i32",), """
        local.get 0
        local.get 1
        i32.const 3
        local.get 0
        i32.mul
        block i32
          local.get 1; i32.const 5; i32.add
        end
        i64.const 77
        local.get 1
        i64.extend_i32_s
        i64.add
        f32.const 2.5
        local.get 0
        f32.convert_i32_s
        f32.mul
        i32.trunc_f32_s
        i64.extend_i32_s
        i64.xor
        i32.wrap_i64
        i32.add
        i32.add
        i32.sub
        i32.xor
        """, export="stack_heavy")
    return b, f


def fx_start():
    b = Builder()
    b.memory(1)
    g = b.global_("i32", 0)
    start = b.func("init", (), (), f"""
        i32.const 64; i32.const 0x1234; i32.store
        i32.const 5; global.set {g}
        i32.const 99; call 0
        """)
    b.m.start = start
    f = b.func("use_init", ("i32",), ("i32",), f"""
        i32.const 64; i32.load; global.get {g}; i32.add; local.get 0; i32.mul
        i32.const 64; i32.const 64; i32.load; local.get 0; i32.add; i32.store
        """, export="use_init")
    return b, f


def fx_early_return():
    b = Builder()
    f = b.func("early_return", ("i32",), ("i32",), """
        local.get 0; i32.const 0x7FFF; i32.and; i32.const 10; i32.gt_u
        if
          i32.const 1; call 0; local.get 0; return
        end
        local.get 0; i32.const 2; i32.mul; call 0
        block
          local.get 0; i32.const 5; i32.eq; br_if 0
          i32.const 3; call 0
        end
        local.get 0; i32.const 100; i32.add
        return
        """, export="early_return")
    return b, f


def fx_strhash():
    b = Builder()
    b.memory(1)
    s1 = b"WebAssembly obfuscation test vector 0123456789"
    s2 = bytes((i * 37 + 11) & 0xFF for i in range(64))
    b.data(32, s1)
    b.data(200, s2)
    f = b.func("fnv_hash", ("i32",), ("i32",), f"""
        i32.const 0x811c9dc5; local.get 0; i32.xor; local.set 1
        i32.const 32; local.set 2
        block
          loop
            local.get 2; i32.const {200 + len(s2)}; i32.ge_u; br_if 1
            local.get 1; local.get 2; i32.load8_u; i32.xor; i32.const 16777619; i32.mul; local.set 1
            local.get 2; i32.const 1; i32.add; local.set 2
            local.get 2; i32.const {32 + len(s1)}; i32.eq
            if
              i32.const 200; local.set 2
              local.get 1; call 0
            end
            br 0
          end
        end
        local.get 1
        """, locals=("i32", "i32"), export="fnv_hash")
    return b, f


def fx_call_chain():
    b = Builder()
    c = b.next_index
    b.func("leaf", ("i64", "f32"), ("i64",), "local.get 0; local.get 1; i64.trunc_f32_s; i64.add")
    b.func("middle", ("i32",), ("i32",), f"""
        local.get 0; i32.const 1; i32.add; call 0
        local.get 0; i64.extend_i32_u; f32.const 2.0; call {c}; i32.wrap_i64
        """)
    b.func("outer", ("i32", "i32"), ("i32",), f"""
        local.get 0; call {c + 1}; local.get 1; call {c + 1}; i32.mul
        """)
    f = b.func("call_chain", ("i32", "i32"), ("i32",), f"""
        local.get 0; local.get 1; call {c + 2}
        local.get 1; call {c + 1}; i32.add
        i64.const 5; f32.const -3.5; call {c}; i32.wrap_i64; i32.add
        """, export="call_chain")
    return b, f


def fx_nested_blocks():
    b = Builder()
    f = b.func("nested", ("i32", "i32"), ("i32",), """
        block i32
          block
            block
              local.get 0; i32.const 3; i32.and; i32.eqz; br_if 0
              local.get 0; i32.const 3; i32.and; i32.const 1; i32.eq; br_if 1
              local.get 1; br 2
            end
            local.get 0; call 0
          end
          loop i32
            local.get 2; i32.const 1; i32.add; local.set 2
            local.get 2; local.get 1; i32.const 7; i32.and; i32.lt_u; br_if 0
            local.get 2
          end
        end
        local.get 0; i32.const 11; i32.mul
        i32.add
        """, locals=("i32",), export="nested")
    return b, f


FIXTURES: dict[str, Callable] = {
    "add": fx_add, "arith": fx_arith, "fact": fx_fact, "fib": fx_fib, "gcd": fx_gcd,
    "switch": fx_switch, "divtrap": fx_divtrap, "mem_rw": fx_mem_rw, "mem_data": fx_mem_data,
    "mem_uninit": fx_mem_uninit, "mem_grow": fx_mem_grow, "mem_oob": fx_mem_oob,
    "calls20": fx_calls20, "indirect": fx_indirect, "floats": fx_floats, "i64": fx_i64,
    "globals": fx_globals, "select_if": fx_select_if, "bubble": fx_bubble,
    "unreachable": fx_unreachable, "collatz_steps": fx_collatz_steps,
    "stack_heavy": fx_stack_heavy, "start": fx_start, "early_return": fx_early_return,
    "strhash": fx_strhash, "call_chain": fx_call_chain, "nested": fx_nested_blocks,
}


def load_fixture(name: str) -> Fixture:
    b, entry = FIXTURES[name]()
    m = b.build()
    return Fixture(name, m, entry, m.func_type(entry).params)


def corpus() -> list[Fixture]:
    return [load_fixture(n) for n in FIXTURES]
