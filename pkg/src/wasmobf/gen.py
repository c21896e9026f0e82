"""Random generator of valid, terminating modules.

Bodies are produced type-directed, so every output validates. Calls only
target lower-indexed functions and loops count down a dedicated local, so
every export terminates. With ``runnable=False`` the generator also emits
constructs the interpreter cannot link (global imports, start functions).
"""

from __future__ import annotations

import random
from typing import Optional

from . import opcodes as op
from .binfmt import (
    KIND_FUNC, KIND_GLOBAL, KIND_MEMORY, CustomSection, DataSegment, ElemSegment, Export, FuncBody,
    FuncType, Global, GlobalType, Import, Instr, Limits, Module, NameData, NameEntry, TableType,
    set_name_data,
)

VALTYPES = ("i32", "i64", "f32", "f64")

_BIN = {t: [n for n, (p, r) in op.SIGNATURES.items() if p == (t, t) and r == (t,)] for t in VALTYPES}
_NOT_PURE = set(op.LOADS) | {"memory.grow"}
_UN = {t: [n for n, (p, r) in op.SIGNATURES.items() if p == (t,) and r == (t,) and n not in _NOT_PURE]
       for t in VALTYPES}
_CONV = {t: [n for n, (p, r) in op.SIGNATURES.items()
             if len(p) == 1 and r == (t,) and p[0] != t and n not in _NOT_PURE]
         for t in VALTYPES}
_CMP = [n for n, (p, r) in op.SIGNATURES.items()
        if r == ("i32",) and len(p) == 2 and p[0] == p[1] and n not in _BIN["i32"]]
_TEST = ["i32.eqz", "i64.eqz"]
_LOADS = {t: [n for n, (lt, _, _) in op.LOADS.items() if lt == t] for t in VALTYPES}
_STORES = {t: [n for n, (st, _) in op.STORES.items() if st == t] for t in VALTYPES}


def random_const(rng: random.Random, t: str) -> Instr:
    if t == "i32":
        v = rng.choice([0, 1, -1, 2, 0x7FFFFFFF, -0x80000000]) if rng.random() < 0.3 else rng.randint(-2 ** 31, 2 ** 31 - 1)
        return Instr("i32.const", v)
    if t == "i64":
        v = rng.choice([0, 1, -1, 2 ** 63 - 1, -2 ** 63]) if rng.random() < 0.3 else rng.randint(-2 ** 63, 2 ** 63 - 1)
        return Instr("i64.const", v)
    bits = 32 if t == "f32" else 64
    if rng.random() < 0.5:
        import struct
        fmt = "<f" if t == "f32" else "<d"
        v = rng.choice([0.0, 1.0, -2.5, 100.0, 1e-3, 123456.75])
        return Instr(f"{t}.const", int.from_bytes(struct.pack(fmt, v), "little"))
    return Instr(f"{t}.const", rng.getrandbits(bits))


class BodyGen:
    def __init__(self, rng: random.Random, m: Module, func_index: int, ftype: FuncType,
                 max_depth: int = 3):
        self.rng = rng
        self.m = m
        self.fi = func_index
        self.ft = ftype
        self.locals: list[str] = list(ftype.params)
        self.extra: list[str] = []
        self.counters: set[int] = set()
        self.max_depth = max_depth

    def new_local(self, t: str) -> int:
        self.extra.append(t)
        self.locals.append(t)
        return len(self.locals) - 1

    def local_of(self, t: str, writable: bool = False) -> Optional[int]:
        cands = [i for i, lt in enumerate(self.locals) if lt == t and not (writable and i in self.counters)]
        return self.rng.choice(cands) if cands else None

    def callees(self, results: tuple) -> list[int]:
        return [f for f in range(self.fi) if self.m.func_type(f).results == results]

    def address(self, d: int) -> list[Instr]:
        return self.expr("i32", d + 1) + [Instr("i32.const", 0xFFF), Instr("i32.and")]

    # -- expressions

    def expr(self, t: str, d: int = 0) -> list[Instr]:
        rng = self.rng
        if d >= self.max_depth:
            li = self.local_of(t)
            if li is not None and rng.random() < 0.5:
                return [Instr("local.get", li)]
            return [random_const(rng, t)]
        choices = ["const", "local", "bin", "bin", "un", "conv"]
        if t == "i32":
            choices += ["cmp", "test", "cmp"]
            if self.m.memory_limits():
                choices.append("size")
        if self.m.memory_limits():
            choices.append("load")
        if any(g.valtype == t for g in self.m.global_types()):
            choices.append("global")
        if self.callees((t,)):
            choices.append("call")
        choices += ["block", "if", "select"]
        k = rng.choice(choices)
        if k == "const":
            return [random_const(rng, t)]
        if k == "local":
            li = self.local_of(t)
            return [Instr("local.get", li)] if li is not None else [random_const(rng, t)]
        if k == "global":
            gi = rng.choice([i for i, g in enumerate(self.m.global_types()) if g.valtype == t])
            return [Instr("global.get", gi)]
        if k == "bin":
            return self.expr(t, d + 1) + self.expr(t, d + 1) + [Instr(rng.choice(_BIN[t]))]
        if k == "un":
            return self.expr(t, d + 1) + [Instr(rng.choice(_UN[t]))]
        if k == "conv":
            name = rng.choice(_CONV[t])
            return self.expr(op.SIGNATURES[name][0][0], d + 1) + [Instr(name)]
        if k == "cmp":
            name = rng.choice(_CMP)
            pt = op.SIGNATURES[name][0][0]
            return self.expr(pt, d + 1) + self.expr(pt, d + 1) + [Instr(name)]
        if k == "test":
            name = rng.choice(_TEST)
            return self.expr(name[:3], d + 1) + [Instr(name)]
        if k == "size":
            return [Instr("memory.size")]
        if k == "load":
            name = rng.choice(_LOADS[t])
            return self.address(d) + [Instr(name, (rng.randint(0, op.NATURAL_ALIGN[name]), rng.randint(0, 16)))]
        if k == "call":
            f = rng.choice(self.callees((t,)))
            out: list[Instr] = []
            for pt in self.m.func_type(f).params:
                out += self.expr(pt, d + 1)
            return out + [Instr("call", f)]
        if k == "block":
            body = self.stmts(d + 1, rng.randint(0, 2)) + self.expr(t, d + 1)
            if rng.random() < 0.3:
                # early exit carrying a value
                body = self.expr(t, d + 1) + self.expr("i32", d + 1) + [Instr("br_if", 0), Instr("drop")] + body
            return [Instr("block", t, body)]
        if k == "if":
            cond = self.expr("i32", d + 1)
            then = self.stmts(d + 1, rng.randint(0, 1)) + self.expr(t, d + 1)
            orelse = self.stmts(d + 1, rng.randint(0, 1)) + self.expr(t, d + 1)
            return cond + [Instr("if", t, then, orelse)]
        # select
        return self.expr(t, d + 1) + self.expr(t, d + 1) + self.expr("i32", d + 1) + [Instr("select")]

    # -- statements

    def stmts(self, d: int, n: int) -> list[Instr]:
        out: list[Instr] = []
        for _ in range(n):
            out += self.stmt(d)
        return out

    def stmt(self, d: int) -> list[Instr]:
        rng = self.rng
        t = rng.choice(VALTYPES)
        choices = ["set", "set", "drop", "nop"]
        if self.m.memory_limits():
            choices += ["store", "store"]
            if self.m.memory_limits()[0].max is not None and rng.random() < 0.1:
                choices.append("grow")
        if any(g.mutable for g in self.m.global_types()):
            choices.append("gset")
        if self.callees(()):
            choices.append("vcall")
        if d < self.max_depth:
            choices += ["block", "loop", "if", "trap"]
        k = rng.choice(choices)
        if k == "set":
            li = self.local_of(t, writable=True)
            if li is None:
                li = self.new_local(t)
            if rng.random() < 0.3:
                return self.expr(t, d + 1) + [Instr("local.tee", li), Instr("drop")]
            return self.expr(t, d + 1) + [Instr("local.set", li)]
        if k == "drop":
            return self.expr(t, d + 1) + [Instr("drop")]
        if k == "nop":
            return [Instr("nop")]
        if k == "store":
            name = rng.choice(_STORES[t])
            return self.address(d) + self.expr(t, d + 1) + \
                [Instr(name, (rng.randint(0, op.NATURAL_ALIGN[name]), rng.randint(0, 16)))]
        if k == "grow":
            return [Instr("i32.const", rng.randint(0, 1)), Instr("memory.grow"), Instr("drop")]
        if k == "gset":
            gi = rng.choice([i for i, g in enumerate(self.m.global_types()) if g.mutable])
            return self.expr(self.m.global_types()[gi].valtype, d + 1) + [Instr("global.set", gi)]
        if k == "vcall":
            f = rng.choice(self.callees(()))
            out: list[Instr] = []
            for pt in self.m.func_type(f).params:
                out += self.expr(pt, d + 1)
            return out + [Instr("call", f)]
        if k == "block":
            body = self.stmts(d + 1, rng.randint(1, 3))
            body[rng.randint(0, len(body)):0] = self.expr("i32", d + 1) + [Instr("br_if", 0)]
            return [Instr("block", None, body)]
        if k == "loop":
            c = self.new_local("i32")
            self.counters.add(c)
            body = self.stmts(d + 1, rng.randint(1, 2)) + [
                Instr("local.get", c), Instr("i32.const", 1), Instr("i32.sub"), Instr("local.tee", c),
                Instr("br_if", 0)]
            return [Instr("i32.const", rng.randint(1, 4)), Instr("local.set", c), Instr("loop", None, body)]
        if k == "if":
            then = self.stmts(d + 1, rng.randint(1, 2))
            orelse = self.stmts(d + 1, rng.randint(0, 2)) if rng.random() < 0.5 else None
            return self.expr("i32", d + 1) + [Instr("if", None, then, orelse)]
        # trap or early return on a rarely-true condition
        cond = self.expr("i32", d + 1) + [Instr("i32.const", 7), Instr("i32.and"), Instr("i32.eqz")]
        if rng.random() < 0.5:
            return cond + [Instr("if", None, [Instr("unreachable")])]
        ret = []
        for rt in self.ft.results:
            ret += self.expr(rt, d + 1)
        return cond + [Instr("if", None, ret + [Instr("return")])]

    def function(self, nstmts: int) -> FuncBody:
        body = self.stmts(0, nstmts)
        for rt in self.ft.results:
            body += self.expr(rt, 0)
        if self.rng.random() < 0.2:
            body.append(Instr("return"))
        locals_: list[tuple[int, str]] = []
        for t in self.extra:
            if locals_ and locals_[-1][1] == t:
                locals_[-1] = (locals_[-1][0] + 1, t)
            else:
                locals_.append((1, t))
        return FuncBody(locals_, body)


def random_functype(rng: random.Random) -> FuncType:
    params = tuple(rng.choice(VALTYPES) for _ in range(rng.randint(0, 3)))
    if rng.random() < 0.5:
        params = ("i32", "i32") + params[:1]
    results = (rng.choice(VALTYPES),) if rng.random() < 0.8 else ()
    return FuncType(params, results)


def random_module(rng: random.Random, max_funcs: int = 5, runnable: bool = True,
                  max_stmts: int = 6) -> Module:
    m = Module()
    nimp = rng.randint(0, 2)
    for i in range(nimp):
        t = m.add_type(FuncType(tuple(rng.choice(VALTYPES) for _ in range(rng.randint(0, 2))),
                                (rng.choice(VALTYPES),) if rng.random() < 0.3 else ()))
        m.imports.append(Import(b"env", f"host{i}".encode(), KIND_FUNC, t))
    if not runnable and rng.random() < 0.3:
        m.imports.append(Import(b"env", b"g", KIND_GLOBAL, GlobalType("i32", False)))
    if rng.random() < 0.6:
        if not runnable and rng.random() < 0.2:
            m.imports.append(Import(b"env", b"mem", KIND_MEMORY, Limits(1, 2)))
        else:
            m.memories.append(Limits(1, rng.choice([None, 1, 2, 3])))
    for _ in range(rng.randint(0, 3)):
        t = rng.choice(VALTYPES)
        m.globals.append(Global(GlobalType(t, rng.random() < 0.7), [random_const(rng, t)]))
    nfun = rng.randint(1, max_funcs)
    for _ in range(nfun):
        fi = m.num_imported_funcs + len(m.functions)
        ft = random_functype(rng)
        m.functions.append(m.add_type(ft))
        m.code.append(FuncBody())
        m.code[-1] = BodyGen(rng, m, fi, ft).function(rng.randint(1, max_stmts))
    defined = list(m.defined_indices())
    for fi in defined:
        m.exports.append(Export(f"f{fi}".encode(), KIND_FUNC, fi))
    if m.memories and rng.random() < 0.5:
        m.exports.append(Export(b"memory", KIND_MEMORY, 0))
    if rng.random() < 0.4:
        size = rng.randint(1, 6)
        funcs = [rng.choice(defined) for _ in range(rng.randint(1, size))]
        m.tables.append(TableType(limits=Limits(size, rng.choice([None, size]))))
        m.elems.append(ElemSegment(0, [Instr("i32.const", rng.randint(0, size - len(funcs)))], funcs))
    if m.memory_limits():
        pos = 0
        for _ in range(rng.randint(0, 3)):
            pos += rng.randint(0, 64)
            data = bytes(rng.getrandbits(8) for _ in range(rng.randint(0, 40)))
            m.data.append(DataSegment(0, [Instr("i32.const", pos)], data))
            pos += len(data)
    if not runnable and rng.random() < 0.3:
        cands = [f for f in defined if m.func_type(f) == FuncType()]
        if cands:
            m.start = rng.choice(cands)
    if rng.random() < 0.5:
        set_name_data(m, NameData([NameEntry(i, f"fn_{i}".encode()) for i in range(len(m.func_type_indices()))]))
    if rng.random() < 0.3:
        m.customs.append(CustomSection(b"producers", bytes(rng.getrandbits(8) for _ in range(rng.randint(0, 20))), after=11))
    return m
