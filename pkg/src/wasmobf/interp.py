"""Reference interpreter for the MVP subset, used as a differential-testing oracle.

Every value is held as its raw bit pattern in a Python int (i32/f32 in
[0, 2**32), i64/f64 in [0, 2**64)), so memory round trips and reinterprets are
exact. Function bodies are compiled once per instance into a flat instruction
list with resolved branch targets.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional, Sequence

from . import opcodes as op
from .binfmt import KIND_FUNC, FuncType, Instr, Module

PAGE = 65536
M32 = 0xFFFFFFFF
M64 = 0xFFFFFFFFFFFFFFFF
DEFAULT_FUEL = 10 ** 8
MAX_CALL_DEPTH = 2000
F32_NAN = 0x7FC00000
F64_NAN = 0x7FF8000000000000


class Trap(Exception):
    def __init__(self, kind: str):
        super().__init__(kind)
        self.kind = kind


class FuelExhausted(Exception):
    pass


class LinkError(Exception):
    pass


class Value(NamedTuple):
    type: str
    bits: int

    def signed(self) -> int:
        w = 32 if self.type in ("i32", "f32") else 64
        return self.bits - (1 << w) if self.bits >> (w - 1) else self.bits

    def float(self) -> float:
        return _f32(self.bits) if self.type == "f32" else _f64(self.bits)

    def is_nan(self) -> bool:
        if self.type == "f32":
            return (self.bits & 0x7F800000) == 0x7F800000 and self.bits & 0x7FFFFF != 0
        if self.type == "f64":
            return (self.bits >> 52) & 0x7FF == 0x7FF and self.bits & ((1 << 52) - 1) != 0
        return False


def to_bits(t: str, v) -> int:
    if isinstance(v, Value):
        return v.bits
    if t == "i32":
        return int(v) & M32
    if t == "i64":
        return int(v) & M64
    if t == "f32":
        return _bits32(float(v)) if isinstance(v, float) else int(v) & M32
    return _bits64(float(v)) if isinstance(v, float) else int(v) & M64


# ---------------------------------------------------------------- numerics

_pI = struct.Struct("<I").pack
_uI = struct.Struct("<I").unpack
_pQ = struct.Struct("<Q").pack
_uQ = struct.Struct("<Q").unpack
_pf = struct.Struct("<f").pack
_uf = struct.Struct("<f").unpack
_pd = struct.Struct("<d").pack
_ud = struct.Struct("<d").unpack


def _f32(b: int) -> float:
    return _uf(_pI(b))[0]


def _f64(b: int) -> float:
    return _ud(_pQ(b))[0]


def _bits32(x: float) -> int:
    if x != x:
        return F32_NAN
    try:
        return _uI(_pf(x))[0]
    except OverflowError:
        return 0x7F800000 if x > 0 else 0xFF800000


def _bits64(x: float) -> int:
    if x != x:
        return F64_NAN
    return _uQ(_pd(x))[0]


def _s32(a: int) -> int:
    return a - 0x100000000 if a & 0x80000000 else a


def _s64(a: int) -> int:
    return a - 0x10000000000000000 if a & 0x8000000000000000 else a


def _idiv(a: int, b: int) -> int:
    q = abs(a) // abs(b)
    return q if (a < 0) == (b < 0) else -q


def _make_int_ops(bits: int) -> dict[str, Callable]:
    mask = (1 << bits) - 1
    sgn = _s32 if bits == 32 else _s64
    lo = -(1 << (bits - 1))

    def div_s(a, b):
        if b == 0:
            raise Trap("div-zero")
        sa, sb = sgn(a), sgn(b)
        if sa == lo and sb == -1:
            raise Trap("int-overflow")
        return _idiv(sa, sb) & mask

    def div_u(a, b):
        if b == 0:
            raise Trap("div-zero")
        return a // b

    def rem_s(a, b):
        if b == 0:
            raise Trap("div-zero")
        sa, sb = sgn(a), sgn(b)
        if sb == -1:
            return 0
        return (sa - sb * _idiv(sa, sb)) & mask

    def rem_u(a, b):
        if b == 0:
            raise Trap("div-zero")
        return a % b

    def rotl(a, b):
        k = b % bits
        return ((a << k) | (a >> (bits - k))) & mask

    def rotr(a, b):
        k = b % bits
        return ((a >> k) | (a << (bits - k))) & mask

    return {
        "add": lambda a, b: (a + b) & mask,
        "sub": lambda a, b: (a - b) & mask,
        "mul": lambda a, b: (a * b) & mask,
        "div_s": div_s, "div_u": div_u, "rem_s": rem_s, "rem_u": rem_u,
        "and": lambda a, b: a & b,
        "or": lambda a, b: a | b,
        "xor": lambda a, b: a ^ b,
        "shl": lambda a, b: (a << (b % bits)) & mask,
        "shr_s": lambda a, b: (sgn(a) >> (b % bits)) & mask,
        "shr_u": lambda a, b: a >> (b % bits),
        "rotl": rotl, "rotr": rotr,
        "eq": lambda a, b: int(a == b),
        "ne": lambda a, b: int(a != b),
        "lt_s": lambda a, b: int(sgn(a) < sgn(b)),
        "lt_u": lambda a, b: int(a < b),
        "gt_s": lambda a, b: int(sgn(a) > sgn(b)),
        "gt_u": lambda a, b: int(a > b),
        "le_s": lambda a, b: int(sgn(a) <= sgn(b)),
        "le_u": lambda a, b: int(a <= b),
        "ge_s": lambda a, b: int(sgn(a) >= sgn(b)),
        "ge_u": lambda a, b: int(a >= b),
        # unary
        "eqz": lambda a: int(a == 0),
        "clz": lambda a: bits - a.bit_length(),
        "ctz": lambda a: (a & -a).bit_length() - 1 if a else bits,
        "popcnt": lambda a: bin(a).count("1"),
    }


def _round_int_to_f32(n: int) -> float:
    """Correctly rounded (ties-to-even) conversion of an integer to binary32."""
    a = abs(n)
    if a < 1 << 53:
        return float(n)  # exact; the later binary32 rounding is the only rounding
    shift = a.bit_length() - 24
    mant = a >> shift
    rem = a & ((1 << shift) - 1)
    half = 1 << (shift - 1)
    if rem > half or (rem == half and mant & 1):
        mant += 1
    r = float(mant << shift)
    return -r if n < 0 else r


def _make_float_ops(bits: int) -> dict[str, Callable]:
    if bits == 32:
        tof, tob, sign, nan = _f32, _bits32, 0x80000000, F32_NAN
    else:
        tof, tob, sign, nan = _f64, _bits64, 0x8000000000000000, F64_NAN
    absmask = sign - 1

    def arith(fn):
        def go(a, b):
            try:
                return tob(fn(tof(a), tof(b)))
            except ZeroDivisionError:
                x, y = tof(a), tof(b)
                if x != x or x == 0:
                    return nan
                neg = (math.copysign(1, x) < 0) != (math.copysign(1, y) < 0)
                return tob(-math.inf if neg else math.inf)
            except OverflowError:
                return nan
        return go

    def fmin(a, b):
        x, y = tof(a), tof(b)
        if x != x or y != y:
            return nan
        if x == y == 0:
            return a | b  # -0 wins
        return a if x < y else b

    def fmax(a, b):
        x, y = tof(a), tof(b)
        if x != x or y != y:
            return nan
        if x == y == 0:
            return a & b  # +0 wins
        return a if x > y else b

    def rounding(fn):
        def go(a):
            x = tof(a)
            if x != x:
                return nan
            if math.isinf(x) or x == 0:
                return a
            return tob(math.copysign(float(fn(x)), x))
        return go

    def nearest(x):
        return round(x)

    def sqrt(a):
        x = tof(a)
        if x != x or x < 0:
            return nan
        return tob(math.sqrt(x))

    def add(x, y):
        r = x + y
        return r

    def sub(x, y):
        return x - y

    def mul(x, y):
        return x * y

    def div(x, y):
        return x / y

    return {
        "add": arith(add), "sub": arith(sub), "mul": arith(mul), "div": arith(div),
        "min": fmin, "max": fmax,
        "copysign": lambda a, b: (a & absmask) | (b & sign),
        "abs": lambda a: a & absmask,
        "neg": lambda a: a ^ sign,
        "ceil": rounding(math.ceil), "floor": rounding(math.floor),
        "trunc": rounding(math.trunc), "nearest": rounding(nearest),
        "sqrt": sqrt,
        "eq": lambda a, b: int(tof(a) == tof(b)),
        "ne": lambda a, b: int(tof(a) != tof(b)),
        "lt": lambda a, b: int(tof(a) < tof(b)),
        "gt": lambda a, b: int(tof(a) > tof(b)),
        "le": lambda a, b: int(tof(a) <= tof(b)),
        "ge": lambda a, b: int(tof(a) >= tof(b)),
    }


def _trunc(tof, lo: int, hi: int, mask: int):
    def go(a):
        x = tof(a)
        if x != x:
            raise Trap("invalid-conversion")
        if math.isinf(x):
            raise Trap("int-overflow")
        t = math.trunc(x)
        if not lo <= t <= hi:
            raise Trap("int-overflow")
        return t & mask
    return go


def _build_numeric() -> tuple[dict[str, Callable], dict[str, Callable]]:
    binary: dict[str, Callable] = {}
    unary: dict[str, Callable] = {}
    for prefix, ops in (("i32", _make_int_ops(32)), ("i64", _make_int_ops(64)),
                        ("f32", _make_float_ops(32)), ("f64", _make_float_ops(64))):
        for name, fn in ops.items():
            full = f"{prefix}.{name}"
            sig = op.SIGNATURES.get(full)
            if sig is None:
                continue
            (binary if len(sig[0]) == 2 else unary)[full] = fn
    unary.update({
        "i32.wrap_i64": lambda a: a & M32,
        "i64.extend_i32_s": lambda a: _s32(a) & M64,
        "i64.extend_i32_u": lambda a: a,
        "i32.trunc_f32_s": _trunc(_f32, -(1 << 31), (1 << 31) - 1, M32),
        "i32.trunc_f32_u": _trunc(_f32, 0, M32, M32),
        "i32.trunc_f64_s": _trunc(_f64, -(1 << 31), (1 << 31) - 1, M32),
        "i32.trunc_f64_u": _trunc(_f64, 0, M32, M32),
        "i64.trunc_f32_s": _trunc(_f32, -(1 << 63), (1 << 63) - 1, M64),
        "i64.trunc_f32_u": _trunc(_f32, 0, M64, M64),
        "i64.trunc_f64_s": _trunc(_f64, -(1 << 63), (1 << 63) - 1, M64),
        "i64.trunc_f64_u": _trunc(_f64, 0, M64, M64),
        "f32.convert_i32_s": lambda a: _bits32(float(_s32(a))),
        "f32.convert_i32_u": lambda a: _bits32(float(a)),
        "f32.convert_i64_s": lambda a: _bits32(_round_int_to_f32(_s64(a))),
        "f32.convert_i64_u": lambda a: _bits32(_round_int_to_f32(a)),
        "f32.demote_f64": lambda a: _bits32(_f64(a)),
        "f64.convert_i32_s": lambda a: _bits64(float(_s32(a))),
        "f64.convert_i32_u": lambda a: _bits64(float(a)),
        "f64.convert_i64_s": lambda a: _bits64(float(_s64(a))),
        "f64.convert_i64_u": lambda a: _bits64(float(a)),
        "f64.promote_f32": lambda a: _bits64(_f32(a)),
        "i32.reinterpret_f32": lambda a: a,
        "i64.reinterpret_f64": lambda a: a,
        "f32.reinterpret_i32": lambda a: a,
        "f64.reinterpret_i64": lambda a: a,
    })
    return binary, unary


BINARY, UNARY = _build_numeric()
_missing = set(op.SIGNATURES) - set(BINARY) - set(UNARY) - set(op.LOADS) - set(op.STORES) \
    - {"memory.size", "memory.grow", "nop"}
assert not _missing, _missing


# ---------------------------------------------------------------- compiled code

(CONST, LGET, LSET, LTEE, BIN, UN, JMP, JZ, BR, BR_IF_J, BR_IF, BR_TABLE, CALL,
 CALL_IND, RET, DROP, SELECT, GGET, GSET, LOADU, LOADS, STORE, MSIZE, MGROW,
 UNREACH, TRACE_SET, TRACE_TEE) = range(27)


class _Label:
    __slots__ = ("target", "patches", "height", "arity")

    def __init__(self, target, height, arity):
        self.target = target      # pc for loops, None until the end for blocks
        self.patches: list[tuple[list, int]] = []
        self.height = height
        self.arity = arity


def _compile(m: Module, func_index: int, watched: set[int]) -> list[tuple]:
    ft = m.func_type(func_index)
    code: list[list] = []
    func_types = [m.types[t] for t in m.func_type_indices()]

    def target_ref(lab: _Label, ins: list, slot: int) -> None:
        if lab.target is not None:
            ins[slot] = lab.target
        else:
            lab.patches.append((ins, slot))

    def close(lab: _Label) -> None:
        lab.target = len(code)
        for ins, slot in lab.patches:
            ins[slot] = lab.target

    labels: list[_Label] = [_Label(None, 0, len(ft.results))]

    def branch(depth: int, h: int, cond: bool) -> None:
        lab = labels[-1 - depth]
        if h - lab.arity == lab.height:
            ins = [BR_IF_J if cond else JMP, None]
            target_ref(lab, ins, 1)
        else:
            ins = [BR_IF if cond else BR, None, lab.height, lab.arity]
            target_ref(lab, ins, 1)
        code.append(ins)

    def seq(body: list[Instr], h: int) -> Optional[int]:
        for ins in body:
            name = ins.op
            if name in BINARY:
                code.append([BIN, BINARY[name]])
                h -= 1
            elif name == "local.get":
                code.append([LGET, ins.imm])
                h += 1
            elif name == "local.set":
                code.append([TRACE_SET if ins.imm in watched else LSET, ins.imm])
                h -= 1
            elif name == "local.tee":
                code.append([TRACE_TEE if ins.imm in watched else LTEE, ins.imm])
            elif name in ("i32.const", "i64.const", "f32.const", "f64.const"):
                code.append([CONST, to_bits(name[:3], ins.imm)])
                h += 1
            elif name in UNARY:
                code.append([UN, UNARY[name]])
            elif name in op.LOADS:
                t, width, signed = op.LOADS[name]
                if signed:
                    code.append([LOADS, ins.imm[1], width, M32 if t == "i32" else M64])
                else:
                    code.append([LOADU, ins.imm[1], width])
            elif name in op.STORES:
                code.append([STORE, ins.imm[1], op.STORES[name][1]])
                h -= 2
            elif name in ("block", "loop"):
                res = 0 if ins.imm is None else 1
                if name == "loop":
                    lab = _Label(len(code), h, 0)
                else:
                    lab = _Label(None, h, res)
                labels.append(lab)
                seq(ins.body or [], h)
                labels.pop()
                if name == "block":
                    close(lab)
                h = lab.height + res
            elif name == "if":
                res = 0 if ins.imm is None else 1
                h -= 1
                jz = [JZ, None]
                code.append(jz)
                lab = _Label(None, h, res)
                labels.append(lab)
                seq(ins.body or [], h)
                if ins.orelse is not None:
                    jmp = [JMP, None]
                    code.append(jmp)
                    lab.patches.append((jmp, 1))
                    jz[1] = len(code)
                    seq(ins.orelse, h)
                else:
                    lab.patches.append((jz, 1))
                labels.pop()
                close(lab)
                h = h + res
            elif name == "br":
                branch(ins.imm, h, False)
                return None
            elif name == "br_if":
                h -= 1
                branch(ins.imm, h, True)
            elif name == "br_table":
                h -= 1
                targets, default = ins.imm
                entries = []
                for d in list(targets) + [default]:
                    lab = labels[-1 - d]
                    e = [None, lab.height, lab.arity]
                    target_ref(lab, e, 0)
                    entries.append(e)
                code.append([BR_TABLE, entries])
                return None
            elif name == "return":
                code.append([RET])
                return None
            elif name == "unreachable":
                code.append([UNREACH])
                return None
            elif name == "call":
                code.append([CALL, ins.imm])
                f = func_types[ins.imm]
                h += len(f.results) - len(f.params)
            elif name == "call_indirect":
                f = m.types[ins.imm]
                code.append([CALL_IND, f])
                h += len(f.results) - len(f.params) - 1
            elif name == "drop":
                code.append([DROP])
                h -= 1
            elif name == "select":
                code.append([SELECT])
                h -= 2
            elif name == "global.get":
                code.append([GGET, ins.imm])
                h += 1
            elif name == "global.set":
                code.append([GSET, ins.imm])
                h -= 1
            elif name == "memory.size":
                code.append([MSIZE])
                h += 1
            elif name == "memory.grow":
                code.append([MGROW])
            elif name == "nop":
                pass
            else:
                raise ValueError(f"cannot compile {name}")
        return h

    seq(m.body_of(func_index).body, 0)
    close(labels[0])
    code.append([RET])
    out = []
    for ins in code:
        if ins[0] == BR_TABLE:
            out.append((BR_TABLE, [tuple(e) for e in ins[1]]))
        else:
            out.append(tuple(ins))
    return out


# ---------------------------------------------------------------- instances

HostFunc = Callable[[list[int]], Sequence[int]]


@dataclass
class _Func:
    type: FuncType
    code: Optional[list[tuple]] = None
    nlocals: int = 0
    host: Optional[HostFunc] = None
    index: int = 0


@dataclass
class Instance:
    module: Module
    memory: bytearray
    max_pages: int
    table: list[Optional[int]]
    globals: list[int]
    funcs: list[_Func]
    output: list = field(default_factory=list)
    trace: list = field(default_factory=list)
    steps: int = 0

    @property
    def pages(self) -> int:
        return len(self.memory) // PAGE


def auto_stubs(m: Module, output: list) -> dict[int, HostFunc]:
    """Output-capturing stubs for every imported function.

    Each call appends ``(import_index, args)`` to ``output`` and returns zeros.
    """
    stubs: dict[int, HostFunc] = {}
    fi = 0
    for i in m.imports:
        if i.kind != KIND_FUNC:
            continue
        nres = len(m.types[i.desc].results)

        def stub(args, _i=fi, _n=nres):
            output.append((_i, tuple(args)))
            return [0] * _n
        stubs[fi] = stub
        fi += 1
    return stubs


def trap_stub(kind: str = "unreachable") -> HostFunc:
    def stub(args):
        raise Trap(kind)
    return stub


def const_stub(*values: int) -> HostFunc:
    return lambda args: list(values)


def instantiate(m: Module, imports: Optional[dict[int, HostFunc]] = None,
                output: Optional[list] = None, fuel: int = DEFAULT_FUEL,
                watch: Sequence[tuple[int, int]] = ()) -> Instance:
    """Build an instance: memory, table, globals, data/elem initialization, start.

    ``imports`` maps imported-function index to a host callable; if omitted,
    :func:`auto_stubs` is used. ``watch`` lists (function, local) pairs whose
    writes are appended to ``Instance.trace`` as (function, local, value, call depth).
    """
    output = [] if output is None else output
    if imports is None:
        imports = auto_stubs(m, output)
    for i in m.imports:
        if i.kind != KIND_FUNC:
            raise LinkError(f"unsupported import kind {i.kind} for {i.module!r}.{i.name!r}")
    watched: dict[int, set[int]] = {}
    for f, l in watch:
        watched.setdefault(f, set()).add(l)
    funcs: list[_Func] = []
    nimp = m.num_imported_funcs
    for idx, t in enumerate(m.func_type_indices()):
        ft = m.types[t]
        if idx < nimp:
            if idx not in imports:
                raise LinkError(f"no stub for imported function {idx}")
            funcs.append(_Func(ft, host=imports[idx], index=idx))
        else:
            fb = m.body_of(idx)
            funcs.append(_Func(ft, _compile(m, idx, watched.get(idx, set())),
                               len(fb.local_types()), index=idx))
    mems = m.memory_limits()
    memory = bytearray(mems[0].min * PAGE) if mems else bytearray()
    max_pages = (mems[0].max if mems and mems[0].max is not None else 65536) if mems else 0
    tables = m.table_types()
    table: list[Optional[int]] = [None] * (tables[0].limits.min if tables else 0)
    gvals = []
    for g in m.globals:
        gvals.append(_eval_const(g.init, gvals))
    inst = Instance(m, memory, max_pages, table, gvals, funcs, output)
    # MVP instantiation: bounds-check everything, then write
    elem_writes = []
    for seg in m.elems:
        off = _eval_const(seg.offset, gvals)
        if off + len(seg.funcs) > len(table):
            raise Trap("oob")
        elem_writes.append((off, seg.funcs))
    data_writes = []
    for seg in m.data:
        off = _eval_const(seg.offset, gvals)
        if off + len(seg.data) > len(memory):
            raise Trap("oob")
        data_writes.append((off, seg.data))
    for off, fs in elem_writes:
        table[off:off + len(fs)] = fs
    for off, d in data_writes:
        memory[off:off + len(d)] = d
    if m.start is not None:
        _run(inst, m.start, [], fuel)
    return inst


def _eval_const(expr: list[Instr], gvals: list[int]) -> int:
    ins = expr[0]
    if ins.op == "global.get":
        return gvals[ins.imm]
    return to_bits(ins.op[:3], ins.imm)


@dataclass
class Result:
    values: Optional[tuple[Value, ...]] = None
    trap: Optional[str] = None
    fuel_exhausted: bool = False
    steps: int = 0

    @property
    def ok(self) -> bool:
        return self.values is not None


def invoke(inst: Instance, export, args: Sequence = (), fuel: int = DEFAULT_FUEL) -> Result:
    """Call an exported function (by name or function index)."""
    if isinstance(export, int):
        fidx = export
    else:
        fidx = inst.module.export_by_name(export).index
    f = inst.funcs[fidx]
    if len(args) != len(f.type.params):
        raise TypeError(f"expected {len(f.type.params)} arguments, got {len(args)}")
    raw = [to_bits(t, a) for t, a in zip(f.type.params, args)]
    before = inst.steps
    try:
        vals = _run(inst, fidx, raw, fuel)
    except Trap as t:
        return Result(trap=t.kind, steps=inst.steps - before)
    except FuelExhausted:
        return Result(fuel_exhausted=True, steps=inst.steps - before)
    return Result(tuple(Value(t, v) for t, v in zip(f.type.results, vals)),
                  steps=inst.steps - before)


def _run(inst: Instance, fidx: int, args: list[int], fuel: int) -> list[int]:
    funcs = inst.funcs
    f = funcs[fidx]
    if f.host is not None:
        return list(f.host(list(args)))
    mem = inst.memory
    glob = inst.globals
    table = inst.table
    trace = inst.trace
    code = f.code
    nres = len(f.type.results)
    L = list(args) + [0] * f.nlocals
    st: list[int] = []
    frames: list = []
    pc = 0
    n = 0
    limit = fuel
    cur = fidx
    try:
        while True:
            ins = code[pc]
            pc += 1
            n += 1
            o = ins[0]
            if o == LGET:
                st.append(L[ins[1]])
            elif o == CONST:
                st.append(ins[1])
            elif o == BIN:
                b = st.pop()
                st[-1] = ins[1](st[-1], b)
            elif o == LSET:
                L[ins[1]] = st.pop()
            elif o == BR_IF_J:
                if st.pop():
                    pc = ins[1]
                    if n > limit:
                        raise FuelExhausted
            elif o == JMP:
                pc = ins[1]
                if n > limit:
                    raise FuelExhausted
            elif o == LTEE:
                L[ins[1]] = st[-1]
            elif o == UN:
                st[-1] = ins[1](st[-1])
            elif o == JZ:
                if not st.pop():
                    pc = ins[1]
            elif o == CALL or o == CALL_IND:
                if o == CALL:
                    callee = funcs[ins[1]]
                else:
                    i = st.pop()
                    if i >= len(table):
                        raise Trap("undefined-element")
                    t = table[i]
                    if t is None:
                        raise Trap("uninitialized-element")
                    callee = funcs[t]
                    if callee.type != ins[1]:
                        raise Trap("indirect-type-mismatch")
                if n > limit:
                    raise FuelExhausted
                np_ = len(callee.type.params)
                if np_:
                    cargs = st[-np_:]
                    del st[-np_:]
                else:
                    cargs = []
                if callee.host is not None:
                    st.extend(callee.host(cargs))
                    continue
                if len(frames) >= MAX_CALL_DEPTH:
                    raise Trap("stack-exhausted")
                frames.append((code, pc, L, st, nres, cur))
                code = callee.code
                nres = len(callee.type.results)
                cur = callee.index
                L = cargs + [0] * callee.nlocals
                st = []
                pc = 0
            elif o == RET:
                vals = st[len(st) - nres:] if nres else []
                if not frames:
                    return vals
                code, pc, L, st, nres, cur = frames.pop()
                st.extend(vals)
            elif o == LOADU:
                ea = st[-1] + ins[1]
                w = ins[2]
                if ea + w > len(mem):
                    raise Trap("oob")
                st[-1] = int.from_bytes(mem[ea:ea + w], "little")
            elif o == STORE:
                v = st.pop()
                ea = st.pop() + ins[1]
                w = ins[2]
                if ea + w > len(mem):
                    raise Trap("oob")
                mem[ea:ea + w] = (v & ((1 << (8 * w)) - 1)).to_bytes(w, "little")
            elif o == BR or o == BR_IF:
                if o == BR_IF and not st.pop():
                    continue
                a = ins[3]
                h = ins[2]
                if a:
                    vals = st[len(st) - a:]
                    del st[h:]
                    st.extend(vals)
                else:
                    del st[h:]
                pc = ins[1]
                if n > limit:
                    raise FuelExhausted
            elif o == BR_TABLE:
                i = st.pop()
                ents = ins[1]
                tgt, h, a = ents[i] if i < len(ents) - 1 else ents[-1]
                if a:
                    vals = st[len(st) - a:]
                    del st[h:]
                    st.extend(vals)
                else:
                    del st[h:]
                pc = tgt
                if n > limit:
                    raise FuelExhausted
            elif o == DROP:
                st.pop()
            elif o == SELECT:
                c = st.pop()
                b = st.pop()
                if not c:
                    st[-1] = b
            elif o == LOADS:
                ea = st[-1] + ins[1]
                w = ins[2]
                if ea + w > len(mem):
                    raise Trap("oob")
                st[-1] = int.from_bytes(mem[ea:ea + w], "little", signed=True) & ins[3]
            elif o == GGET:
                st.append(glob[ins[1]])
            elif o == GSET:
                glob[ins[1]] = st.pop()
            elif o == MSIZE:
                st.append(len(mem) // PAGE)
            elif o == MGROW:
                delta = st[-1]
                old = len(mem) // PAGE
                if old + delta > inst.max_pages:
                    st[-1] = M32
                else:
                    mem.extend(bytes(delta * PAGE))
                    st[-1] = old
            elif o == UNREACH:
                raise Trap("unreachable")
            elif o == TRACE_SET or o == TRACE_TEE:
                v = st.pop() if o == TRACE_SET else st[-1]
                L[ins[1]] = v
                trace.append((cur, ins[1], v, len(frames)))
            else:  # pragma: no cover
                raise RuntimeError(f"bad compiled opcode {o}")
    finally:
        inst.steps += n


# ---------------------------------------------------------------- differential checking

@dataclass
class Verdict:
    equal: bool
    inconclusive: bool = False
    vector_index: Optional[int] = None
    detail: str = ""

    def __bool__(self) -> bool:
        return self.equal


def _canon(r: Result):
    if r.fuel_exhausted:
        return ("fuel",)
    if r.trap is not None:
        return ("trap", r.trap)
    return ("ok", tuple((v.type, "nan") if v.is_nan() else (v.type, v.bits) for v in r.values))


def _canon_output(out: list):
    return [(i, tuple(a)) for i, a in out]


@dataclass
class RunLog:
    results: list[Result]
    outputs: list[list]
    instantiation_trap: Optional[str] = None

    @property
    def steps(self) -> int:
        return sum(r.steps for r in self.results)


def run_vectors(m: Module, entry, arg_vectors: Sequence[Sequence], fuel: int = DEFAULT_FUEL) -> RunLog:
    """Instantiate once and invoke ``entry`` with each vector in turn.

    Instance state carries over between vectors, identically on both sides of
    a differential comparison.
    """
    output: list = []
    try:
        inst = instantiate(m, output=output, fuel=fuel)
    except Trap as t:
        return RunLog([], [], t.kind)
    results, outputs = [], []
    for args in arg_vectors:
        mark = len(output)
        results.append(invoke(inst, entry, args, fuel))
        outputs.append(output[mark:])
    return RunLog(results, outputs)


def differential_check(orig: Module, obf: Module, entry, arg_vectors: Sequence[Sequence],
                       fuel: int = DEFAULT_FUEL, obf_entry=None,
                       orig_log: Optional[RunLog] = None) -> Verdict:
    """Compare results, trap kinds and captured host output vector by vector."""
    a = orig_log if orig_log is not None else run_vectors(orig, entry, arg_vectors, fuel)
    b = run_vectors(obf, entry if obf_entry is None else obf_entry, arg_vectors, fuel)
    if a.instantiation_trap or b.instantiation_trap:
        if a.instantiation_trap == b.instantiation_trap:
            return Verdict(True)
        return Verdict(False, detail=f"instantiation: {a.instantiation_trap} vs {b.instantiation_trap}")
    for i, (ra, rb) in enumerate(zip(a.results, b.results)):
        if ra.fuel_exhausted or rb.fuel_exhausted:
            return Verdict(False, inconclusive=True, vector_index=i, detail="fuel exhausted")
        ca, cb = _canon(ra), _canon(rb)
        if ca != cb:
            return Verdict(False, vector_index=i, detail=f"{ca} != {cb}")
        oa, ob = _canon_output(a.outputs[i]), _canon_output(b.outputs[i])
        if oa != ob:
            return Verdict(False, vector_index=i, detail=f"output {oa} != {ob}")
    return Verdict(True)
