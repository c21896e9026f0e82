"""MVP opcode table: byte values, immediate kinds and stack signatures."""

from __future__ import annotations

I32, I64, F32, F64 = "i32", "i64", "f32", "f64"

VALTYPE_BYTES = {0x7F: I32, 0x7E: I64, 0x7D: F32, 0x7C: F64}
VALTYPE_CODES = {v: k for k, v in VALTYPE_BYTES.items()}
BLOCKTYPE_EMPTY = 0x40
FUNCREF = 0x70

# immediate kinds
NONE = "none"
BLOCK = "block"      # blocktype
LABEL = "label"      # u32 relative depth
BR_TABLE = "br_table"
FUNC = "func"
CALL_IND = "call_indirect"
LOCAL = "local"
GLOBAL = "global"
MEMARG = "memarg"
MEMIDX = "memidx"    # reserved 0x00 byte
CONST_I32 = "i32"
CONST_I64 = "i64"
CONST_F32 = "f32"
CONST_F64 = "f64"

_CONTROL = [
    (0x00, "unreachable", NONE),
    (0x01, "nop", NONE),
    (0x02, "block", BLOCK),
    (0x03, "loop", BLOCK),
    (0x04, "if", BLOCK),
    (0x0C, "br", LABEL),
    (0x0D, "br_if", LABEL),
    (0x0E, "br_table", BR_TABLE),
    (0x0F, "return", NONE),
    (0x10, "call", FUNC),
    (0x11, "call_indirect", CALL_IND),
    (0x1A, "drop", NONE),
    (0x1B, "select", NONE),
    (0x20, "local.get", LOCAL),
    (0x21, "local.set", LOCAL),
    (0x22, "local.tee", LOCAL),
    (0x23, "global.get", GLOBAL),
    (0x24, "global.set", GLOBAL),
    (0x3F, "memory.size", MEMIDX),
    (0x40, "memory.grow", MEMIDX),
    (0x41, "i32.const", CONST_I32),
    (0x42, "i64.const", CONST_I64),
    (0x43, "f32.const", CONST_F32),
    (0x44, "f64.const", CONST_F64),
]

# name -> (value type, access width in bytes, signed)
LOADS = {
    "i32.load": (I32, 4, False),
    "i64.load": (I64, 8, False),
    "f32.load": (F32, 4, False),
    "f64.load": (F64, 8, False),
    "i32.load8_s": (I32, 1, True),
    "i32.load8_u": (I32, 1, False),
    "i32.load16_s": (I32, 2, True),
    "i32.load16_u": (I32, 2, False),
    "i64.load8_s": (I64, 1, True),
    "i64.load8_u": (I64, 1, False),
    "i64.load16_s": (I64, 2, True),
    "i64.load16_u": (I64, 2, False),
    "i64.load32_s": (I64, 4, True),
    "i64.load32_u": (I64, 4, False),
}
STORES = {
    "i32.store": (I32, 4),
    "i64.store": (I64, 8),
    "f32.store": (F32, 4),
    "f64.store": (F64, 8),
    "i32.store8": (I32, 1),
    "i32.store16": (I32, 2),
    "i64.store8": (I64, 1),
    "i64.store16": (I64, 2),
    "i64.store32": (I64, 4),
}
_MEM_BYTES = dict(zip(list(LOADS) + list(STORES), range(0x28, 0x3F)))

# numeric ops as (byte, name, params, results)
_NUMERIC: list[tuple[int, str, tuple[str, ...], tuple[str, ...]]] = []


def _group(start: int, prefix: str, names: str, params: tuple, results: tuple) -> None:
    for i, n in enumerate(names.split()):
        _NUMERIC.append((start + i, f"{prefix}.{n}", params, results))


_group(0x45, I32, "eqz", (I32,), (I32,))
_group(0x46, I32, "eq ne lt_s lt_u gt_s gt_u le_s le_u ge_s ge_u", (I32, I32), (I32,))
_group(0x50, I64, "eqz", (I64,), (I32,))
_group(0x51, I64, "eq ne lt_s lt_u gt_s gt_u le_s le_u ge_s ge_u", (I64, I64), (I32,))
_group(0x5B, F32, "eq ne lt gt le ge", (F32, F32), (I32,))
_group(0x61, F64, "eq ne lt gt le ge", (F64, F64), (I32,))
_group(0x67, I32, "clz ctz popcnt", (I32,), (I32,))
_group(0x6A, I32, "add sub mul div_s div_u rem_s rem_u and or xor shl shr_s shr_u rotl rotr",
       (I32, I32), (I32,))
_group(0x79, I64, "clz ctz popcnt", (I64,), (I64,))
_group(0x7C, I64, "add sub mul div_s div_u rem_s rem_u and or xor shl shr_s shr_u rotl rotr",
       (I64, I64), (I64,))
_group(0x8B, F32, "abs neg ceil floor trunc nearest sqrt", (F32,), (F32,))
_group(0x92, F32, "add sub mul div min max copysign", (F32, F32), (F32,))
_group(0x99, F64, "abs neg ceil floor trunc nearest sqrt", (F64,), (F64,))
_group(0xA0, F64, "add sub mul div min max copysign", (F64, F64), (F64,))

for _b, _n, _p, _r in [
    (0xA7, "i32.wrap_i64", I64, I32),
    (0xA8, "i32.trunc_f32_s", F32, I32),
    (0xA9, "i32.trunc_f32_u", F32, I32),
    (0xAA, "i32.trunc_f64_s", F64, I32),
    (0xAB, "i32.trunc_f64_u", F64, I32),
    (0xAC, "i64.extend_i32_s", I32, I64),
    (0xAD, "i64.extend_i32_u", I32, I64),
    (0xAE, "i64.trunc_f32_s", F32, I64),
    (0xAF, "i64.trunc_f32_u", F32, I64),
    (0xB0, "i64.trunc_f64_s", F64, I64),
    (0xB1, "i64.trunc_f64_u", F64, I64),
    (0xB2, "f32.convert_i32_s", I32, F32),
    (0xB3, "f32.convert_i32_u", I32, F32),
    (0xB4, "f32.convert_i64_s", I64, F32),
    (0xB5, "f32.convert_i64_u", I64, F32),
    (0xB6, "f32.demote_f64", F64, F32),
    (0xB7, "f64.convert_i32_s", I32, F64),
    (0xB8, "f64.convert_i32_u", I32, F64),
    (0xB9, "f64.convert_i64_s", I64, F64),
    (0xBA, "f64.convert_i64_u", I64, F64),
    (0xBB, "f64.promote_f32", F32, F64),
    (0xBC, "i32.reinterpret_f32", F32, I32),
    (0xBD, "i64.reinterpret_f64", F64, I64),
    (0xBE, "f32.reinterpret_i32", I32, F32),
    (0xBF, "f64.reinterpret_i64", I64, F64),
]:
    _NUMERIC.append((_b, _n, (_p,), (_r,)))

# name -> (params, results) for every op whose stack effect is fixed
SIGNATURES: dict[str, tuple[tuple[str, ...], tuple[str, ...]]] = {
    n: (p, r) for _, n, p, r in _NUMERIC
}
for _n, (_t, _w, _s) in LOADS.items():
    SIGNATURES[_n] = ((I32,), (_t,))
for _n, (_t, _w) in STORES.items():
    SIGNATURES[_n] = ((I32, _t), ())
SIGNATURES["memory.size"] = ((), (I32,))
SIGNATURES["memory.grow"] = ((I32,), (I32,))
SIGNATURES["nop"] = ((), ())

OPCODES: dict[int, tuple[str, str]] = {}
for _b, _n, _k in _CONTROL:
    OPCODES[_b] = (_n, _k)
for _n, _b in _MEM_BYTES.items():
    OPCODES[_b] = (_n, MEMARG)
for _b, _n, _p, _r in _NUMERIC:
    OPCODES[_b] = (_n, NONE)

BY_NAME: dict[str, tuple[int, str]] = {n: (b, k) for b, (n, k) in OPCODES.items()}

# natural alignment exponent for each memory op
NATURAL_ALIGN = {n: (w.bit_length() - 1) for n, (_, w, _) in LOADS.items()}
NATURAL_ALIGN.update({n: (w.bit_length() - 1) for n, (_, w) in STORES.items()})

STRUCTURED = ("block", "loop", "if")
OP_END = 0x0B
OP_ELSE = 0x05
