"""Data-level passes: linear-memory encryption with runtime decrypting accessors,
function-name scrambling and export/import renaming."""

from __future__ import annotations

import copy
import json
import random
import string
from dataclasses import dataclass, field
from typing import Iterable, Optional

from . import opcodes as op
from .binfmt import (
    KIND_MEMORY, FuncBody, FuncType, Instr, Module, const_offset,
)
from .errors import PassError
from .leb128 import LEBError, read_uleb128

PAGE = 65536
ALNUM = string.ascii_letters + string.digits
DEFAULT_ALLOWLIST = frozenset({"memory", "_start"})
PROTECTED_IMPORT_MODULES = frozenset({"wasi_snapshot_preview1", "wasi_unstable", "wasi"})

ROLE_FILL = "mem:key_fill"
ROLE_GROW = "mem:enc_grow"
ROLE_INIT = "mem:init"


# ---------------------------------------------------------------- memory key

@dataclass(frozen=True)
class MemKey:
    """Position-keyed XOR stream: key_byte(a) = keystream[a mod L]."""
    keystream: bytes

    def __post_init__(self):
        if not self.keystream:
            raise PassError("keystream must not be empty")
        if not any(self.keystream):
            raise PassError("keystream must not be all zero")

    @classmethod
    def from_seed(cls, seed: int, length: int = 8) -> "MemKey":
        rng = random.Random(seed)
        while True:
            ks = bytes(rng.getrandbits(8) for _ in range(length))
            if any(ks):
                return cls(ks)

    @property
    def length(self) -> int:
        return len(self.keystream)

    def key_byte(self, addr: int) -> int:
        return self.keystream[addr % len(self.keystream)]

    def apply(self, data: bytes, addr: int) -> bytes:
        return bytes(b ^ self.key_byte(addr + i) for i, b in enumerate(data))

    def pattern(self) -> int:
        """The key bytes for an 8-aligned address as a little-endian u64."""
        if 8 % self.length:
            raise PassError(f"keystream length {self.length} must divide 8")
        return int.from_bytes((self.keystream * (8 // self.length)), "little")


@dataclass(frozen=True)
class MemAccessSpec:
    opcode: str
    type: str
    len: int        # access width in bits
    signed: bool
    store: bool

    @classmethod
    def of(cls, opcode: str) -> "MemAccessSpec":
        if opcode in op.LOADS:
            t, w, s = op.LOADS[opcode]
            return cls(opcode, t, w * 8, s, False)
        if opcode in op.STORES:
            t, w = op.STORES[opcode]
            return cls(opcode, t, w * 8, False, True)
        raise PassError(f"{opcode} is not a memory access")


def _i32(v: int) -> int:
    v &= 0xFFFFFFFF
    return v - (1 << 32) if v >> 31 else v


def _i64(v: int) -> int:
    v &= (1 << 64) - 1
    return v - (1 << 64) if v >> 63 else v


# ---------------------------------------------------------------- segment encryption

def _segment_layout(m: Module) -> list[tuple[int, int]]:
    """(start, end) of every data segment; refuses dynamic or overlapping layouts."""
    spans = []
    for i, seg in enumerate(m.data):
        off = const_offset(seg.offset)
        if off is None:
            raise PassError(f"data segment {i} has a non-constant offset")
        spans.append((off, off + len(seg.data)))
    ordered = sorted(s for s in spans if s[0] != s[1])
    for (a0, a1), (b0, b1) in zip(ordered, ordered[1:]):
        if b0 < a1:
            raise PassError(f"overlapping data segments at {b0:#x}")
    return spans


def encrypt_data_segments(m: Module, key: MemKey) -> Module:
    """XOR every data byte at absolute address a with key_byte(a)."""
    _segment_layout(m)
    m = copy.deepcopy(m)
    for seg in m.data:
        seg.data = key.apply(seg.data, const_offset(seg.offset))
    return m


# ---------------------------------------------------------------- helper synthesis

def _ea_prologue(base: int, off: int, ea: int) -> list[Instr]:
    # ea = base + off; on 32-bit overflow force the out-of-bounds trap the
    # original 33-bit effective address would have raised
    return [
        Instr("local.get", base), Instr("local.get", off), Instr("i32.add"), Instr("local.tee", ea),
        Instr("local.get", base), Instr("i32.lt_u"),
        Instr("if", None, [Instr("i32.const", -1), Instr("i32.load8_u", (0, 0xFFFFFFFF)), Instr("drop")]),
    ]


def _key_at(key: MemKey, ea: int) -> list[Instr]:
    return [
        Instr("i64.const", _i64(key.pattern())),
        Instr("local.get", ea), Instr("i64.extend_i32_u"), Instr("i64.const", 3), Instr("i64.shl"),
        Instr("i64.rotr"),
    ]


_RAW_LOAD = {1: "i64.load8_u", 2: "i64.load16_u", 4: "i64.load32_u", 8: "i64.load"}
_RAW_STORE = {1: "i64.store8", 2: "i64.store16", 4: "i64.store32", 8: "i64.store"}


def _load_helper(spec: MemAccessSpec, key: MemKey) -> tuple[FuncType, FuncBody]:
    w = spec.len // 8
    base, off, ea = 0, 1, 2
    body = _ea_prologue(base, off, ea)
    body += [Instr("local.get", ea), Instr(_RAW_LOAD[w], (0, 0))]
    body += _key_at(key, ea)
    if w < 8:
        body += [Instr("i64.const", (1 << spec.len) - 1), Instr("i64.and")]
    body.append(Instr("i64.xor"))
    if spec.type in ("i32", "f32"):
        body.append(Instr("i32.wrap_i64"))
        if spec.signed and spec.len < 32:
            body += [Instr("i32.const", 32 - spec.len), Instr("i32.shl"),
                     Instr("i32.const", 32 - spec.len), Instr("i32.shr_s")]
        if spec.type == "f32":
            body.append(Instr("f32.reinterpret_i32"))
    else:
        if spec.signed and spec.len < 64:
            body += [Instr("i64.const", 64 - spec.len), Instr("i64.shl"),
                     Instr("i64.const", 64 - spec.len), Instr("i64.shr_s")]
        if spec.type == "f64":
            body.append(Instr("f64.reinterpret_i64"))
    return FuncType(("i32", "i32"), (spec.type,)), FuncBody([(1, "i32")], body)


def _store_helper(spec: MemAccessSpec, key: MemKey) -> tuple[FuncType, FuncBody]:
    w = spec.len // 8
    base, val, off, ea = 0, 1, 2, 3
    body = _ea_prologue(base, off, ea)
    body += [Instr("local.get", ea), Instr("local.get", val)]
    body += {
        "i32": [Instr("i64.extend_i32_u")],
        "f32": [Instr("i32.reinterpret_f32"), Instr("i64.extend_i32_u")],
        "f64": [Instr("i64.reinterpret_f64")],
        "i64": [],
    }[spec.type]
    body += _key_at(key, ea)
    body += [Instr("i64.xor"), Instr(_RAW_STORE[w], (0, 0))]
    return FuncType(("i32", spec.type, "i32"), ()), FuncBody([(1, "i32")], body)


def _key_fill(key: MemKey) -> tuple[FuncType, FuncBody]:
    # (start, end), both 8-aligned: write the key pattern over [start, end);
    # the equality test also terminates when end wraps to 0 at 4 GiB
    body = [Instr("block", None, [Instr("loop", None, [
        Instr("local.get", 0), Instr("local.get", 1), Instr("i32.eq"), Instr("br_if", 1),
        Instr("local.get", 0), Instr("i64.const", _i64(key.pattern())), Instr("i64.store", (3, 0)),
        Instr("local.get", 0), Instr("i32.const", 8), Instr("i32.add"), Instr("local.set", 0),
        Instr("br", 0),
    ])])]
    return FuncType(("i32", "i32"), ()), FuncBody([], body)


def _enc_grow(fill: int) -> tuple[FuncType, FuncBody]:
    body = [
        Instr("local.get", 0), Instr("memory.grow"), Instr("local.tee", 1),
        Instr("i32.const", -1), Instr("i32.ne"),
        Instr("if", None, [
            Instr("local.get", 1), Instr("i32.const", 16), Instr("i32.shl"),
            Instr("local.get", 1), Instr("local.get", 0), Instr("i32.add"),
            Instr("i32.const", 16), Instr("i32.shl"),
            Instr("call", fill),
        ]),
        Instr("local.get", 1),
    ]
    return FuncType(("i32",), ("i32",)), FuncBody([(1, "i32")], body)


def _gaps(spans: Iterable[tuple[int, int]], size: int) -> list[tuple[int, int]]:
    out, pos = [], 0
    for s, e in sorted(spans):
        s, e = min(s, size), min(e, size)
        if s > pos:
            out.append((pos, s))
        pos = max(pos, e)
    if pos < size:
        out.append((pos, size))
    return out


def _init_body(key: MemKey, gaps: list[tuple[int, int]], fill: int,
               start: Optional[int]) -> list[Instr]:
    body: list[Instr] = []

    def byte(a: int) -> None:
        body.extend([Instr("i32.const", _i32(a)), Instr("i32.const", key.key_byte(a)),
                     Instr("i32.store8", (0, 0))])

    for g0, g1 in gaps:
        a0 = min(-(-g0 // 8) * 8, g1)
        a1 = max(g1 // 8 * 8, a0)
        for a in range(g0, a0):
            byte(a)
        if a1 > a0:
            body += [Instr("i32.const", _i32(a0)), Instr("i32.const", _i32(a1)), Instr("call", fill)]
        for a in range(a1, g1):
            byte(a)
    if start is not None:
        body.append(Instr("call", start))
    return body


def _memory_ops(m: Module) -> list[str]:
    from .binfmt import walk
    seen: dict[str, None] = {}
    for fi in m.defined_indices():
        if fi in m.injected:
            continue
        for ins in walk(m.body_of(fi).body):
            if ins.op in op.LOADS or ins.op in op.STORES or ins.op == "memory.grow":
                seen.setdefault(ins.op)
    return sorted(seen)


def _check_memory(m: Module) -> None:
    if any(i.kind == KIND_MEMORY for i in m.imports):
        raise PassError("memory obfuscation does not support imported memory")
    if len(m.memory_limits()) > 1:
        raise PassError("memory obfuscation supports a single memory")


def synthesize_mem_helpers(m: Module, key: MemKey) -> tuple[Module, dict[str, int]]:
    """Add accessor helpers for every memory opcode in use, plus key-fill support.

    Returns the new module and a map opcode -> helper function index
    (``memory.grow`` maps to the growing wrapper). A start function that
    key-fills all initial memory not covered by data segments is installed.
    """
    _check_memory(m)
    if not m.memory_limits():
        return copy.deepcopy(m), {}
    spans = _segment_layout(m)
    used = _memory_ops(m)
    m = copy.deepcopy(m)
    helpers: dict[str, int] = {}
    fill = m.add_function(*_key_fill(key), role=ROLE_FILL)
    for name in used:
        if name == "memory.grow":
            helpers[name] = m.add_function(*_enc_grow(fill), role=ROLE_GROW)
            continue
        spec = MemAccessSpec.of(name)
        ft, fb = _store_helper(spec, key) if spec.store else _load_helper(spec, key)
        helpers[name] = m.add_function(ft, fb, role=f"mem:{name}")
    size = m.memory_limits()[0].min * PAGE
    init = _init_body(key, _gaps(spans, size), fill, m.start)
    m.start = m.add_function(FuncType(), FuncBody([], init), role=ROLE_INIT)
    return m, helpers


def rewrite_mem_instructions(m: Module, helpers: dict[str, int]) -> Module:
    """Replace each load/store by ``i32.const offset; call helper`` (and grow by its wrapper)."""
    m = copy.deepcopy(m)

    def rewrite(body: list[Instr]) -> list[Instr]:
        out: list[Instr] = []
        for ins in body:
            if ins.body is not None:
                ins.body = rewrite(ins.body)
                if ins.orelse is not None:
                    ins.orelse = rewrite(ins.orelse)
                out.append(ins)
            elif ins.op in op.LOADS or ins.op in op.STORES:
                if ins.op not in helpers:
                    raise PassError(f"no helper synthesized for {ins.op}")
                out += [Instr("i32.const", _i32(ins.imm[1])), Instr("call", helpers[ins.op])]
            elif ins.op == "memory.grow":
                if ins.op not in helpers:
                    raise PassError("no wrapper synthesized for memory.grow")
                out.append(Instr("call", helpers[ins.op]))
            else:
                out.append(ins)
        return out

    for fi in m.defined_indices():
        if fi in m.injected:
            continue
        fb = m.body_of(fi)
        fb.body = rewrite(fb.body)
    return m


def obfuscate_memory(m: Module, key: MemKey, stats: Optional[dict] = None) -> Module:
    """Encrypt data segments and route every memory access through decrypting helpers."""
    _check_memory(m)
    if not m.memory_limits():
        if stats is not None:
            stats["memory_helpers"] = 0
        return copy.deepcopy(m)
    m2, helpers = synthesize_mem_helpers(m, key)
    m2 = rewrite_mem_instructions(m2, helpers)
    m2 = encrypt_data_segments(m2, key)
    if stats is not None:
        stats["memory_helpers"] = len(helpers)
    return m2


# ---------------------------------------------------------------- renaming

@dataclass
class RenameEntry:
    space: str          # funcname | export | import
    index: int
    original: bytes
    renamed: bytes

    def as_dict(self) -> dict:
        return {"space": self.space, "index": self.index,
                "original": self.original.decode("utf-8", "backslashreplace"),
                "renamed": self.renamed.decode("utf-8", "backslashreplace")}


@dataclass
class RenameMap:
    entries: list[RenameEntry] = field(default_factory=list)

    def add(self, space: str, index: int, original: bytes, renamed: bytes) -> None:
        self.entries.append(RenameEntry(space, index, original, renamed))

    def extend(self, other: "RenameMap") -> None:
        self.entries.extend(other.entries)

    def renamed(self, space: str) -> dict[bytes, bytes]:
        return {e.original: e.renamed for e in self.entries if e.space == space}

    def to_json(self) -> str:
        return json.dumps([e.as_dict() for e in self.entries], indent=2)

    def __len__(self) -> int:
        return len(self.entries)


def random_name(rng: random.Random, n: int) -> bytes:
    return "".join(rng.choice(ALNUM) for _ in range(n)).encode()


def _fresh(rng: random.Random, n: int, avoid: set[bytes], tries: int = 1000) -> bytes:
    for _ in range(tries):
        s = random_name(rng, n)
        if s not in avoid:
            return s
    raise PassError(f"could not draw a fresh name of length {n}")


def _name_spans(raw: bytes) -> list[tuple[int, int, int]]:
    """(function index, start, end) byte ranges of each name in the function-name subsection."""
    pos, spans = 0, []
    try:
        while pos < len(raw):
            sid = raw[pos]
            size, body = read_uleb128(raw, pos + 1, 32)
            end = body + size
            if end > len(raw):
                raise PassError("name subsection overruns section")
            if sid == 1:
                count, p = read_uleb128(raw, body, 32)
                for _ in range(count):
                    idx, p = read_uleb128(raw, p, 32)
                    n, p = read_uleb128(raw, p, 32)
                    if p + n > end:
                        raise PassError("function name overruns subsection")
                    spans.append((idx, p, p + n))
                    p += n
            pos = end
    except LEBError as exc:
        raise PassError(f"malformed name section: {exc}") from None
    return spans


def obfuscate_function_names(m: Module, rng: random.Random) -> tuple[Module, RenameMap]:
    """Replace every function name with a random alphanumeric string of equal length.

    Names are overwritten in place, so every length field and the encoded
    size of the module stay unchanged.
    """
    rmap = RenameMap()
    sec = next((c for c in m.customs if c.name == b"name"), None)
    if sec is None:
        return copy.deepcopy(m), rmap
    m = copy.deepcopy(m)
    sec = next(c for c in m.customs if c.name == b"name")
    raw = bytearray(sec.data)
    spans = _name_spans(bytes(raw))
    taken = {bytes(raw[s:e]) for _, s, e in spans}
    for idx, s, e in spans:
        old = bytes(raw[s:e])
        if not old:
            continue
        new = _fresh(rng, e - s, taken | {old}, tries=200) if e - s > 1 else _fresh(rng, 1, {old})
        taken.add(new)
        raw[s:e] = new
        rmap.add("funcname", idx, old, new)
    sec.data = bytes(raw)
    return m, rmap


def obfuscate_exports(m: Module, rng: random.Random,
                      allowlist: Iterable[str] = DEFAULT_ALLOWLIST,
                      rename_imports: bool = False,
                      protected: Iterable[str] = PROTECTED_IMPORT_MODULES) -> tuple[Module, RenameMap]:
    """Rename exports (and optionally imports) to random strings of length 8-16."""
    allowed = {a.encode() if isinstance(a, str) else a for a in allowlist}
    prot = {p.encode() if isinstance(p, str) else p for p in protected}
    m = copy.deepcopy(m)
    rmap = RenameMap()
    taken = {e.name for e in m.exports}
    for i, e in enumerate(m.exports):
        if e.name in allowed:
            continue
        new = _fresh(rng, rng.randint(8, 16), taken)
        taken.add(new)
        rmap.add("export", i, e.name, new)
        e.name = new
    if rename_imports:
        seen = {(i.module, i.name) for i in m.imports}
        for i, imp in enumerate(m.imports):
            if imp.module in prot:
                continue
            new = _fresh(rng, rng.randint(8, 16), {n for mod, n in seen if mod == imp.module})
            seen.add((imp.module, new))
            rmap.add("import", i, imp.name, new)
            imp.name = new
    return m, rmap
