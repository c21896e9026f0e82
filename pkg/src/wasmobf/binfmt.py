"""Decoder/encoder between WebAssembly core v1 binaries and a structured IR.

Instruction bodies are kept nested: ``block``/``loop``/``if`` carry their
bodies in ``Instr.body`` (and ``Instr.orelse`` for an ``else`` arm); the
terminating ``end`` is implicit.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Optional

from . import opcodes as op
from .leb128 import LEBError, read_sleb128, read_uleb128, write_sleb128, write_uleb128

MAGIC = b"\x00asm"
VERSION = b"\x01\x00\x00\x00"

SEC_CUSTOM, SEC_TYPE, SEC_IMPORT, SEC_FUNCTION, SEC_TABLE, SEC_MEMORY = 0, 1, 2, 3, 4, 5
SEC_GLOBAL, SEC_EXPORT, SEC_START, SEC_ELEM, SEC_CODE, SEC_DATA = 6, 7, 8, 9, 10, 11

KIND_FUNC, KIND_TABLE, KIND_MEMORY, KIND_GLOBAL = 0, 1, 2, 3


class DecodeError(ValueError):
    def __init__(self, msg: str, offset: int | None = None, opcode: int | None = None,
                 func_index: int | None = None):
        self.offset = offset
        self.opcode = opcode
        self.func_index = func_index
        where = []
        if func_index is not None:
            where.append(f"function {func_index}")
        if offset is not None:
            where.append(f"offset {offset:#x}")
        super().__init__(f"{msg} ({', '.join(where)})" if where else msg)


class EncodeError(ValueError):
    pass


# ---------------------------------------------------------------- IR types

@dataclass
class Instr:
    op: str
    imm: Any = None
    body: Optional[list["Instr"]] = None
    orelse: Optional[list["Instr"]] = None

    def __repr__(self) -> str:
        parts = [self.op]
        if self.imm is not None:
            parts.append(repr(self.imm))
        if self.body is not None:
            parts.append(f"body={self.body!r}")
        if self.orelse is not None:
            parts.append(f"else={self.orelse!r}")
        return f"Instr({', '.join(parts)})"


@dataclass(frozen=True)
class FuncType:
    params: tuple[str, ...] = ()
    results: tuple[str, ...] = ()


@dataclass
class Limits:
    min: int
    max: Optional[int] = None


@dataclass
class TableType:
    elem_type: int = op.FUNCREF
    limits: Limits = field(default_factory=lambda: Limits(0))


@dataclass
class GlobalType:
    valtype: str
    mutable: bool = False


@dataclass
class Import:
    module: bytes
    name: bytes
    kind: int
    desc: Any  # type index | TableType | Limits | GlobalType


@dataclass
class Global:
    type: GlobalType
    init: list[Instr]


@dataclass
class Export:
    name: bytes
    kind: int
    index: int


@dataclass
class ElemSegment:
    table: int
    offset: list[Instr]
    funcs: list[int]


@dataclass
class FuncBody:
    locals: list[tuple[int, str]] = field(default_factory=list)
    body: list[Instr] = field(default_factory=list)

    def local_types(self) -> list[str]:
        out: list[str] = []
        for n, t in self.locals:
            out.extend([t] * n)
        return out


@dataclass
class DataSegment:
    memory: int
    offset: list[Instr]
    data: bytes


@dataclass
class CustomSection:
    name: bytes
    data: bytes
    # id of the last non-custom section emitted before this one (0 = none);
    # placement only, so it does not take part in equality
    after: int = field(default=0, compare=False)


@dataclass
class Module:
    types: list[FuncType] = field(default_factory=list)
    imports: list[Import] = field(default_factory=list)
    functions: list[int] = field(default_factory=list)
    tables: list[TableType] = field(default_factory=list)
    memories: list[Limits] = field(default_factory=list)
    globals: list[Global] = field(default_factory=list)
    exports: list[Export] = field(default_factory=list)
    start: Optional[int] = None
    elems: list[ElemSegment] = field(default_factory=list)
    code: list[FuncBody] = field(default_factory=list)
    data: list[DataSegment] = field(default_factory=list)
    customs: list[CustomSection] = field(default_factory=list)
    # function index -> role for functions added by obfuscation passes; not serialized
    injected: dict[int, str] = field(default_factory=dict, compare=False, repr=False)

    @property
    def num_imported_funcs(self) -> int:
        return sum(1 for i in self.imports if i.kind == KIND_FUNC)

    def func_type_indices(self) -> list[int]:
        """Type index of every function in the function index space."""
        return [i.desc for i in self.imports if i.kind == KIND_FUNC] + list(self.functions)

    def func_type(self, func_index: int) -> FuncType:
        return self.types[self.func_type_indices()[func_index]]

    def global_types(self) -> list[GlobalType]:
        return [i.desc for i in self.imports if i.kind == KIND_GLOBAL] + [g.type for g in self.globals]

    def table_types(self) -> list[TableType]:
        return [i.desc for i in self.imports if i.kind == KIND_TABLE] + list(self.tables)

    def memory_limits(self) -> list[Limits]:
        return [i.desc for i in self.imports if i.kind == KIND_MEMORY] + list(self.memories)

    def body_of(self, func_index: int) -> FuncBody:
        return self.code[func_index - self.num_imported_funcs]

    def add_type(self, ft: FuncType) -> int:
        try:
            return self.types.index(ft)
        except ValueError:
            self.types.append(ft)
            return len(self.types) - 1

    def add_function(self, ft: FuncType, body: FuncBody, role: Optional[str] = None) -> int:
        self.functions.append(self.add_type(ft))
        self.code.append(body)
        idx = self.num_imported_funcs + len(self.functions) - 1
        if role is not None:
            self.injected[idx] = role
        return idx

    def injected_index(self, role: str) -> Optional[int]:
        for idx, r in self.injected.items():
            if r == role:
                return idx
        return None

    def defined_indices(self) -> range:
        base = self.num_imported_funcs
        return range(base, base + len(self.functions))

    def export_by_name(self, name: bytes | str) -> Export:
        if isinstance(name, str):
            name = name.encode()
        for e in self.exports:
            if e.name == name:
                return e
        raise KeyError(name)


def add_local(fb: FuncBody, valtype: str, num_params: int) -> int:
    """Append one local of ``valtype`` and return its index."""
    idx = num_params + sum(n for n, _ in fb.locals)
    if fb.locals and fb.locals[-1][1] == valtype:
        n, t = fb.locals[-1]
        fb.locals[-1] = (n + 1, t)
    else:
        fb.locals.append((1, valtype))
    return idx


def const_offset(expr: list[Instr]) -> Optional[int]:
    """The unsigned value of a constant ``i32.const`` offset expression, else None."""
    if len(expr) == 1 and expr[0].op == "i32.const":
        return expr[0].imm & 0xFFFFFFFF
    return None


def walk(body: list[Instr]):
    """Yield every instruction in ``body`` in pre-order, descending into nested bodies."""
    for ins in body:
        yield ins
        if ins.body is not None:
            yield from walk(ins.body)
        if ins.orelse is not None:
            yield from walk(ins.orelse)


# ---------------------------------------------------------------- name section

@dataclass
class NameEntry:
    index: int
    name: bytes

    @property
    def name_len(self) -> int:
        return len(self.name)


@dataclass
class NameData:
    """Function-name subsection of the ``name`` custom section.

    Subsections other than id 1 are kept verbatim in ``prefix``/``suffix``.
    """
    entries: list[NameEntry] = field(default_factory=list)
    prefix: bytes = b""
    suffix: bytes = b""

    @property
    def count(self) -> int:
        return len(self.entries)

    @property
    def section_len(self) -> int:
        return len(self._payload())

    def _payload(self) -> bytes:
        out = bytearray(write_uleb128(len(self.entries)))
        for e in self.entries:
            out += write_uleb128(e.index)
            out += write_uleb128(len(e.name))
            out += e.name
        return bytes(out)


def _subsections(raw: bytes):
    pos = 0
    while pos < len(raw):
        start = pos
        sid = raw[pos]
        size, pos = read_uleb128(raw, pos + 1, 32)
        if pos + size > len(raw):
            raise DecodeError("name subsection overruns section", offset=start)
        yield sid, start, pos, pos + size
        pos += size


def parse_name_section(raw: bytes) -> NameData:
    """Parse the contents of a ``name`` custom section (without the section name)."""
    nd = NameData()
    found = False
    try:
        for sid, start, body, end in _subsections(raw):
            if sid != 1:
                if found:
                    nd.suffix += raw[start:end]
                else:
                    nd.prefix += raw[start:end]
                continue
            if found:
                raise DecodeError("duplicate function-name subsection", offset=start)
            found = True
            count, pos = read_uleb128(raw, body, 32)
            for _ in range(count):
                idx, pos = read_uleb128(raw, pos, 32)
                n, pos = read_uleb128(raw, pos, 32)
                if pos + n > end:
                    raise DecodeError("function name overruns subsection", offset=pos)
                nd.entries.append(NameEntry(idx, raw[pos:pos + n]))
                pos += n
            if pos != end:
                raise DecodeError("function-name subsection length mismatch", offset=pos)
    except LEBError as exc:
        raise DecodeError(f"malformed name section: {exc}") from None
    if not found:
        raise DecodeError("name section has no function-name subsection")
    return nd


def encode_name_section(nd: NameData) -> bytes:
    payload = nd._payload()
    return nd.prefix + b"\x01" + write_uleb128(len(payload)) + payload + nd.suffix


def get_name_data(m: Module) -> Optional[NameData]:
    for c in m.customs:
        if c.name == b"name":
            try:
                return parse_name_section(c.data)
            except DecodeError:
                return None
    return None


def set_name_data(m: Module, nd: NameData) -> None:
    for c in m.customs:
        if c.name == b"name":
            c.data = encode_name_section(nd)
            return
    m.customs.append(CustomSection(b"name", encode_name_section(nd), after=SEC_DATA))


# ---------------------------------------------------------------- decoding

class _Reader:
    __slots__ = ("data", "pos", "func_index")

    def __init__(self, data: bytes, pos: int = 0):
        self.data = data
        self.pos = pos
        self.func_index: Optional[int] = None

    def error(self, msg: str, opcode: int | None = None) -> DecodeError:
        return DecodeError(msg, offset=self.pos, opcode=opcode, func_index=self.func_index)

    def byte(self) -> int:
        if self.pos >= len(self.data):
            raise self.error("unexpected end of input")
        b = self.data[self.pos]
        self.pos += 1
        return b

    def bytes(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise self.error("unexpected end of input")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return bytes(out)

    def u32(self) -> int:
        try:
            v, self.pos = read_uleb128(self.data, self.pos, 32)
        except LEBError as exc:
            raise self.error(str(exc)) from None
        return v

    def s32(self) -> int:
        try:
            v, self.pos = read_sleb128(self.data, self.pos, 32)
        except LEBError as exc:
            raise self.error(str(exc)) from None
        return v

    def s64(self) -> int:
        try:
            v, self.pos = read_sleb128(self.data, self.pos, 64)
        except LEBError as exc:
            raise self.error(str(exc)) from None
        return v

    def name(self) -> bytes:
        return self.bytes(self.u32())

    def vec(self, fn):
        return [fn() for _ in range(self.u32())]

    def valtype(self) -> str:
        b = self.byte()
        if b not in op.VALTYPE_BYTES:
            raise self.error(f"bad value type {b:#x}")
        return op.VALTYPE_BYTES[b]

    def limits(self) -> Limits:
        flag = self.byte()
        if flag == 0:
            return Limits(self.u32())
        if flag == 1:
            return Limits(self.u32(), self.u32())
        raise self.error(f"bad limits flag {flag:#x}")

    def tabletype(self) -> TableType:
        et = self.byte()
        if et != op.FUNCREF:
            raise self.error(f"bad table element type {et:#x}")
        return TableType(et, self.limits())

    def globaltype(self) -> GlobalType:
        t = self.valtype()
        mut = self.byte()
        if mut not in (0, 1):
            raise self.error(f"bad mutability {mut:#x}")
        return GlobalType(t, bool(mut))

    def blocktype(self):
        b = self.byte()
        if b == op.BLOCKTYPE_EMPTY:
            return None
        if b in op.VALTYPE_BYTES:
            return op.VALTYPE_BYTES[b]
        raise self.error(f"unsupported block type {b:#x}")

    def instrs(self, terminators=(op.OP_END,)) -> tuple[list[Instr], int]:
        """Read instructions up to one of ``terminators``; return (body, terminator)."""
        out: list[Instr] = []
        while True:
            start = self.pos
            b = self.byte()
            if b in terminators:
                return out, b
            entry = op.OPCODES.get(b)
            if entry is None:
                self.pos = start
                raise self.error(f"unsupported opcode {b:#04x}", opcode=b)
            name, kind = entry
            if kind == op.NONE:
                out.append(Instr(name))
            elif kind == op.BLOCK:
                bt = self.blocktype()
                if name == "if":
                    then, term = self.instrs((op.OP_END, op.OP_ELSE))
                    orelse = None
                    if term == op.OP_ELSE:
                        orelse, _ = self.instrs()
                    out.append(Instr(name, bt, then, orelse))
                else:
                    body, _ = self.instrs()
                    out.append(Instr(name, bt, body))
            elif kind in (op.LABEL, op.FUNC, op.LOCAL, op.GLOBAL):
                out.append(Instr(name, self.u32()))
            elif kind == op.BR_TABLE:
                targets = tuple(self.vec(self.u32))
                out.append(Instr(name, (targets, self.u32())))
            elif kind == op.CALL_IND:
                ti = self.u32()
                if self.byte() != 0:
                    raise self.error("call_indirect reserved byte must be zero")
                out.append(Instr(name, ti))
            elif kind == op.MEMARG:
                align = self.u32()
                out.append(Instr(name, (align, self.u32())))
            elif kind == op.MEMIDX:
                if self.byte() != 0:
                    raise self.error(f"{name} reserved byte must be zero")
                out.append(Instr(name))
            elif kind == op.CONST_I32:
                out.append(Instr(name, self.s32()))
            elif kind == op.CONST_I64:
                out.append(Instr(name, self.s64()))
            elif kind == op.CONST_F32:
                out.append(Instr(name, int.from_bytes(self.bytes(4), "little")))
            elif kind == op.CONST_F64:
                out.append(Instr(name, int.from_bytes(self.bytes(8), "little")))
            else:  # pragma: no cover - table is closed
                raise self.error(f"unhandled immediate kind {kind}")

    def expr(self) -> list[Instr]:
        body, _ = self.instrs()
        return body


def _decode_section(m: Module, sid: int, r: _Reader, nfuncs_declared: list[int]) -> None:
    if sid == SEC_TYPE:
        def functype():
            form = r.byte()
            if form != 0x60:
                raise r.error(f"bad function type form {form:#x}")
            params = tuple(r.vec(r.valtype))
            results = tuple(r.vec(r.valtype))
            if len(results) > 1:
                raise r.error("multi-value results are not supported")
            return FuncType(params, results)
        m.types = r.vec(functype)
    elif sid == SEC_IMPORT:
        def imp():
            mod, name = r.name(), r.name()
            kind = r.byte()
            if kind == KIND_FUNC:
                desc = r.u32()
            elif kind == KIND_TABLE:
                desc = r.tabletype()
            elif kind == KIND_MEMORY:
                desc = r.limits()
            elif kind == KIND_GLOBAL:
                desc = r.globaltype()
            else:
                raise r.error(f"bad import kind {kind:#x}")
            return Import(mod, name, kind, desc)
        m.imports = r.vec(imp)
    elif sid == SEC_FUNCTION:
        m.functions = r.vec(r.u32)
        nfuncs_declared.append(len(m.functions))
    elif sid == SEC_TABLE:
        m.tables = r.vec(r.tabletype)
    elif sid == SEC_MEMORY:
        m.memories = r.vec(r.limits)
    elif sid == SEC_GLOBAL:
        m.globals = r.vec(lambda: Global(r.globaltype(), r.expr()))
    elif sid == SEC_EXPORT:
        def exp():
            name = r.name()
            kind = r.byte()
            if kind > 3:
                raise r.error(f"bad export kind {kind:#x}")
            return Export(name, kind, r.u32())
        m.exports = r.vec(exp)
    elif sid == SEC_START:
        m.start = r.u32()
    elif sid == SEC_ELEM:
        m.elems = r.vec(lambda: ElemSegment(r.u32(), r.expr(), r.vec(r.u32)))
    elif sid == SEC_CODE:
        base = sum(1 for i in m.imports if i.kind == KIND_FUNC)

        def body():
            size = r.u32()
            end = r.pos + size
            r.func_index = base + len(m.code)
            locals_ = r.vec(lambda: (r.u32(), r.valtype()))
            if sum(n for n, _ in locals_) >= 1 << 32:
                raise r.error("too many locals")
            instrs = r.expr()
            if r.pos != end:
                raise r.error("function body size mismatch")
            r.func_index = None
            fb = FuncBody(locals_, instrs)
            m.code.append(fb)
            return fb
        count = r.u32()
        for _ in range(count):
            body()
    elif sid == SEC_DATA:
        m.data = r.vec(lambda: DataSegment(r.u32(), r.expr(), r.name()))
    else:
        raise r.error(f"unknown section id {sid}")


def decode_module(data: bytes) -> Module:
    data = bytes(data)
    if len(data) < 8:
        raise DecodeError("truncated header", offset=0)
    if data[:4] != MAGIC:
        raise DecodeError("bad magic", offset=0)
    if data[4:8] != VERSION:
        raise DecodeError("unsupported version", offset=4)
    m = Module()
    r = _Reader(data, 8)
    last_id = 0
    nfuncs_declared: list[int] = []
    while r.pos < len(data):
        sec_start = r.pos
        sid = r.byte()
        size = r.u32()
        end = r.pos + size
        if end > len(data):
            raise DecodeError("section length exceeds input", offset=sec_start)
        if sid == SEC_CUSTOM:
            sub = _Reader(data[:end], r.pos)
            name = sub.name()
            m.customs.append(CustomSection(name, data[sub.pos:end], after=last_id))
        else:
            if sid > SEC_DATA:
                raise DecodeError(f"unknown section id {sid}", offset=sec_start)
            if sid <= last_id:
                raise DecodeError(f"section {sid} out of order", offset=sec_start)
            sub = _Reader(data[:end], r.pos)
            _decode_section(m, sid, sub, nfuncs_declared)
            if sub.pos != end:
                raise DecodeError(f"section {sid} length mismatch", offset=sec_start)
            last_id = sid
        r.pos = end
    if len(m.functions) != len(m.code):
        raise DecodeError("function and code section counts differ")
    return m


# ---------------------------------------------------------------- encoding

def _vec(items, fn) -> bytes:
    out = bytearray(write_uleb128(len(items)))
    for it in items:
        out += fn(it)
    return bytes(out)


def _name(b: bytes) -> bytes:
    return write_uleb128(len(b)) + b


def _limits(lim: Limits) -> bytes:
    if lim.max is None:
        return b"\x00" + write_uleb128(lim.min)
    return b"\x01" + write_uleb128(lim.min) + write_uleb128(lim.max)


def _tabletype(t: TableType) -> bytes:
    return bytes([t.elem_type]) + _limits(t.limits)


def _globaltype(g: GlobalType) -> bytes:
    return bytes([op.VALTYPE_CODES[g.valtype], int(g.mutable)])


def _u32(v: int) -> bytes:
    if not 0 <= v < 1 << 32:
        raise EncodeError(f"u32 immediate out of range: {v}")
    return write_uleb128(v)


def _signed(v: int, bits: int) -> int:
    v &= (1 << bits) - 1
    return v - (1 << bits) if v >> (bits - 1) else v


def encode_instrs(body: list[Instr], out: bytearray) -> None:
    for ins in body:
        try:
            code, kind = op.BY_NAME[ins.op]
        except KeyError:
            raise EncodeError(f"unknown instruction {ins.op!r}") from None
        out.append(code)
        imm = ins.imm
        if kind == op.NONE or kind == op.MEMIDX:
            if kind == op.MEMIDX:
                out.append(0)
        elif kind == op.BLOCK:
            out.append(op.BLOCKTYPE_EMPTY if imm is None else op.VALTYPE_CODES[imm])
            encode_instrs(ins.body or [], out)
            if ins.orelse is not None:
                out.append(op.OP_ELSE)
                encode_instrs(ins.orelse, out)
            out.append(op.OP_END)
        elif kind in (op.LABEL, op.FUNC, op.LOCAL, op.GLOBAL):
            out += _u32(imm)
        elif kind == op.BR_TABLE:
            targets, default = imm
            out += _vec(targets, _u32)
            out += _u32(default)
        elif kind == op.CALL_IND:
            out += _u32(imm)
            out.append(0)
        elif kind == op.MEMARG:
            out += _u32(imm[0])
            out += _u32(imm[1])
        elif kind == op.CONST_I32:
            out += write_sleb128(_signed(imm, 32))
        elif kind == op.CONST_I64:
            out += write_sleb128(_signed(imm, 64))
        elif kind == op.CONST_F32:
            out += (imm & 0xFFFFFFFF).to_bytes(4, "little")
        elif kind == op.CONST_F64:
            out += (imm & 0xFFFFFFFFFFFFFFFF).to_bytes(8, "little")


def _expr(body: list[Instr]) -> bytes:
    out = bytearray()
    encode_instrs(body, out)
    out.append(op.OP_END)
    return bytes(out)


def _import(i: Import) -> bytes:
    out = _name(i.module) + _name(i.name) + bytes([i.kind])
    if i.kind == KIND_FUNC:
        return out + _u32(i.desc)
    if i.kind == KIND_TABLE:
        return out + _tabletype(i.desc)
    if i.kind == KIND_MEMORY:
        return out + _limits(i.desc)
    return out + _globaltype(i.desc)


def _func_body(fb: FuncBody) -> bytes:
    payload = _vec(fb.locals, lambda l: _u32(l[0]) + bytes([op.VALTYPE_CODES[l[1]]]))
    payload += _expr(fb.body)
    return write_uleb128(len(payload)) + payload


def _check_indices(m: Module) -> None:
    nfunc = m.num_imported_funcs + len(m.functions)
    ntypes = len(m.types)
    for i in m.imports:
        if i.kind == KIND_FUNC and not 0 <= i.desc < ntypes:
            raise EncodeError(f"import type index {i.desc} out of range")
    for t in m.functions:
        if not 0 <= t < ntypes:
            raise EncodeError(f"function type index {t} out of range")
    spaces = {
        KIND_FUNC: nfunc,
        KIND_TABLE: len(m.table_types()),
        KIND_MEMORY: len(m.memory_limits()),
        KIND_GLOBAL: len(m.global_types()),
    }
    for e in m.exports:
        if not 0 <= e.index < spaces[e.kind]:
            raise EncodeError(f"export {e.name!r} index {e.index} out of range")
    if m.start is not None and not 0 <= m.start < nfunc:
        raise EncodeError(f"start function {m.start} out of range")
    for seg in m.elems:
        for f in seg.funcs:
            if not 0 <= f < nfunc:
                raise EncodeError(f"elem function index {f} out of range")
    if len(m.functions) != len(m.code):
        raise EncodeError("function and code counts differ")


def encode_module(m: Module) -> bytes:
    _check_indices(m)
    sections: list[tuple[int, bytes]] = []
    if m.types:
        sections.append((SEC_TYPE, _vec(m.types, lambda t: b"\x60" + _vec(
            t.params, lambda v: bytes([op.VALTYPE_CODES[v]])) + _vec(
            t.results, lambda v: bytes([op.VALTYPE_CODES[v]])))))
    if m.imports:
        sections.append((SEC_IMPORT, _vec(m.imports, _import)))
    if m.functions:
        sections.append((SEC_FUNCTION, _vec(m.functions, _u32)))
    if m.tables:
        sections.append((SEC_TABLE, _vec(m.tables, _tabletype)))
    if m.memories:
        sections.append((SEC_MEMORY, _vec(m.memories, _limits)))
    if m.globals:
        sections.append((SEC_GLOBAL, _vec(m.globals, lambda g: _globaltype(g.type) + _expr(g.init))))
    if m.exports:
        sections.append((SEC_EXPORT, _vec(m.exports, lambda e: _name(e.name) + bytes([e.kind]) + _u32(e.index))))
    if m.start is not None:
        sections.append((SEC_START, _u32(m.start)))
    if m.elems:
        sections.append((SEC_ELEM, _vec(m.elems, lambda s: _u32(s.table) + _expr(s.offset) + _vec(s.funcs, _u32))))
    if m.code:
        sections.append((SEC_CODE, _vec(m.code, _func_body)))
    if m.data:
        sections.append((SEC_DATA, _vec(m.data, lambda d: _u32(d.memory) + _expr(d.offset) + _name(d.data))))

    out = bytearray(MAGIC + VERSION)

    def emit(sid: int, payload: bytes) -> None:
        out.append(sid)
        out.extend(write_uleb128(len(payload)))
        out.extend(payload)

    customs = sorted(enumerate(m.customs), key=lambda ic: (ic[1].after, ic[0]))
    ci = 0
    for sid, payload in [(0, b"")] + sections:
        if sid:
            emit(sid, payload)
        # customs placed after the last emitted section id not exceeding theirs
        while ci < len(customs):
            c = customs[ci][1]
            nxt = next((s for s, _ in sections if s > sid), None)
            if c.after >= sid and (nxt is None or c.after < nxt):
                emit(SEC_CUSTOM, _name(c.name) + c.data)
                ci += 1
            else:
                break
    return bytes(out)
