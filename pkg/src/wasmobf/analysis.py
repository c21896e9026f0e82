"""Operand-stack typing, validation, block structure and structural metrics."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Optional

from . import opcodes as op
from .binfmt import (
    KIND_FUNC, KIND_GLOBAL, KIND_MEMORY, KIND_TABLE, FuncType, Instr, Module,
    const_offset, encode_module, walk,
)

UNKNOWN = None  # type of a value popped from a polymorphic stack


@dataclass(frozen=True)
class StackState:
    types: tuple[str, ...] = ()
    polymorphic: bool = False

    @property
    def height(self) -> int:
        return len(self.types)


@dataclass
class ValidationIssue:
    func_index: Optional[int]
    path: tuple[int, ...]
    message: str

    def __str__(self) -> str:
        where = "module" if self.func_index is None else f"func {self.func_index}"
        if self.path:
            where += " @ " + ".".join(map(str, self.path))
        return f"{where}: {self.message}"


@dataclass
class ValidationReport:
    errors: list[ValidationIssue] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors

    def __bool__(self) -> bool:
        return self.ok

    def __str__(self) -> str:
        return "ok" if self.ok else "\n".join(map(str, self.errors))


class WasmTypeError(Exception):
    pass


@dataclass
class FuncContext:
    """What the type-checker needs to know about the enclosing function."""
    module: Module
    func_type: FuncType
    local_types: list[str]  # params followed by declared locals

    @classmethod
    def of(cls, m: Module, func_index: int) -> "FuncContext":
        ft = m.func_type(func_index)
        return cls(m, ft, list(ft.params) + m.body_of(func_index).local_types())


class _Ctrl:
    __slots__ = ("kind", "label_types", "end_types", "height", "unreachable")

    def __init__(self, kind, label_types, end_types, height):
        self.kind = kind
        self.label_types = label_types
        self.end_types = end_types
        self.height = height
        self.unreachable = False


class TypeChecker:
    """Core-spec validation algorithm over the nested instruction IR."""

    def __init__(self, ctx: FuncContext):
        self.ctx = ctx
        m = ctx.module
        self.func_types = [m.types[t] if 0 <= t < len(m.types) else None for t in m.func_type_indices()]
        self.globals = m.global_types()
        self.ntables = len(m.table_types())
        self.nmems = len(m.memory_limits())
        self.vals: list[Optional[str]] = []
        self.ctrls: list[_Ctrl] = []
        self.max_height = 0
        self.path: list[int] = []

    # -- stack primitives
    def push(self, t: Optional[str]) -> None:
        self.vals.append(t)
        if len(self.vals) > self.max_height:
            self.max_height = len(self.vals)

    def pop(self, expect: Optional[str] = None) -> Optional[str]:
        c = self.ctrls[-1]
        if len(self.vals) == c.height:
            if c.unreachable:
                return expect
            raise WasmTypeError(f"operand stack underflow (expected {expect or 'a value'})")
        actual = self.vals.pop()
        if expect is not None and actual is not None and actual != expect:
            raise WasmTypeError(f"type mismatch: expected {expect}, got {actual}")
        return actual if actual is not None else expect

    def pop_many(self, types) -> None:
        for t in reversed(types):
            self.pop(t)

    def push_ctrl(self, kind: str, label_types, end_types) -> None:
        self.ctrls.append(_Ctrl(kind, tuple(label_types), tuple(end_types), len(self.vals)))

    def pop_ctrl(self) -> _Ctrl:
        c = self.ctrls[-1]
        self.pop_many(c.end_types)
        if len(self.vals) != c.height:
            raise WasmTypeError(f"{len(self.vals) - c.height} extra value(s) at end of {c.kind}")
        self.ctrls.pop()
        return c

    def set_unreachable(self) -> None:
        c = self.ctrls[-1]
        del self.vals[c.height:]
        c.unreachable = True

    def label(self, depth: int) -> tuple[str, ...]:
        if depth >= len(self.ctrls):
            raise WasmTypeError(f"branch depth {depth} out of range")
        return self.ctrls[-1 - depth].label_types

    def local(self, idx: int) -> str:
        if not 0 <= idx < len(self.ctx.local_types):
            raise WasmTypeError(f"local index {idx} out of range")
        return self.ctx.local_types[idx]

    def state(self) -> StackState:
        # unknown slots (None) only occur on polymorphic stacks
        return StackState(tuple(self.vals), self.ctrls[-1].unreachable)

    # -- driving
    def check_function(self, body: list[Instr]) -> None:
        results = self.ctx.func_type.results
        self.push_ctrl("function", results, results)
        self.seq(body)
        self.pop_ctrl()

    def seq(self, body: list[Instr]) -> None:
        for i, ins in enumerate(body):
            self.path.append(i)
            self.step(ins)
            self.path.pop()

    def step(self, ins: Instr) -> None:
        name = ins.op
        sig = op.SIGNATURES.get(name)
        if sig is not None:
            if name in op.NATURAL_ALIGN:
                if self.nmems == 0:
                    raise WasmTypeError(f"{name} without a memory")
                align, offset = ins.imm
                if align > op.NATURAL_ALIGN[name]:
                    raise WasmTypeError(f"alignment of {name} exceeds natural alignment")
                if not 0 <= offset < 1 << 32:
                    raise WasmTypeError("memarg offset out of range")
            elif name in ("memory.size", "memory.grow") and self.nmems == 0:
                raise WasmTypeError(f"{name} without a memory")
            self.pop_many(sig[0])
            for t in sig[1]:
                self.push(t)
            return
        if name == "i32.const":
            self.push(op.I32)
        elif name == "i64.const":
            self.push(op.I64)
        elif name == "f32.const":
            self.push(op.F32)
        elif name == "f64.const":
            self.push(op.F64)
        elif name == "local.get":
            self.push(self.local(ins.imm))
        elif name == "local.set":
            self.pop(self.local(ins.imm))
        elif name == "local.tee":
            t = self.local(ins.imm)
            self.pop(t)
            self.push(t)
        elif name == "global.get":
            if not 0 <= ins.imm < len(self.globals):
                raise WasmTypeError(f"global index {ins.imm} out of range")
            self.push(self.globals[ins.imm].valtype)
        elif name == "global.set":
            if not 0 <= ins.imm < len(self.globals):
                raise WasmTypeError(f"global index {ins.imm} out of range")
            g = self.globals[ins.imm]
            if not g.mutable:
                raise WasmTypeError(f"global {ins.imm} is immutable")
            self.pop(g.valtype)
        elif name == "drop":
            self.pop()
        elif name == "select":
            self.pop(op.I32)
            t1 = self.pop()
            t2 = self.pop(t1)
            self.push(t1 if t1 is not None else t2)
        elif name in ("block", "loop"):
            res = () if ins.imm is None else (ins.imm,)
            self.push_ctrl(name, () if name == "loop" else res, res)
            self.path.append(0)
            self.seq(ins.body or [])
            self.path.pop()
            self.pop_ctrl()
            for t in res:
                self.push(t)
        elif name == "if":
            res = () if ins.imm is None else (ins.imm,)
            self.pop(op.I32)
            self.push_ctrl("if", res, res)
            self.path.append(0)
            self.seq(ins.body or [])
            self.path.pop()
            self.pop_ctrl()
            self.push_ctrl("else", res, res)
            if ins.orelse is not None:
                self.path.append(1)
                self.seq(ins.orelse)
                self.path.pop()
            elif res:
                raise WasmTypeError("if with a result requires an else arm")
            self.pop_ctrl()
            for t in res:
                self.push(t)
        elif name == "br":
            self.pop_many(self.label(ins.imm))
            self.set_unreachable()
        elif name == "br_if":
            self.pop(op.I32)
            lt = self.label(ins.imm)
            self.pop_many(lt)
            for t in lt:
                self.push(t)
        elif name == "br_table":
            targets, default = ins.imm
            self.pop(op.I32)
            arity = self.label(default)
            for t in targets:
                if len(self.label(t)) != len(arity) or self.label(t) != arity:
                    raise WasmTypeError("br_table targets have inconsistent types")
            self.pop_many(arity)
            self.set_unreachable()
        elif name == "return":
            self.pop_many(self.ctrls[0].label_types)
            self.set_unreachable()
        elif name == "unreachable":
            self.set_unreachable()
        elif name == "call":
            if not 0 <= ins.imm < len(self.func_types) or self.func_types[ins.imm] is None:
                raise WasmTypeError(f"call target {ins.imm} out of range")
            ft = self.func_types[ins.imm]
            self.pop_many(ft.params)
            for t in ft.results:
                self.push(t)
        elif name == "call_indirect":
            if self.ntables == 0:
                raise WasmTypeError("call_indirect without a table")
            if not 0 <= ins.imm < len(self.ctx.module.types):
                raise WasmTypeError(f"type index {ins.imm} out of range")
            ft = self.ctx.module.types[ins.imm]
            self.pop(op.I32)
            self.pop_many(ft.params)
            for t in ft.results:
                self.push(t)
        else:
            raise WasmTypeError(f"unknown instruction {name!r}")


def _check_const_expr(m: Module, expr: list[Instr], want: str, nimported_globals: int) -> None:
    if len(expr) != 1:
        raise WasmTypeError("constant expression must be a single instruction")
    ins = expr[0]
    if ins.op == "global.get":
        gtypes = m.global_types()
        if not 0 <= ins.imm < nimported_globals:
            raise WasmTypeError("constant expression may only read imported globals")
        if gtypes[ins.imm].mutable:
            raise WasmTypeError("constant expression reads a mutable global")
        got = gtypes[ins.imm].valtype
    elif ins.op in ("i32.const", "i64.const", "f32.const", "f64.const"):
        got = ins.op[:3]
    else:
        raise WasmTypeError(f"{ins.op} is not a constant instruction")
    if got != want:
        raise WasmTypeError(f"constant expression has type {got}, expected {want}")


def validate_module(m: Module) -> ValidationReport:
    """Type-check every function body and the module-level declarations."""
    rep = ValidationReport()

    def err(msg: str, func: Optional[int] = None, path=()):
        rep.errors.append(ValidationIssue(func, tuple(path), msg))

    ntypes = len(m.types)
    for ft in m.types:
        if len(ft.results) > 1:
            err("function type with more than one result")
    for t in m.func_type_indices():
        if not 0 <= t < ntypes:
            err(f"type index {t} out of range")
    if len(m.functions) != len(m.code):
        err("function and code counts differ")
        return rep
    if len(m.table_types()) > 1:
        err("more than one table")
    if len(m.memory_limits()) > 1:
        err("more than one memory")
    for lim in m.memory_limits():
        if lim.min > 65536 or (lim.max is not None and (lim.max > 65536 or lim.max < lim.min)):
            err("invalid memory limits")
    for tt in m.table_types():
        if tt.limits.max is not None and tt.limits.max < tt.limits.min:
            err("invalid table limits")
    nfunc = len(m.func_type_indices())
    nglob_imp = sum(1 for i in m.imports if i.kind == KIND_GLOBAL)
    for i, g in enumerate(m.globals):
        try:
            _check_const_expr(m, g.init, g.type.valtype, nglob_imp)
        except WasmTypeError as exc:
            err(f"global {nglob_imp + i}: {exc}")
    for seg in m.elems:
        if seg.table >= len(m.table_types()):
            err("elem segment refers to a missing table")
        try:
            _check_const_expr(m, seg.offset, op.I32, nglob_imp)
        except WasmTypeError as exc:
            err(f"elem offset: {exc}")
        for f in seg.funcs:
            if not 0 <= f < nfunc:
                err(f"elem function index {f} out of range")
    for seg in m.data:
        if seg.memory >= len(m.memory_limits()):
            err("data segment refers to a missing memory")
        try:
            _check_const_expr(m, seg.offset, op.I32, nglob_imp)
        except WasmTypeError as exc:
            err(f"data offset: {exc}")
    spaces = {KIND_FUNC: nfunc, KIND_TABLE: len(m.table_types()),
              KIND_MEMORY: len(m.memory_limits()), KIND_GLOBAL: len(m.global_types())}
    seen = set()
    for e in m.exports:
        if e.name in seen:
            err(f"duplicate export name {e.name!r}")
        seen.add(e.name)
        if not 0 <= e.index < spaces.get(e.kind, 0):
            err(f"export {e.name!r} index out of range")
    if m.start is not None:
        if not 0 <= m.start < nfunc:
            err("start function out of range")
        else:
            ft = m.func_type(m.start)
            if ft.params or ft.results:
                err("start function must have type [] -> []")
    if rep.errors:
        return rep
    base = m.num_imported_funcs
    for i in range(len(m.code)):
        fi = base + i
        tc = TypeChecker(FuncContext.of(m, fi))
        try:
            tc.check_function(m.code[i].body)
        except WasmTypeError as exc:
            err(str(exc), fi, tc.path)
    return rep


# ---------------------------------------------------------------- stack states

def _region_checker(ctx: FuncContext, entry: Optional[StackState]) -> TypeChecker:
    tc = TypeChecker(ctx)
    results = ctx.func_type.results
    # the enclosing frame is the function frame so that outward branches type-check
    tc.push_ctrl("function", results, results)
    if entry is not None:
        for t in entry.types:
            tc.push(t)
        if entry.polymorphic:
            tc.ctrls[-1].unreachable = True
    return tc


def compute_stack_states(body: list[Instr], ctx: FuncContext,
                         entry: Optional[StackState] = None) -> list[tuple[StackState, StackState]]:
    """Per top-level instruction (pre, post) stack states; nested constructs are atomic.

    Raises WasmTypeError if the sequence does not type-check.
    """
    tc = _region_checker(ctx, entry)
    out = []
    for i, ins in enumerate(body):
        pre = tc.state()
        tc.path.append(i)
        tc.step(ins)
        tc.path.pop()
        out.append((pre, tc.state()))
    return out


def max_stack_height(region: list[Instr], ctx: FuncContext,
                     entry: Optional[StackState] = None) -> int:
    """Maximum operand-stack height over every program point of ``region``."""
    tc = _region_checker(ctx, entry)
    tc.seq(region)
    return tc.max_height


# ---------------------------------------------------------------- block tree

@dataclass
class BlockNode:
    kind: str
    start: int          # pre-order index of the opening instruction (-1 for the function)
    end: int            # one past the pre-order index of the last contained instruction
    arity: int
    children: list["BlockNode"] = field(default_factory=list)

    def depth(self) -> int:
        return 1 + max((c.depth() for c in self.children), default=0)


def build_block_tree(body: list[Instr], results: tuple[str, ...] = ()) -> BlockNode:
    counter = [0]

    def visit(instrs: list[Instr], node: BlockNode) -> None:
        for ins in instrs:
            idx = counter[0]
            counter[0] += 1
            if ins.op in op.STRUCTURED:
                child = BlockNode(ins.op, idx, idx, 0 if ins.imm is None else 1)
                visit(ins.body or [], child)
                if ins.orelse is not None:
                    visit(ins.orelse, child)
                child.end = counter[0]
                node.children.append(child)

    root = BlockNode("function", -1, 0, len(results))
    visit(body, root)
    root.end = counter[0]
    return root


def max_nesting_depth(body: list[Instr]) -> int:
    """Deepest block/loop/if nesting; a flat function body has depth 0."""
    return build_block_tree(body).depth() - 1


def nesting_histogram(body: list[Instr]) -> Counter:
    """Number of block/loop/if constructs at each nesting layer (outermost = 1)."""
    hist: Counter = Counter()

    def visit(instrs, depth):
        for ins in instrs:
            if ins.op in op.STRUCTURED:
                hist[depth + 1] += 1
                visit(ins.body or [], depth + 1)
                if ins.orelse is not None:
                    visit(ins.orelse, depth + 1)

    visit(body, 0)
    return hist


def has_dispatcher(body: list[Instr], flag_local: Optional[int] = None) -> bool:
    """True if some loop contains a br_table selecting on a local (``flag_local`` if given)."""
    for ins in walk(body):
        if ins.op != "loop":
            continue
        inner = list(walk(ins.body or []))
        for a, b in zip(inner, inner[1:]):
            if a.op == "local.get" and b.op == "br_table" and (flag_local is None or a.imm == flag_local):
                return True
    return False


# ---------------------------------------------------------------- metrics

@dataclass
class Metrics:
    opcode_counts: dict[str, int]
    num_call: int
    num_call_indirect: int
    elem_entries: int
    nesting_histogram: dict[int, int]
    max_nesting: int
    num_functions: int
    byte_size: int

    def as_dict(self) -> dict:
        return {
            "opcode_counts": dict(sorted(self.opcode_counts.items())),
            "num_call": self.num_call,
            "num_call_indirect": self.num_call_indirect,
            "elem_entries": self.elem_entries,
            "nesting_histogram": {str(k): v for k, v in sorted(self.nesting_histogram.items())},
            "max_nesting": self.max_nesting,
            "num_functions": self.num_functions,
            "byte_size": self.byte_size,
        }


def count_metrics(m: Module) -> Metrics:
    counts: Counter = Counter()
    hist: Counter = Counter()
    deepest = 0
    for fb in m.code:
        for ins in walk(fb.body):
            counts[ins.op] += 1
        hist.update(nesting_histogram(fb.body))
        deepest = max(deepest, max_nesting_depth(fb.body))
    return Metrics(
        opcode_counts=dict(counts),
        num_call=counts.get("call", 0),
        num_call_indirect=counts.get("call_indirect", 0),
        elem_entries=sum(len(s.funcs) for s in m.elems),
        nesting_histogram=dict(hist),
        max_nesting=deepest,
        num_functions=len(m.func_type_indices()),
        byte_size=len(encode_module(m)),
    )


def metrics_to_kv(d: dict, prefix: str = "") -> list[str]:
    """Flatten a metrics document into ``key=value`` lines."""
    lines = []
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            lines.extend(metrics_to_kv(v, key + "."))
        else:
            lines.append(f"{key}={v}")
    return lines


def static_table(m: Module) -> Optional[list[Optional[int]]]:
    """Initial contents of table 0 from constant elem offsets, or None if unknown."""
    tables = m.table_types()
    if not tables:
        return []
    size = tables[0].limits.min
    table: list[Optional[int]] = [None] * size
    for seg in m.elems:
        off = const_offset(seg.offset)
        if off is None:
            return None
        for i, f in enumerate(seg.funcs):
            if off + i < size:
                table[off + i] = f
    return table
