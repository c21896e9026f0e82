"""Code-level passes: block splitting and rearranging, control-flow flattening,
call -> call_indirect alias disruption, and Collatz / parity opaque predicates."""

from __future__ import annotations

import copy
import math
import random
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .analysis import FuncContext, StackState, compute_stack_states, static_table
from .binfmt import (
    ElemSegment, FuncBody, FuncType, Instr, Limits, Module, TableType, add_local,
)
from .errors import PassError

COLLATZ_ROLE = "collatz"
PREDICATE_MODES = ("none", "o1", "o2")


# ---------------------------------------------------------------- blocks

@dataclass
class CodeBlock:
    instrs: list[Instr]
    entry: StackState = field(default_factory=StackState)
    exit: StackState = field(default_factory=StackState)
    func_index: Optional[int] = None


@dataclass
class SplitPlan:
    num: int
    cut_points: list[int]
    saved_locals: dict[tuple[int, str], int]
    max_len: int


@dataclass
class FlattenPlan:
    original_order: list[int]
    shuffled_order: list[int]
    jump_flag_local: int
    exit_sentinel: int
    case_nesting: list[int]       # per shuffled position: depth of the br back to the loop
    predicates: int = 0
    fallback_inputs: bool = False


@dataclass
class CollatzSpec:
    m: int
    n: int
    c: int
    x: int          # i32 local
    y: int          # i32 local
    target: int
    func: int       # index of the collatz step function
    acc: int        # i64 scratch local


class FuncEditor:
    """Mutable view of one function used while rewriting it.

    Save/restore locals are allocated lazily, one per (stack slot, type).
    """

    def __init__(self, m: Module, func_index: int):
        self.module = m
        self.func_index = func_index
        self.type = m.func_type(func_index)
        self.body = m.body_of(func_index)
        self.slots: dict[tuple[int, str], int] = {}
        self._acc: Optional[int] = None
        self._inputs: Optional[tuple[int, int, bool]] = None
        self._zero: Optional[int] = None
        self._index: Optional[int] = None

    def ctx(self) -> FuncContext:
        return FuncContext(self.module, self.type, list(self.type.params) + self.body.local_types())

    def new_local(self, t: str) -> int:
        return add_local(self.body, t, len(self.type.params))

    def slot_local(self, slot: int, t: str) -> int:
        key = (slot, t)
        if key not in self.slots:
            self.slots[key] = self.new_local(t)
        return self.slots[key]

    def acc_local(self) -> int:
        if self._acc is None:
            self._acc = self.new_local("i64")
        return self._acc

    def predicate_inputs(self) -> tuple[int, int, bool]:
        """Two i32 locals to feed predicates; the flag is True if fresh zero locals were needed."""
        if self._inputs is None:
            params = [i for i, t in enumerate(self.type.params) if t == "i32"]
            fallback = len(params) < 2
            while len(params) < 2:
                params.append(self.zero_local())
            self._inputs = (params[0], params[1], fallback)
        return self._inputs

    def index_local(self) -> int:
        if self._index is None:
            self._index = self.new_local("i32")
        return self._index

    def zero_local(self) -> int:
        if self._zero is None:
            self._zero = self.new_local("i32")
        return self._zero


# ---------------------------------------------------------------- branch depth helpers

def outward_branches(instrs: list[Instr]) -> list[Instr]:
    """Branch instructions in ``instrs`` that target a label outside it."""
    found: list[Instr] = []

    def visit(body: list[Instr], depth: int) -> None:
        for ins in body:
            if ins.op in ("br", "br_if") and ins.imm >= depth:
                found.append(ins)
            elif ins.op == "br_table":
                targets, default = ins.imm
                if default >= depth or any(t >= depth for t in targets):
                    found.append(ins)
            if ins.body is not None:
                visit(ins.body, depth + 1)
            if ins.orelse is not None:
                visit(ins.orelse, depth + 1)

    visit(instrs, 0)
    return found


def shift_outward(instrs: list[Instr], delta: int) -> list[Instr]:
    """Copy of ``instrs`` with every outward branch depth increased by ``delta``.

    Used when a sequence is re-nested under ``delta`` additional labels.
    """
    def fix(d: int, depth: int) -> int:
        return d + delta if d >= depth else d

    def visit(body: list[Instr], depth: int) -> list[Instr]:
        out = []
        for ins in body:
            if ins.op in ("br", "br_if"):
                out.append(Instr(ins.op, fix(ins.imm, depth)))
            elif ins.op == "br_table":
                targets, default = ins.imm
                out.append(Instr(ins.op, (tuple(fix(t, depth) for t in targets), fix(default, depth))))
            elif ins.body is not None:
                out.append(Instr(ins.op, ins.imm, visit(ins.body, depth + 1),
                                 None if ins.orelse is None else visit(ins.orelse, depth + 1)))
            else:
                out.append(copy.copy(ins))
        return out

    return visit(instrs, 0) if delta else copy.deepcopy(instrs)


# ---------------------------------------------------------------- stage I: splitting

def eligible_cuts(states: list[tuple[StackState, StackState]]) -> list[int]:
    """Positions 1..n-1 between top-level instructions where the stack is fully typed."""
    return [i for i in range(1, len(states)) if not states[i][0].polymorphic]


def spread_cuts(eligible: Sequence[int], num: int) -> list[int]:
    """Pick ``num - 1`` cut points spread evenly over the eligible positions."""
    e = len(eligible)
    return [eligible[(j * (e + 1)) // num - 1] for j in range(1, num)]


def split_code_block(cb: CodeBlock, num: int, fctx: FuncEditor,
                     cuts: Optional[Sequence[int]] = None,
                     allow_outward: bool = False) -> list[CodeBlock]:
    """Split ``cb`` into ``num`` sequential blocks that pass the operand stack through locals.

    Every block but the last ends by popping the whole stack into locals
    (top slot first); every block but the first starts by pushing them back.
    """
    if num < 1:
        raise PassError("split count must be at least 1")
    if not allow_outward and outward_branches(cb.instrs):
        raise PassError("code block contains a branch to an enclosing label")
    states = compute_stack_states(cb.instrs, fctx.ctx(), cb.entry)
    if num == 1:
        return [CodeBlock(list(cb.instrs), cb.entry, cb.exit, fctx.func_index)]
    eligible = eligible_cuts(states)
    if cuts is None:
        if len(eligible) < num - 1:
            raise PassError(f"only {len(eligible)} eligible cut positions for {num} blocks")
        cuts = spread_cuts(eligible, num)
    cuts = list(cuts)
    if len(cuts) != num - 1 or cuts != sorted(set(cuts)) or any(c not in eligible for c in cuts):
        raise PassError(f"invalid cut points {cuts}")
    exit_state = states[-1][1] if states else cb.entry
    bounds = [0] + cuts + [len(cb.instrs)]
    blocks = []
    for j in range(num):
        lo, hi = bounds[j], bounds[j + 1]
        instrs: list[Instr] = []
        entry = cb.entry if j == 0 else StackState()
        if j > 0:
            instrs += restore_stack(states[lo][0], fctx)
        instrs += cb.instrs[lo:hi]
        if j < num - 1:
            instrs += save_stack(states[hi][0], fctx)
            ex = StackState()
        else:
            ex = exit_state
        blocks.append(CodeBlock(instrs, entry, ex, fctx.func_index))
    return blocks


def save_stack(state: StackState, fctx: FuncEditor) -> list[Instr]:
    return [Instr("local.set", fctx.slot_local(s, state.types[s]))
            for s in reversed(range(state.height))]


def restore_stack(state: StackState, fctx: FuncEditor) -> list[Instr]:
    return [Instr("local.get", fctx.slot_local(s, state.types[s])) for s in range(state.height)]


def plan_split(cb: CodeBlock, num: int, fctx: FuncEditor) -> SplitPlan:
    from .analysis import max_stack_height
    states = compute_stack_states(cb.instrs, fctx.ctx(), cb.entry)
    eligible = eligible_cuts(states)
    return SplitPlan(num, spread_cuts(eligible, num) if len(eligible) >= num - 1 else [],
                     dict(fctx.slots), max_stack_height(cb.instrs, fctx.ctx(), cb.entry))


# ---------------------------------------------------------------- stage II: rearranging

def _blocktype(cb: CodeBlock):
    if cb.exit.polymorphic:
        return None
    if cb.exit.height > 1:
        raise PassError("a structured block can leave at most one value")
    return cb.exit.types[0] if cb.exit.types else None


def _check_cond(cond: CodeBlock) -> None:
    if cond.entry.height or cond.exit.types != ("i32",):
        raise PassError("condition block must take nothing and leave one i32")


def _check_standalone(*cbs: CodeBlock) -> None:
    for cb in cbs:
        if cb.entry.height:
            raise PassError("block must not consume values from its context")
        if outward_branches(cb.instrs):
            raise PassError("block contains a branch to an enclosing label")


def assemble_sequential(cbs: Sequence[CodeBlock]) -> CodeBlock:
    if not cbs:
        return CodeBlock([])
    instrs = [i for cb in cbs for i in cb.instrs]
    return CodeBlock(instrs, cbs[0].entry, cbs[-1].exit, cbs[0].func_index)


def assemble_if_else(cond: CodeBlock, cb1: CodeBlock, cb2: CodeBlock) -> CodeBlock:
    _check_cond(cond)
    _check_standalone(cb1, cb2)
    if not cb1.exit.polymorphic and not cb2.exit.polymorphic and cb1.exit.types != cb2.exit.types:
        raise PassError("if/else arms leave different types")
    bt = _blocktype(cb1) or _blocktype(cb2)
    out = cb1.exit if not cb1.exit.polymorphic else cb2.exit
    ins = Instr("if", bt, copy.deepcopy(cb1.instrs), copy.deepcopy(cb2.instrs))
    return CodeBlock(cond.instrs + [ins], StackState(), StackState(out.types), cond.func_index)


def _while_instrs(cond: list[Instr], body: list[Instr]) -> list[Instr]:
    # block { loop { cond; eqz; br_if exit; body; br loop } }
    return [Instr("block", None, [Instr("loop", None, cond + [
        Instr("i32.eqz"), Instr("br_if", 1)] + body + [Instr("br", 0)])])]


def assemble_while(cond: CodeBlock, body: CodeBlock) -> CodeBlock:
    _check_cond(cond)
    _check_standalone(body)
    if body.exit.height:
        raise PassError("loop body must leave the stack empty")
    cond_i = shift_outward(cond.instrs, 2)
    body_i = shift_outward(body.instrs, 2)
    return CodeBlock(_while_instrs(cond_i, body_i), StackState(), StackState(), cond.func_index)


def _switch_instrs(selector: list[Instr], cases: list[list[Instr]],
                   table: Sequence[int], default: int) -> list[Instr]:
    """Nested blocks with ``br_table`` in the innermost; case i follows the end of block i.

    ``cases`` must already be shifted for their final nesting; nothing is
    appended after a case, so falling out of case i enters case i+1.
    """
    inner: list[Instr] = selector + [Instr("br_table", (tuple(table), default))]
    for case in cases:
        inner = [Instr("block", None, inner)] + case
    return inner


def assemble_switch_case(selector: CodeBlock, cbs: Sequence[CodeBlock]) -> CodeBlock:
    """br_table dispatch: selector value k runs case k only; out-of-range runs none."""
    if not cbs:
        raise PassError("switch needs at least one case")
    _check_cond(selector)
    _check_standalone(*cbs)
    for cb in cbs:
        if cb.exit.height:
            raise PassError("switch cases must leave the stack empty")
    n = len(cbs)
    cases = []
    for k, cb in enumerate(cbs):
        # case k sits inside blocks k+1..n-1 and the outer exit block
        depth_to_exit = n - 1 - k
        cases.append(shift_outward(cb.instrs, depth_to_exit + 1) + [Instr("br", depth_to_exit)])
    instrs = [Instr("block", None, _switch_instrs(selector.instrs, cases, range(n), n))]
    return CodeBlock(instrs, StackState(), StackState(), selector.func_index)


# ---------------------------------------------------------------- opaque predicates

def gen_simple_opaque_zero(x_local: int) -> list[Instr]:
    """x * (x - 1) % 2: the product of consecutive integers is even, also mod 2**32."""
    return [
        Instr("local.get", x_local), Instr("local.get", x_local),
        Instr("i32.const", 1), Instr("i32.sub"), Instr("i32.mul"),
        Instr("i32.const", 2), Instr("i32.rem_u"),
    ]


def gen_collatz_function(m: Module) -> int:
    """Add (or reuse) an i64 -> i64 function computing one Collatz step."""
    existing = m.injected_index(COLLATZ_ROLE)
    if existing is not None:
        return existing
    body = [
        Instr("local.get", 0), Instr("i64.const", 1), Instr("i64.and"), Instr("i64.eqz"),
        Instr("if", "i64",
              [Instr("local.get", 0), Instr("i64.const", 1), Instr("i64.shr_u")],
              [Instr("local.get", 0), Instr("i64.const", 3), Instr("i64.mul"),
               Instr("i64.const", 1), Instr("i64.add")]),
    ]
    return m.add_function(FuncType(("i64",), ("i64",)), FuncBody([], body), role=COLLATZ_ROLE)


def gen_collatz_constant(spec: CollatzSpec) -> list[Instr]:
    """Push ``spec.target`` through a Collatz convergence loop seeded by the inputs.

    a = (m*x + n*y + c) | 1 (as u32, so a >= 1 and odd); a = collatz(a) until
    a <= 1; then a + (target - 1). 64-bit steps keep 3a+1 from overflowing.
    """
    if spec.target <= 0:
        raise PassError("collatz target must be positive")
    return [
        Instr("local.get", spec.x), Instr("i32.const", _i32(spec.m)), Instr("i32.mul"),
        Instr("local.get", spec.y), Instr("i32.const", _i32(spec.n)), Instr("i32.mul"),
        Instr("i32.add"), Instr("i32.const", _i32(spec.c)), Instr("i32.add"),
        Instr("i32.const", 1), Instr("i32.or"),
        Instr("i64.extend_i32_u"), Instr("local.set", spec.acc),
        Instr("loop", None, [
            Instr("local.get", spec.acc), Instr("call", spec.func), Instr("local.tee", spec.acc),
            Instr("i64.const", 1), Instr("i64.gt_u"), Instr("br_if", 0),
        ]),
        Instr("local.get", spec.acc), Instr("i32.wrap_i64"),
        Instr("i32.const", _i32(spec.target - 1)), Instr("i32.add"),
    ]


def _i32(v: int) -> int:
    v &= 0xFFFFFFFF
    return v - (1 << 32) if v >> 31 else v


def _random_spec(rng: random.Random, ed: FuncEditor, target: int, func: int) -> CollatzSpec:
    x, y, _ = ed.predicate_inputs()
    return CollatzSpec(rng.randint(1, 2 ** 31 - 1), rng.randint(1, 2 ** 31 - 1),
                       rng.randint(1, 2 ** 31 - 1), x, y, target, func, ed.acc_local())


def collatz_value(rng: random.Random, ed: FuncEditor, value: int, func: int) -> list[Instr]:
    """Instructions leaving ``value`` (>= 0) on the stack via a Collatz predicate."""
    if value >= 1:
        return gen_collatz_constant(_random_spec(rng, ed, value, func))
    return gen_collatz_constant(_random_spec(rng, ed, 1, func)) + [Instr("i32.const", 1), Instr("i32.sub")]


# ---------------------------------------------------------------- flattening

def flatten_function(m: Module, func_index: int, num_blocks: int, rng: random.Random,
                     predicate: str = "none", collatz_sites: Optional[int] = None) -> Optional[FlattenPlan]:
    """Flatten the top level of one function in place; None if it has no eligible region.

    ``predicate`` is "none" or "collatz"; ``collatz_sites`` limits how many
    successor assignments (in original order) use the Collatz construction.
    """
    if num_blocks < 2:
        raise PassError("flattening needs at least 2 blocks")
    ed = FuncEditor(m, func_index)
    body = ed.body.body
    if len(body) < 2:
        return None
    states = compute_stack_states(body, ed.ctx())
    eligible = eligible_cuts(states)
    k = min(num_blocks, len(eligible) + 1)
    if k < 2:
        return None
    region = CodeBlock(body, StackState(), states[-1][1], func_index)
    blocks = split_code_block(region, k, ed, spread_cuts(eligible, k), allow_outward=True)

    final = states[-1][1]
    tail: list[Instr]
    if final.polymorphic:
        tail = [Instr("unreachable")]
    else:
        blocks[-1].instrs += save_stack(final, ed)
        tail = restore_stack(final, ed)

    original = list(range(k))
    shuffled = original[:]
    rng.shuffle(shuffled)
    pos = {j: p for p, j in enumerate(shuffled)}
    jf = ed.new_local("i32")
    sentinel = k

    use_collatz = predicate == "collatz"
    cfunc = gen_collatz_function(m) if use_collatz else None
    limit = k if collatz_sites is None else collatz_sites
    npred = 0

    def assign(j: int) -> list[Instr]:
        nonlocal npred
        succ = j + 1
        if use_collatz and j < limit:
            npred += 1
            return collatz_value(rng, ed, succ, cfunc) + [Instr("local.set", jf)]
        return [Instr("i32.const", succ), Instr("local.set", jf)]

    cases = []
    nesting = []
    for p, j in enumerate(shuffled):
        outer = k - 1 - p           # case blocks still enclosing this case
        back = outer + 1            # ... plus the default/exit block, then the loop
        case = shift_outward(blocks[j].instrs, outer + 3) + assign(j) + [Instr("br", back)]
        cases.append(case)
        nesting.append(back)
    dispatch = _switch_instrs([Instr("local.get", jf)], cases, [pos[j] for j in original], k)
    cond = [Instr("block", None, dispatch),
            Instr("local.get", jf), Instr("i32.const", sentinel), Instr("i32.ne")]
    ed.body.body = [Instr("i32.const", 0), Instr("local.set", jf)] + _while_instrs(cond, []) + tail
    fallback = use_collatz and npred > 0 and ed.predicate_inputs()[2]
    return FlattenPlan(original, shuffled, jf, sentinel, nesting, npred, fallback)


def flatten(m: Module, num_blocks: int, rng: random.Random, predicate: str = "none",
            stats: Optional[dict] = None, plans: Optional[dict[int, FlattenPlan]] = None) -> Module:
    """Flatten every eligible non-injected function of a copy of ``m``.

    ``predicate``: "none", "o1" (Collatz on the first two successor
    assignments per function) or "o2" (one block per ten top-level
    instructions at least, Collatz on every assignment).
    """
    if predicate not in PREDICATE_MODES:
        raise PassError(f"unknown predicate mode {predicate!r}")
    m = copy.deepcopy(m)
    flattened, skipped, clamped, preds, fallback = [], [], 0, 0, 0
    for fi in m.defined_indices():
        if fi in m.injected:
            continue
        n = num_blocks
        if predicate == "o2":
            n = max(n, math.ceil(len(m.body_of(fi).body) / 10))
        plan = flatten_function(m, fi, n, rng, "none" if predicate == "none" else "collatz",
                                2 if predicate == "o1" else None)
        if plan is None:
            skipped.append(fi)
            continue
        flattened.append(fi)
        if plans is not None:
            plans[fi] = plan
        if len(plan.original_order) < n:
            clamped += 1
        preds += plan.predicates
        fallback += int(plan.fallback_inputs)
    if stats is not None:
        stats.update(flattened=flattened, skipped=skipped, clamped=clamped,
                     collatz_predicates=stats.get("collatz_predicates", 0) + preds,
                     predicate_fallback_functions=stats.get("predicate_fallback_functions", 0) + fallback)
    return m


# ---------------------------------------------------------------- alias disruption

def round_half_up(pct: float, n: int) -> int:
    return int(math.floor(pct * n / 100 + 0.5))


def _call_sites(m: Module) -> list[tuple[int, Instr]]:
    from .binfmt import walk
    sites = []
    for fi in m.defined_indices():
        if fi in m.injected:
            continue
        for ins in walk(m.body_of(fi).body):
            if ins.op == "call" and ins.imm not in m.injected:
                sites.append((fi, ins))
    return sites


def _guard_indirect(m: Module, old_size: int, sites: set[int]) -> None:
    """Keep pre-existing call_indirect sites trapping on indices past the old table end.

    Growing the table would otherwise turn an undefined-element trap into a
    call; such indices are mapped to -1, which stays out of range.
    """
    def visit(ed: FuncEditor, body: list[Instr]) -> list[Instr]:
        out: list[Instr] = []
        for ins in body:
            if ins.body is not None:
                ins.body = visit(ed, ins.body)
                if ins.orelse is not None:
                    ins.orelse = visit(ed, ins.orelse)
            elif id(ins) in sites:
                tmp = ed.index_local()
                out += [Instr("local.tee", tmp), Instr("i32.const", -1),
                        Instr("local.get", tmp), Instr("i32.const", _i32(old_size)), Instr("i32.lt_u"),
                        Instr("select")]
            out.append(ins)
        return out

    for fi in m.defined_indices():
        if fi not in m.injected:
            ed = FuncEditor(m, fi)
            ed.body.body = visit(ed, ed.body.body)


def alias_disrupt(m: Module, pct: float, rng: random.Random, opaque: str = "const",
                  predicate: str = "none", stats: Optional[dict] = None) -> Module:
    """Rewrite ``pct`` percent of direct calls as ``call_indirect`` through table 0.

    ``opaque`` chooses how the table index is produced ("const" or "simple");
    ``predicate`` "o1"/"o2" replaces it by a Collatz construction for the first
    two rewritten sites of each function / for every site.
    """
    if not 0 <= pct <= 100:
        raise PassError(f"alias percentage {pct} outside 0..100")
    if opaque not in ("const", "simple"):
        raise PassError(f"unknown opaque mode {opaque!r}")
    if predicate not in PREDICATE_MODES:
        raise PassError(f"unknown predicate mode {predicate!r}")
    m = copy.deepcopy(m)
    sites = _call_sites(m)
    count = round_half_up(pct, len(sites))
    chosen_ids = {id(sites[i][1]) for i in sorted(rng.sample(range(len(sites)), count))}
    if stats is not None:
        stats.update(alias_candidates=len(sites), alias_rewritten=count)
    if not count:
        if stats is not None:
            stats["alias_elem_added"] = 0
        return m

    tables = m.table_types()
    if any(i.kind == 1 for i in m.imports):
        raise PassError("alias disruption does not support imported tables")
    current = static_table(m)
    if current is None:
        raise PassError("elem segments with non-constant offsets")
    if not tables:
        m.tables.append(TableType(limits=Limits(0)))
    base = m.tables[0].limits.min
    slot_of: dict[int, int] = {}
    for i, f in enumerate(current):
        if f is not None and f not in slot_of:
            slot_of[f] = i
    appended: list[int] = []

    def slot(f: int) -> int:
        if f not in slot_of:
            slot_of[f] = base + len(appended)
            appended.append(f)
        return slot_of[f]

    type_idx = m.func_type_indices()
    cfunc = gen_collatz_function(m) if predicate != "none" else None
    per_func: dict[int, int] = {}

    def rewrite(ed: FuncEditor, body: list[Instr]) -> list[Instr]:
        out: list[Instr] = []
        for ins in body:
            if ins.body is not None:
                ins.body = rewrite(ed, ins.body)
                if ins.orelse is not None:
                    ins.orelse = rewrite(ed, ins.orelse)
                out.append(ins)
                continue
            if id(ins) not in chosen_ids:
                out.append(ins)
                continue
            k = slot(ins.imm)
            n = per_func.get(ed.func_index, 0)
            per_func[ed.func_index] = n + 1
            if cfunc is not None and (predicate == "o2" or n < 2):
                out += collatz_value(rng, ed, k, cfunc)
            elif opaque == "simple":
                out += [Instr("i32.const", k)] + gen_simple_opaque_zero(ed.predicate_inputs()[0]) + [Instr("i32.add")]
            else:
                out.append(Instr("i32.const", k))
            out.append(Instr("call_indirect", type_idx[ins.imm]))
        return out

    from .binfmt import walk
    existing = {id(i) for fi in m.defined_indices() if fi not in m.injected
                for i in walk(m.body_of(fi).body) if i.op == "call_indirect"}
    for fi in m.defined_indices():
        if fi in m.injected:
            continue
        ed = FuncEditor(m, fi)
        ed.body.body = rewrite(ed, ed.body.body)

    if appended:
        _guard_indirect(m, base, existing)
        m.elems.append(ElemSegment(0, [Instr("i32.const", _i32(base))], appended))
        lim = m.tables[0].limits
        lim.min = base + len(appended)
        if lim.max is not None and lim.max < lim.min:
            lim.max = lim.min
    if stats is not None:
        stats["alias_elem_added"] = len(appended)
    return m
