import copy
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wasmobf.analysis import (
    StackState, build_block_tree, compute_stack_states, count_metrics, has_dispatcher,
    validate_module,
)
from wasmobf.asm import asm
from wasmobf.binfmt import FuncBody, FuncType, Module, decode_module, encode_module
from wasmobf.code_obf import (
    COLLATZ_ROLE, CodeBlock, CollatzSpec, FuncEditor, alias_disrupt, assemble_if_else,
    assemble_sequential, assemble_switch_case, assemble_while, collatz_value, eligible_cuts, flatten,
    flatten_function, gen_collatz_constant, gen_collatz_function, gen_simple_opaque_zero,
    round_half_up, split_code_block,
)
from wasmobf.errors import PassError
from wasmobf.fixtures import load_fixture
from wasmobf.interp import differential_check, instantiate, invoke


def one_func(body, params=(), results=("i32",), locals_=()):
    return Module(types=[FuncType(tuple(params), tuple(results))], functions=[0],
                  code=[FuncBody([(1, t) for t in locals_], asm(body) if isinstance(body, str) else body)])


def call0(m, *args):
    assert validate_module(m).ok, validate_module(m)
    r = invoke(instantiate(m), 0, list(args))
    assert r.trap is None, r.trap
    return [v.bits for v in r.values]


def block_of(m, text, results=()):
    ed = FuncEditor(m, 0)
    instrs = asm(text)
    st_ = compute_stack_states(instrs, ed.ctx())
    return ed, CodeBlock(instrs, StackState(), st_[-1][1] if st_ else StackState(), 0)


# ---------------------------------------------------------------- splitting

def test_split_passes_stack_through_locals():
    m = one_func("nop")
    ed, cb = block_of(m, "i32.const 10; i32.const 3; i32.const 4; i32.add; i32.mul")
    b1, b2 = split_code_block(cb, 2, ed, cuts=[2])
    s0, s1 = ed.slots[(0, "i32")], ed.slots[(1, "i32")]
    assert [(i.op, i.imm) for i in b1.instrs[-2:]] == [("local.set", s1), ("local.set", s0)]
    assert [(i.op, i.imm) for i in b2.instrs[:2]] == [("local.get", s0), ("local.get", s1)]
    m.code[0].body = assemble_sequential([b1, b2]).instrs
    assert call0(m) == [70]


def test_split_one_is_identity():
    m = one_func("nop")
    ed, cb = block_of(m, "i32.const 1; i32.const 2; i32.add")
    (only,) = split_code_block(cb, 1, ed)
    assert only.instrs == cb.instrs and not ed.slots


def test_split_rejects_bad_cuts_and_outward_branches():
    m = one_func("nop")
    ed, cb = block_of(m, "i32.const 1; i32.const 2; i32.add")
    with pytest.raises(PassError):
        split_code_block(cb, 2, ed, cuts=[3])
    with pytest.raises(PassError):
        split_code_block(cb, 5, ed)
    ed, cb = block_of(m, "i32.const 1; br 0")
    with pytest.raises(PassError):
        split_code_block(cb, 2, ed)


def test_slot_locals_shared_per_slot_and_type():
    m = one_func("nop", results=("i64",))
    ed, cb = block_of(m, "i32.const 1; drop; i64.const 2; i32.const 0; drop; i64.const 3; i64.add")
    blocks = split_code_block(cb, len(eligible_cuts(compute_stack_states(cb.instrs, ed.ctx()))) + 1, ed)
    assert set(ed.slots) == {(0, "i32"), (0, "i64"), (1, "i32"), (1, "i64")}
    m.code[0].body = assemble_sequential(blocks).instrs
    assert call0(m) == [5]


@given(st.integers(0, 10 ** 6), st.integers(2, 8))
@settings(max_examples=25)
def test_random_split_preserves_results(seed, num):
    fx = load_fixture("arith")
    m = copy.deepcopy(fx.module)
    ed = FuncEditor(m, fx.entry)
    body = ed.body.body
    states = compute_stack_states(body, ed.ctx())
    el = eligible_cuts(states)
    num = min(num, len(el) + 1)
    cuts = sorted(random.Random(seed).sample(el, num - 1))
    cb = CodeBlock(body, StackState(), states[-1][1], fx.entry)
    ed.body.body = assemble_sequential(split_code_block(cb, num, ed, cuts)).instrs
    assert validate_module(m).ok
    assert differential_check(fx.module, m, fx.entry, fx.vectors(10, seed)).equal


# ---------------------------------------------------------------- combinators

def test_if_else_combinator():
    m = one_func("nop", params=("i32",))
    cond = block_of(m, "local.get 0")[1]
    a = block_of(m, "i32.const 11")[1]
    b = block_of(m, "i32.const 22")[1]
    m.code[0].body = assemble_if_else(cond, a, b).instrs
    assert call0(m, 1) == [11] and call0(m, 0) == [22]


def test_while_zero_condition_never_runs_body():
    m = one_func("nop", locals_=("i32",))
    cond = block_of(m, "i32.const 0")[1]
    body = block_of(m, "i32.const 99; local.set 0")[1]
    m.code[0].body = assemble_while(cond, body).instrs + asm("local.get 0")
    assert call0(m) == [0]


def test_while_counts_down():
    m = one_func("nop", params=("i32",), locals_=("i32",))
    cond = block_of(m, "local.get 0")[1]
    body = block_of(m, "local.get 0; i32.const 1; i32.sub; local.set 0; "
                       "local.get 1; i32.const 3; i32.add; local.set 1")[1]
    m.code[0].body = assemble_while(cond, body).instrs + asm("local.get 1")
    assert call0(m, 5) == [15]


@pytest.mark.parametrize("sel,expected", [(0, 1), (1, 2), (2, 4), (3, 0), (100, 0)])
def test_switch_runs_only_selected_case(sel, expected):
    m = one_func("nop", params=("i32",), locals_=("i32",))
    cases = [block_of(m, f"local.get 1; i32.const {1 << i}; i32.or; local.set 1")[1] for i in range(3)]
    selector = block_of(m, "local.get 0")[1]
    m.code[0].body = assemble_switch_case(selector, cases).instrs + asm("local.get 1")
    # case k sets bit k; out-of-range selectors run nothing
    assert call0(m, sel) == [expected]


def test_combinators_reject_bad_shapes():
    m = one_func("nop")
    with pytest.raises(PassError):
        assemble_if_else(block_of(m, "i64.const 1")[1], block_of(m, "nop")[1], block_of(m, "nop")[1])
    with pytest.raises(PassError):
        assemble_while(block_of(m, "i32.const 1")[1], block_of(m, "i32.const 1")[1])
    with pytest.raises(PassError):
        assemble_switch_case(block_of(m, "i32.const 0")[1], [])


# ---------------------------------------------------------------- opaque predicates

@given(st.integers(0, 2 ** 32 - 1))
def test_simple_opaque_zero(x):
    m = one_func(gen_simple_opaque_zero(0), params=("i32",))
    assert call0(m, x) == [0]


@pytest.mark.parametrize("x,y", [(6, 3), (7, 22), (1, 4), (2, 1)])
def test_collatz_step_function(x, y):
    m = Module()
    fi = gen_collatz_function(m)
    assert m.injected[fi] == COLLATZ_ROLE and gen_collatz_function(m) == fi
    assert invoke(instantiate(m), fi, [x]).values[0].bits == y


def test_collatz_27_takes_111_steps():
    m = Module()
    fi = gen_collatz_function(m)
    inst = instantiate(m)
    a, n = 27, 0
    while a != 1:
        a = invoke(inst, fi, [a]).values[0].bits
        n += 1
    assert n == 111


def _collatz_module(target, m_, n_, c_):
    mod = one_func("nop", params=("i32", "i32"))
    fi = gen_collatz_function(mod)
    ed = FuncEditor(mod, 0)
    spec = CollatzSpec(m_, n_, c_, 0, 1, target, fi, ed.acc_local())
    ed.body.body = gen_collatz_constant(spec)
    return mod


@given(st.integers(0, 2 ** 32 - 1), st.integers(0, 2 ** 32 - 1), st.integers(1, 50),
       st.integers(1, 2 ** 31 - 1), st.integers(1, 2 ** 31 - 1), st.integers(0, 2 ** 31 - 1))
@settings(max_examples=40)
def test_collatz_constant(x, y, target, m_, n_, c_):
    mod = _collatz_module(target, m_, n_, c_)
    r = invoke(instantiate(mod), 0, [x, y], fuel=10 ** 6)
    assert r.values[0].bits == target


def test_collatz_constant_example_and_bad_target():
    assert call0(_collatz_module(3, 5, 7, 11), 4, 9) == [3]
    with pytest.raises(PassError):
        gen_collatz_constant(CollatzSpec(1, 1, 1, 0, 1, 0, 0, 2))


def test_collatz_value_zero():
    mod = one_func("nop", params=("i32", "i32"))
    fi = gen_collatz_function(mod)
    ed = FuncEditor(mod, 0)
    ed.body.body = collatz_value(random.Random(1), ed, 0, fi)
    assert call0(mod, 123, 456) == [0]


# ---------------------------------------------------------------- flattening

def test_flatten_structure_and_order():
    fx = load_fixture("arith")
    m = copy.deepcopy(fx.module)
    plan = flatten_function(m, fx.entry, 5, random.Random(3))
    assert plan is not None
    assert sorted(plan.shuffled_order) == plan.original_order == list(range(5))
    assert plan.exit_sentinel == 5
    assert validate_module(m).ok
    body = m.body_of(fx.entry).body
    assert has_dispatcher(body, plan.jump_flag_local)
    # the dispatcher lives inside block > loop > block
    tree = build_block_tree(body)
    assert [c.kind for c in tree.children][:1] == ["block"]
    inst = instantiate(m, watch=[(fx.entry, plan.jump_flag_local)])
    invoke(inst, fx.entry, fx.vectors(1)[0])
    assert [v for _, _, v, _ in inst.trace] == [0, 1, 2, 3, 4, 5]
    assert differential_check(fx.module, m, fx.entry, fx.vectors(50)).equal


def test_flatten_skips_trivial_functions():
    m = one_func("i32.const 1")
    assert flatten_function(m, 0, 4, random.Random(0)) is None
    stats = {}
    out = flatten(m, 4, random.Random(0), stats=stats)
    assert stats["flattened"] == [] and stats["skipped"] == [0]
    assert encode_module(out) == encode_module(m)


def test_flatten_does_not_mutate_input():
    fx = load_fixture("gcd")
    before = encode_module(fx.module)
    flatten(fx.module, 5, random.Random(0), predicate="o2")
    assert encode_module(fx.module) == before


@pytest.mark.parametrize("name", ["fact", "gcd", "switch", "early_return", "nested", "unreachable",
                                  "stack_heavy", "floats"])
@pytest.mark.parametrize("pred", ["none", "o1", "o2"])
def test_flatten_fixtures(name, pred):
    fx = load_fixture(name)
    stats = {}
    m = flatten(fx.module, 5, random.Random(7), predicate=pred, stats=stats)
    assert validate_module(m).ok
    assert differential_check(fx.module, m, fx.entry, fx.vectors(40)).equal
    if pred != "none" and stats["flattened"]:
        assert stats["collatz_predicates"] > 0


def test_flatten_deterministic():
    fx = load_fixture("bubble")
    a = encode_module(flatten(fx.module, 10, random.Random(5), predicate="o1"))
    b = encode_module(flatten(fx.module, 10, random.Random(5), predicate="o1"))
    assert a == b


# ---------------------------------------------------------------- alias disruption

@pytest.mark.parametrize("pct,n", [(0, 0), (25, 5), (50, 10), (100, 20), (10, 2), (12.5, 3)])
def test_round_half_up(pct, n):
    assert round_half_up(pct, 20) == n


@pytest.mark.parametrize("pct,delta", [(100, 20), (50, 10), (25, 5)])
def test_alias_counts(pct, delta):
    fx = load_fixture("calls20")
    stats = {}
    m = alias_disrupt(fx.module, pct, random.Random(0), stats=stats)
    before, after = count_metrics(fx.module), count_metrics(m)
    assert after.num_call_indirect - before.num_call_indirect == delta
    assert before.num_call - after.num_call == delta
    assert after.elem_entries - before.elem_entries == stats["alias_elem_added"] <= 4
    assert differential_check(fx.module, m, fx.entry, fx.vectors(30)).equal


def test_alias_zero_percent_is_noop():
    fx = load_fixture("calls20")
    m = alias_disrupt(fx.module, 0, random.Random(0))
    assert encode_module(m) == encode_module(fx.module)


@pytest.mark.parametrize("opaque,pred", [("const", "none"), ("simple", "none"), ("const", "o1"),
                                         ("simple", "o2")])
def test_alias_with_existing_table(opaque, pred):
    fx = load_fixture("indirect")
    m = alias_disrupt(fx.module, 100, random.Random(2), opaque, pred)
    assert validate_module(m).ok
    assert differential_check(fx.module, m, fx.entry, fx.vectors(60)).equal


def test_alias_rejects_bad_arguments():
    fx = load_fixture("calls20")
    for kw in ({"pct": 101}, {"pct": 50, "opaque": "x"}, {"pct": 50, "predicate": "o3"}):
        with pytest.raises(PassError):
            alias_disrupt(fx.module, rng=random.Random(0), **kw)


def test_alias_then_flatten_roundtrip():
    fx = load_fixture("call_chain")
    m = alias_disrupt(fx.module, 100, random.Random(0), predicate="o1")
    m = flatten(m, 5, random.Random(0), predicate="o1")
    m2 = decode_module(encode_module(m))
    assert validate_module(m2).ok
    assert differential_check(fx.module, m2, fx.entry, fx.vectors(30)).equal
