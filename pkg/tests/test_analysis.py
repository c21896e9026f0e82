import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from wasmobf.analysis import (
    FuncContext, StackState, WasmTypeError, build_block_tree, compute_stack_states, count_metrics,
    max_nesting_depth, max_stack_height, nesting_histogram, validate_module,
)
from wasmobf.asm import asm
from wasmobf.binfmt import FuncBody, FuncType, Global, GlobalType, Instr, Limits, Module
from wasmobf.fixtures import load_fixture


def one_func(body, params=(), results=(), locals_=(), **kw):
    m = Module(types=[FuncType(params, results)], functions=[0],
               code=[FuncBody([(1, t) for t in locals_], asm(body) if isinstance(body, str) else body)], **kw)
    return m


def ctx_of(params=(), results=(), locals_=()):
    m = one_func([], params, results, locals_)
    return FuncContext.of(m, 0)


def test_empty_module_valid():
    assert validate_module(Module()).ok


def test_type_mismatch_reported():
    rep = validate_module(one_func("i32.const 1; i64.add", results=("i32",)))
    assert not rep.ok
    assert rep.errors[0].func_index == 0


@pytest.mark.parametrize("body,results,locals_,kw", [
    ("i32.const 1", (), (), {}),                                   # leftover value
    ("block i32; i32.const 1; i32.const 2; end", ("i32",), (), {}),  # block arity
    ("br 1", (), (), {}),                                          # bad label
    ("local.get 3; drop", (), ("i32",), {}),                       # bad local
    ("i32.const 0; i32.load; drop", (), (), {}),                   # no memory
    ("i32.const 0; i32.load align=3; drop", (), (), {"memories": [Limits(1)]}),  # over-aligned
    ("call 5", (), (), {}),                                        # bad function
    ("i32.const 1; global.set 0", (), (), {"globals": [Global(GlobalType("i32"), [Instr("i32.const", 0)])]}),
    ("i32.const 0; if i32; i32.const 1; end", ("i32",), (), {}),   # if with result lacks else
    ("f32.const 1; i32.const 2; select", ("i32",), (), {}),        # select operand types differ
])
def test_invalid_bodies(body, results, locals_, kw):
    assert not validate_module(one_func(body, results=results, locals_=locals_, **kw)).ok


@pytest.mark.parametrize("body,results", [
    ("unreachable; i32.add", ("i32",)),
    ("block i32; i32.const 1; br 0; i32.add; end", ("i32",)),
    ("i32.const 1; return; drop", ("i32",)),
    ("block; i32.const 0; br_table 0 0; end", ()),
    ("loop i32; i32.const 7; end", ("i32",)),
])
def test_polymorphic_and_structured_valid(body, results):
    rep = validate_module(one_func(body, results=results))
    assert rep.ok, str(rep)


def test_stack_states_heights():
    states = compute_stack_states(asm("i32.const 1; i32.const 2; i32.add"), ctx_of())
    assert [s[0].height for s in states] + [states[-1][1].height] == [0, 1, 2, 1]
    assert all(t == "i32" for s in states for t in s[1].types)


def test_polymorphic_after_branch():
    states = compute_stack_states(asm("block; br 0; i32.const 1; drop; end; nop"), ctx_of())
    assert not states[0][1].polymorphic
    inner = compute_stack_states(asm("br 0; i32.const 1"), ctx_of())
    assert inner[0][1].polymorphic and inner[1][1].polymorphic


def test_stack_states_reject_invalid():
    with pytest.raises(WasmTypeError):
        compute_stack_states(asm("i64.const 1; i32.eqz"), ctx_of())


def test_stack_states_with_entry():
    st_ = compute_stack_states(asm("i32.add"), ctx_of(), StackState(("i32", "i32")))
    assert st_[0][1] == StackState(("i32",))


def test_max_stack_height_examples():
    assert max_stack_height(asm("i32.const 1; drop"), ctx_of()) == 1
    assert max_stack_height(asm("i32.const 1; i32.const 2; i32.const 3; i32.add; i32.add"), ctx_of()) == 3


straight_ops = st.lists(st.sampled_from(["push", "add", "drop", "dup"]), min_size=1, max_size=40)


@given(straight_ops)
def test_max_stack_height_matches_simulation(ops):
    body, h, best = [], 0, 0
    for o in ops:
        if o == "push" or (o != "push" and h == 0):
            body.append(Instr("i32.const", 1))
            h += 1
        elif o == "add" and h >= 2:
            body.append(Instr("i32.add"))
            h -= 1
        elif o == "dup":
            body += [Instr("local.tee", 0), Instr("local.get", 0)]
            h += 1
        else:
            body.append(Instr("drop"))
            h -= 1
        best = max(best, h)
    assert max_stack_height(body, ctx_of(locals_=("i32",))) == best


def test_nesting_depth():
    assert max_nesting_depth(asm("i32.const 1; drop")) == 0
    assert max_nesting_depth(asm("loop; block; end; end")) == 2
    tree = build_block_tree(asm("block; loop; end; end; if; else; block; end; end"))
    assert [c.kind for c in tree.children] == ["block", "if"]
    assert tree.children[0].children[0].kind == "loop"


def test_nesting_histogram():
    h = nesting_histogram(asm("block; loop; end; block; end; end; block; end"))
    assert h == {1: 2, 2: 2}


def test_metrics_no_table():
    assert count_metrics(load_fixture("add").module).elem_entries == 0


def test_metrics_calls20():
    mt = count_metrics(load_fixture("calls20").module)
    assert (mt.num_call, mt.num_call_indirect) == (20, 0)


def test_stack_states_deterministic():
    fx = load_fixture("stack_heavy")
    ctx = FuncContext.of(fx.module, fx.entry)
    body = fx.module.body_of(fx.entry).body
    assert compute_stack_states(body, ctx) == compute_stack_states(body, ctx)


def test_fixtures_validate():
    from wasmobf.fixtures import corpus
    for fx in corpus():
        assert validate_module(fx.module).ok, fx.name


@given(st.integers(0, 2 ** 32))
def test_generated_modules_validate(seed):
    from wasmobf.gen import random_module
    assert validate_module(random_module(random.Random(seed), runnable=False)).ok
