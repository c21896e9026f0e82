"""Minimal line-oriented assembler for building IR bodies in fixtures and tests.

One instruction per line (or separated by ``;``); ``block``/``loop``/``if``
take an optional result type and are closed by ``end``; ``#`` starts a comment.
"""

from __future__ import annotations

from . import opcodes as op
from .binfmt import Instr
from .interp import to_bits


def _int(tok: str) -> int:
    return int(tok, 0)


def _parse_line(toks: list[str]) -> Instr:
    name, args = toks[0], toks[1:]
    if name not in op.BY_NAME:
        raise ValueError(f"unknown instruction {name!r}")
    kind = op.BY_NAME[name][1]
    if kind == op.NONE or kind == op.MEMIDX:
        return Instr(name)
    if kind in (op.LABEL, op.FUNC, op.LOCAL, op.GLOBAL, op.CALL_IND):
        return Instr(name, _int(args[0]))
    if kind == op.BR_TABLE:
        vals = [_int(a) for a in args]
        return Instr(name, (tuple(vals[:-1]), vals[-1]))
    if kind == op.MEMARG:
        align, offset = op.NATURAL_ALIGN[name], 0
        for a in args:
            k, v = a.split("=")
            if k == "offset":
                offset = _int(v)
            elif k == "align":
                align = _int(v)
        return Instr(name, (align, offset))
    if kind in (op.CONST_I32, op.CONST_I64):
        v = _int(args[0])
        bits = 32 if kind == op.CONST_I32 else 64
        v &= (1 << bits) - 1
        return Instr(name, v - (1 << bits) if v >> (bits - 1) else v)
    if kind in (op.CONST_F32, op.CONST_F64):
        return Instr(name, to_bits(kind, float(args[0])))
    raise ValueError(f"cannot assemble {name}")


def asm(text: str) -> list[Instr]:
    """Assemble ``text`` into a nested instruction list."""
    lines = []
    for raw in text.replace(";", "\n").splitlines():
        raw = raw.split("#", 1)[0].strip()
        if raw:
            lines.append(raw.split())
    stack: list[tuple[Instr | None, list[Instr]]] = [(None, [])]
    for toks in lines:
        name = toks[0]
        if name in op.STRUCTURED:
            bt = toks[1] if len(toks) > 1 else None
            ins = Instr(name, bt, [])
            stack[-1][1].append(ins)
            stack.append((ins, ins.body))
        elif name == "else":
            ins, _ = stack.pop()
            if ins is None or ins.op != "if":
                raise ValueError("else without if")
            ins.orelse = []
            stack.append((ins, ins.orelse))
        elif name == "end":
            if len(stack) == 1:
                raise ValueError("unbalanced end")
            stack.pop()
        else:
            stack[-1][1].append(_parse_line(toks))
    if len(stack) != 1:
        raise ValueError("missing end")
    return stack[0][1]
