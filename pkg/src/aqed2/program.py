"""Instruction-level program representation shared by lowered models and the SSA view.

A program is a tuple of instructions; executing one instruction is one transition
step.  Operands are *keys*: integer cell indices in lowered models, value names in
the SSA view.  Every value is an unsigned bitvector of one uniform width.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Hashable, Iterable, Union

import numpy as np

BINARY_OPS = {
    "add", "sub", "mul", "and", "or", "xor", "shl", "shr",
    "eq", "ne", "ult", "ule", "ugt", "uge",
}
UNARY_OPS = {"not", "neg"}
COMPARISONS = {"eq", "ne", "ult", "ule", "ugt", "uge"}

_SYMBOL = {
    "add": "+", "sub": "-", "mul": "*", "and": "&", "or": "|", "xor": "^",
    "shl": "<<", "shr": ">>", "eq": "==", "ne": "!=", "ult": "<", "ule": "<=",
    "ugt": ">", "uge": ">=",
}


@dataclass(frozen=True)
class Const:
    value: int


@dataclass(frozen=True)
class Ref:
    key: Hashable


@dataclass(frozen=True)
class Op:
    op: str
    args: tuple


@dataclass(frozen=True)
class Load:
    """Dynamically indexed read; `cells` is row-major over `dims`."""
    cells: tuple
    dims: tuple
    index: tuple


Expr = Union[Const, Ref, Op, Load]


@dataclass(frozen=True)
class Assign:
    dst: Hashable
    expr: Expr


@dataclass(frozen=True)
class Store:
    """Dynamically indexed write: dsts[k] := value if the index selects k else srcs[k]."""
    dsts: tuple
    srcs: tuple
    dims: tuple
    index: tuple
    value: Expr


@dataclass(frozen=True)
class Copy:
    """Parallel copy dsts[k] := srcs[k]."""
    dsts: tuple
    srcs: tuple
    note: str = ""


@dataclass(frozen=True)
class Branch:
    """Falls through when cond != 0, otherwise jumps to target."""
    cond: Expr
    target: int


@dataclass(frozen=True)
class Jump:
    target: int
    dsts: tuple = ()
    srcs: tuple = ()


@dataclass(frozen=True)
class Nop:
    note: str = ""


Instr = Union[Assign, Store, Copy, Branch, Jump, Nop]


# ---------------------------------------------------------------------------
# structural helpers

def expr_refs(e: Expr, acc: set | None = None) -> set:
    if acc is None:
        acc = set()
    if isinstance(e, Ref):
        acc.add(e.key)
    elif isinstance(e, Op):
        for a in e.args:
            expr_refs(a, acc)
    elif isinstance(e, Load):
        acc.update(e.cells)
        for a in e.index:
            expr_refs(a, acc)
    return acc


def map_expr(e: Expr, f: Callable) -> Expr:
    if isinstance(e, Ref):
        return Ref(f(e.key))
    if isinstance(e, Op):
        return Op(e.op, tuple(map_expr(a, f) for a in e.args))
    if isinstance(e, Load):
        return Load(tuple(f(c) for c in e.cells), e.dims,
                    tuple(map_expr(a, f) for a in e.index))
    return e


def instr_reads(ins: Instr) -> set:
    if isinstance(ins, Assign):
        return expr_refs(ins.expr)
    if isinstance(ins, Store):
        acc = set(ins.srcs)
        for a in ins.index:
            expr_refs(a, acc)
        return expr_refs(ins.value, acc)
    if isinstance(ins, (Copy, Jump)):
        return set(ins.srcs)
    if isinstance(ins, Branch):
        return expr_refs(ins.cond)
    return set()


def instr_writes(ins: Instr) -> tuple:
    if isinstance(ins, Assign):
        return (ins.dst,)
    if isinstance(ins, (Store, Copy, Jump)):
        return tuple(ins.dsts)
    return ()


def map_instr(ins: Instr, f: Callable, shift: int = 0) -> Instr:
    """Rename keys with `f` and offset jump targets by `shift`."""
    if isinstance(ins, Assign):
        return Assign(f(ins.dst), map_expr(ins.expr, f))
    if isinstance(ins, Store):
        return Store(tuple(map(f, ins.dsts)), tuple(map(f, ins.srcs)), ins.dims,
                     tuple(map_expr(a, f) for a in ins.index), map_expr(ins.value, f))
    if isinstance(ins, Copy):
        return Copy(tuple(map(f, ins.dsts)), tuple(map(f, ins.srcs)), ins.note)
    if isinstance(ins, Branch):
        return Branch(map_expr(ins.cond, f), ins.target + shift)
    if isinstance(ins, Jump):
        return Jump(ins.target + shift, tuple(map(f, ins.dsts)), tuple(map(f, ins.srcs)))
    return ins


def is_straight_line(program: Iterable[Instr]) -> bool:
    return not any(isinstance(i, (Branch, Jump)) for i in program)


def format_expr(e: Expr, name: Callable = str) -> str:
    if isinstance(e, Const):
        return str(e.value)
    if isinstance(e, Ref):
        return name(e.key)
    if isinstance(e, Load):
        idx = "".join(f"[{format_expr(a, name)}]" for a in e.index)
        return f"{{{name(e.cells[0])}..{name(e.cells[-1])}}}{idx}"
    if e.op == "ite":
        c, a, b = (format_expr(x, name) for x in e.args)
        return f"({c} ? {a} : {b})"
    if e.op == "not":
        return f"~{format_expr(e.args[0], name)}"
    if e.op == "neg":
        return f"-{format_expr(e.args[0], name)}"
    a, b = (format_expr(x, name) for x in e.args)
    return f"({a} {_SYMBOL[e.op]} {b})"


def format_instr(ins: Instr, name: Callable = str) -> str:
    if isinstance(ins, Assign):
        return f"{name(ins.dst)} = {format_expr(ins.expr, name)}"
    if isinstance(ins, Store):
        idx = "".join(f"[{format_expr(a, name)}]" for a in ins.index)
        return (f"store {{{name(ins.dsts[0])}..{name(ins.dsts[-1])}}} <- "
                f"{{{name(ins.srcs[0])}..{name(ins.srcs[-1])}}}{idx} = {format_expr(ins.value, name)}")
    if isinstance(ins, Copy):
        pairs = ", ".join(f"{name(d)} = {name(s)}" for d, s in zip(ins.dsts, ins.srcs))
        return f"copy{'(' + ins.note + ')' if ins.note else ''} {pairs}".rstrip()
    if isinstance(ins, Branch):
        return f"if !{format_expr(ins.cond, name)} goto {ins.target}"
    if isinstance(ins, Jump):
        pairs = ", ".join(f"{name(d)} = {name(s)}" for d, s in zip(ins.dsts, ins.srcs))
        return f"goto {ins.target}" + (f" with {pairs}" if pairs else "")
    return f"nop{' ' + ins.note if ins.note else ''}"


# ---------------------------------------------------------------------------
# concrete semantics on python ints

def _scalar_op(op: str, args: list, mask: int, width: int) -> int:
    if op == "ite":
        return args[1] if args[0] else args[2]
    if op == "not":
        return ~args[0] & mask
    if op == "neg":
        return -args[0] & mask
    a, b = args
    if op == "add":
        return (a + b) & mask
    if op == "sub":
        return (a - b) & mask
    if op == "mul":
        return (a * b) & mask
    if op == "and":
        return a & b
    if op == "or":
        return a | b
    if op == "xor":
        return a ^ b
    if op == "shl":
        return (a << b) & mask if b < width else 0
    if op == "shr":
        return a >> b if b < width else 0
    if op == "eq":
        return int(a == b)
    if op == "ne":
        return int(a != b)
    if op == "ult":
        return int(a < b)
    if op == "ule":
        return int(a <= b)
    if op == "ugt":
        return int(a > b)
    if op == "uge":
        return int(a >= b)
    raise ValueError(f"unknown operator {op}")


def _flat_index(values: list, dims: tuple):
    flat = 0
    for v, d in zip(values, dims):
        if v >= d:
            return None
        flat = flat * d + v
    return flat


def eval_scalar(e: Expr, read: Callable, width: int, oob: Callable | None = None) -> int:
    mask = (1 << width) - 1
    if isinstance(e, Const):
        return e.value & mask
    if isinstance(e, Ref):
        return read(e.key)
    if isinstance(e, Op):
        if e.op == "ite":
            c = eval_scalar(e.args[0], read, width, oob)
            return eval_scalar(e.args[1] if c else e.args[2], read, width, oob)
        return _scalar_op(e.op, [eval_scalar(a, read, width, oob) for a in e.args], mask, width)
    if isinstance(e, Load):
        flat = _flat_index([eval_scalar(a, read, width, oob) for a in e.index], e.dims)
        if flat is None:
            if oob:
                oob("read", e.cells[0])
            return 0
        return read(e.cells[flat])
    raise TypeError(e)


def exec_scalar(ins: Instr, pc: int, read: Callable, width: int, oob: Callable | None = None):
    """Execute one instruction; returns (next_pc, [(key, value), ...])."""
    if isinstance(ins, Assign):
        return pc + 1, [(ins.dst, eval_scalar(ins.expr, read, width, oob))]
    if isinstance(ins, Store):
        value = eval_scalar(ins.value, read, width, oob)
        flat = _flat_index([eval_scalar(a, read, width, oob) for a in ins.index], ins.dims)
        if flat is None and oob:
            oob("write", ins.dsts[0])
        writes = [(d, value if k == flat else read(s))
                  for k, (d, s) in enumerate(zip(ins.dsts, ins.srcs))]
        return pc + 1, writes
    if isinstance(ins, Copy):
        return pc + 1, [(d, read(s)) for d, s in zip(ins.dsts, ins.srcs)]
    if isinstance(ins, Branch):
        return (pc + 1 if eval_scalar(ins.cond, read, width, oob) else ins.target), []
    if isinstance(ins, Jump):
        return ins.target, [(d, read(s)) for d, s in zip(ins.dsts, ins.srcs)]
    return pc + 1, []


# ---------------------------------------------------------------------------
# vectorised semantics on numpy arrays (one column per concrete case)

def _vector_op(op: str, args: list, mask: int, width: int):
    u = np.uint64
    if op == "ite":
        return np.where(args[0] != 0, args[1], args[2])
    if op == "not":
        return ~args[0] & u(mask)
    if op == "neg":
        return (u(0) - args[0]) & u(mask)
    a, b = args
    if op == "add":
        return (a + b) & u(mask)
    if op == "sub":
        return (a - b) & u(mask)
    if op == "mul":
        return (a * b) & u(mask)
    if op == "and":
        return a & b
    if op == "or":
        return a | b
    if op == "xor":
        return a ^ b
    if op in ("shl", "shr"):
        big = b >= u(width)
        amount = np.minimum(b, u(width))
        shifted = (a << amount) & u(mask) if op == "shl" else a >> amount
        return np.where(big, u(0), shifted)
    cmp = {"eq": np.equal, "ne": np.not_equal, "ult": np.less, "ule": np.less_equal,
           "ugt": np.greater, "uge": np.greater_equal}[op]
    return cmp(a, b).astype(np.uint64)


def eval_vector(e: Expr, read: Callable, width: int):
    mask = (1 << width) - 1
    if isinstance(e, Const):
        return np.uint64(e.value & mask)
    if isinstance(e, Ref):
        return read(e.key)
    if isinstance(e, Op):
        return _vector_op(e.op, [eval_vector(a, read, width) for a in e.args], mask, width)
    if isinstance(e, Load):
        ok, flat = _vector_flat([eval_vector(a, read, width) for a in e.index], e.dims)
        out = np.uint64(0)
        for k, cell in enumerate(e.cells):
            out = np.where(ok & (flat == k), read(cell), out)
        return out
    raise TypeError(e)


def _vector_flat(values: list, dims: tuple):
    ok = np.bool_(True)
    flat = np.uint64(0)
    for v, d in zip(values, dims):
        ok = ok & (v < np.uint64(d))
        flat = flat * np.uint64(d) + v
    return ok, flat


def exec_vector(program: Iterable[Instr], env: dict, width: int, default=None) -> dict:
    """Run a straight-line program over `env` (key -> array), updating it in place."""
    zero = np.uint64(0) if default is None else default

    def read(k):
        return env.get(k, zero)

    for ins in program:
        if isinstance(ins, Assign):
            env[ins.dst] = eval_vector(ins.expr, read, width)
        elif isinstance(ins, Store):
            value = eval_vector(ins.value, read, width)
            ok, flat = _vector_flat([eval_vector(a, read, width) for a in ins.index], ins.dims)
            new = [np.where(ok & (flat == k), value, read(s)) for k, s in enumerate(ins.srcs)]
            for d, v in zip(ins.dsts, new):
                env[d] = v
        elif isinstance(ins, Copy):
            new = [read(s) for s in ins.srcs]
            for d, v in zip(ins.dsts, new):
                env[d] = v
        elif isinstance(ins, Nop):
            continue
        else:
            raise ValueError("vectorised execution needs a straight-line program")
    return env
