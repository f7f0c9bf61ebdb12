"""Direct AST interpreter for ABK programs.

Kept deliberately separate from the lowering so the two can be compared.
Sub-expressions built only from constants and loop variables are computed
exactly; everything touching program variables wraps at the program width.
"""
from __future__ import annotations

from ..errors import AbkSyntaxError, StepBudgetExceeded
from .ast import (AbkProgram, AssignStmt, Binary, Block, Call, ForStmt, Index, Name, Num,
                  Ternary, Unary, WhileStmt)

_RUNTIME = {
    "+": lambda a, b, m, w: (a + b) & m,
    "-": lambda a, b, m, w: (a - b) & m,
    "*": lambda a, b, m, w: (a * b) & m,
    "^": lambda a, b, m, w: a ^ b,
    "&": lambda a, b, m, w: a & b,
    "|": lambda a, b, m, w: a | b,
    "<<": lambda a, b, m, w: (a << b) & m if b < w else 0,
    ">>": lambda a, b, m, w: a >> b if b < w else 0,
    "==": lambda a, b, m, w: int(a == b),
    "!=": lambda a, b, m, w: int(a != b),
    "<": lambda a, b, m, w: int(a < b),
    "<=": lambda a, b, m, w: int(a <= b),
    ">": lambda a, b, m, w: int(a > b),
    ">=": lambda a, b, m, w: int(a >= b),
    "&&": lambda a, b, m, w: int(bool(a) and bool(b)),
    "||": lambda a, b, m, w: int(bool(a) or bool(b)),
}
_STATIC = {
    "+": lambda a, b: a + b, "-": lambda a, b: a - b, "*": lambda a, b: a * b,
    "/": lambda a, b: a // b, "%": lambda a, b: a % b, "^": lambda a, b: a ^ b,
    "&": lambda a, b: a & b, "|": lambda a, b: a | b, "<<": lambda a, b: a << b,
    ">>": lambda a, b: a >> b, "==": lambda a, b: int(a == b), "!=": lambda a, b: int(a != b),
    "<": lambda a, b: int(a < b), "<=": lambda a, b: int(a <= b), ">": lambda a, b: int(a > b),
    ">=": lambda a, b: int(a >= b), "&&": lambda a, b: int(bool(a and b)),
    "||": lambda a, b: int(bool(a or b)),
}


class _Static(int):
    """Marks an exactly computed compile-time value."""


class Interpreter:
    def __init__(self, prog: AbkProgram, memory: dict, budget: int = 1 << 22):
        self.prog = prog
        self.mem = memory
        self.width = prog.width
        self.mask = (1 << prog.width) - 1
        self.budget = budget
        self.steps = 0
        self.oob: list = []

    # values ----------------------------------------------------------------
    def rt(self, v) -> int:
        return int(v) & self.mask

    def value(self, node, env: dict):
        if isinstance(node, Num):
            return _Static(node.value)
        if isinstance(node, Name):
            if node.id in env:
                return env[node.id]
            if node.id in self.prog.consts:
                return _Static(self.prog.consts[node.id])
            decl = self.prog.decls.get(node.id)
            if node.id in self.mem and (decl is None or not decl.dims):
                return self.mem[node.id][0]
            raise AbkSyntaxError(f"unknown scalar {node.id!r}")
        if isinstance(node, Index):
            flat = self.flat(node, env)
            if flat is None:
                self.oob.append(("read", node.name))
                return 0
            return self.mem[node.name][flat]
        if isinstance(node, Unary):
            v = self.value(node.operand, env)
            if isinstance(v, _Static):
                return _Static({"-": -v, "~": ~v, "!": int(not v)}[node.op])
            return {"-": -v & self.mask, "~": ~v & self.mask, "!": int(v == 0)}[node.op]
        if isinstance(node, Ternary):
            c = self.value(node.cond, env)
            v = self.value(node.then if c else node.other, env)
            # a runtime condition makes the result a runtime value
            return v if isinstance(c, _Static) else self.rt(v)
        if isinstance(node, Binary):
            a = self.value(node.left, env)
            b = self.value(node.right, env)
            if isinstance(a, _Static) and isinstance(b, _Static):
                return _Static(_STATIC[node.op](a, b))
            if node.op in ("/", "%"):
                raise AbkSyntaxError("division needs compile-time operands")
            return _RUNTIME[node.op](self.rt(a), self.rt(b), self.mask, self.width)
        if isinstance(node, Call):
            args = [self.value(a, env) for a in node.args]
            if node.fn in ("rotl", "rotr"):
                x = self.rt(args[0])
                c = int(args[1]) % self.width
                if node.fn == "rotr":
                    c = (self.width - c) % self.width
                if c == 0:
                    return x
                return ((x << c) | (x >> (self.width - c))) & self.mask
            if all(isinstance(a, _Static) for a in args):
                return _Static(min(args) if node.fn == "min" else max(args))
            a, b = (self.rt(v) for v in args)
            return min(a, b) if node.fn == "min" else max(a, b)
        raise TypeError(node)

    def flat(self, node: Index, env: dict):
        decl = self.prog.decls.get(node.name)
        if decl is None or len(node.indices) != len(decl.dims):
            raise AbkSyntaxError(f"bad array access {node.name}")
        flat = 0
        ok = True
        for idx, d in zip(node.indices, decl.dims):
            v = self.value(idx, env)
            v = int(v) if isinstance(v, _Static) else v
            if not 0 <= v < d:
                ok = False
            flat = flat * d + v
        return flat if ok else None

    # statements --------------------------------------------------------------
    def tick(self):
        self.steps += 1
        if self.steps > self.budget:
            raise StepBudgetExceeded(f"interpreter budget of {self.budget} exhausted", self.steps)

    def run(self, stmts: list, env: dict | None = None) -> None:
        env = {} if env is None else env
        for s in stmts:
            if isinstance(s, AssignStmt):
                self.tick()
                v = self.rt(self.value(s.value, env))
                t = s.target
                if isinstance(t, Name):
                    if t.id not in self.mem:
                        raise AbkSyntaxError(f"assignment to undeclared {t.id!r}")
                    self.mem[t.id][0] = v
                else:
                    flat = self.flat(t, env)
                    if flat is None:
                        self.oob.append(("write", t.name))
                    else:
                        self.mem[t.name][flat] = v
            elif isinstance(s, ForStmt) and not s.dynamic:
                lo = int(self.value(s.lo, env))
                hi = int(self.value(s.hi, env))
                for i in range(lo, hi):
                    self.run(s.body, {**env, s.var: _Static(i)})
            elif isinstance(s, ForStmt):
                # bounds depending on runtime values: the loop variable lives in memory
                self.mem[s.var] = [self.rt(self.value(s.lo, env))]
                while True:
                    self.tick()
                    if not self.rt(self.value(s.hi, env)) > self.mem[s.var][0]:
                        break
                    self.run(s.body, env)
                    self.mem[s.var][0] = (self.mem[s.var][0] + 1) & self.mask
            elif isinstance(s, WhileStmt):
                while True:
                    self.tick()
                    if not self.value(s.cond, env):
                        break
                    self.run(s.body, env)
            elif isinstance(s, Block):
                self.run(s.body, env)


def fresh_memory(prog: AbkProgram) -> dict:
    """Memory dict with every variable at its initializer (or zero)."""
    return {name: list(d.init) if d.init is not None else [0] * d.size
            for name, d in prog.decls.items()}


def interpret(prog: AbkProgram, memory: dict | None = None, stmts: list | None = None,
              budget: int = 1 << 22) -> dict:
    """Run `stmts` (default: the whole program) on `memory`, returning the memory dict."""
    memory = fresh_memory(prog) if memory is None else memory
    Interpreter(prog, memory, budget).run(prog.body if stmts is None else stmts)
    return memory
