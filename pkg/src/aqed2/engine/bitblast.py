"""Tseitin bit-blasting of term DAGs into clause form.

Literals are DIMACS-style signed integers.  Variable 1 is the constant TRUE.
Gates are structurally hashed so identical sub-circuits share variables.
"""
from __future__ import annotations

from .terms import TermManager


class Blaster:
    def __init__(self, tm: TermManager):
        self.tm = tm
        self.n_vars = 1
        self.clauses: list = [[1]]
        self.T = 1
        self.F = -1
        self.gates: dict = {}
        self.bits: dict = {}  # term -> list of literals, LSB first
        self.var_bits: dict = {}  # variable name -> literals

    def new_var(self) -> int:
        self.n_vars += 1
        return self.n_vars

    # gates ----------------------------------------------------------------
    def AND(self, a: int, b: int) -> int:
        if a == self.F or b == self.F or a == -b:
            return self.F
        if a == self.T:
            return b
        if b == self.T or a == b:
            return a
        if a > b:
            a, b = b, a
        key = ("and", a, b)
        o = self.gates.get(key)
        if o is None:
            o = self.new_var()
            self.clauses.append([-o, a])
            self.clauses.append([-o, b])
            self.clauses.append([o, -a, -b])
            self.gates[key] = o
        return o

    def OR(self, a: int, b: int) -> int:
        return -self.AND(-a, -b)

    def XOR(self, a: int, b: int) -> int:
        if a == self.F:
            return b
        if b == self.F:
            return a
        if a == self.T:
            return -b
        if b == self.T:
            return -a
        if a == b:
            return self.F
        if a == -b:
            return self.T
        sign = 1
        if a < 0:
            a, sign = -a, -sign
        if b < 0:
            b, sign = -b, -sign
        if a > b:
            a, b = b, a
        key = ("xor", a, b)
        o = self.gates.get(key)
        if o is None:
            o = self.new_var()
            self.clauses.append([-o, a, b])
            self.clauses.append([-o, -a, -b])
            self.clauses.append([o, -a, b])
            self.clauses.append([o, a, -b])
            self.gates[key] = o
        return o * sign

    def MUX(self, s: int, a: int, b: int) -> int:
        """s ? a : b"""
        if s == self.T:
            return a
        if s == self.F:
            return b
        if a == b:
            return a
        if s < 0:
            s, a, b = -s, b, a
        if a == self.T and b == self.F:
            return s
        if a == self.F and b == self.T:
            return -s
        if a == self.T:
            return self.OR(s, b)
        if a == self.F:
            return self.AND(-s, b)
        if b == self.T:
            return self.OR(-s, a)
        if b == self.F:
            return self.AND(s, a)
        key = ("mux", s, a, b)
        o = self.gates.get(key)
        if o is None:
            o = self.new_var()
            self.clauses.append([-s, -a, o])
            self.clauses.append([-s, a, -o])
            self.clauses.append([s, -b, o])
            self.clauses.append([s, b, -o])
            self.clauses.append([-a, -b, o])
            self.clauses.append([a, b, -o])
            self.gates[key] = o
        return o

    def AND_all(self, lits) -> int:
        out = self.T
        for lit in lits:
            out = self.AND(out, lit)
        return out

    def OR_all(self, lits) -> int:
        out = self.F
        for lit in lits:
            out = self.OR(out, lit)
        return out

    # word-level circuits -------------------------------------------------------
    def adder(self, a: list, b: list, carry: int) -> list:
        out = []
        for x, y in zip(a, b):
            t = self.XOR(x, y)
            out.append(self.XOR(t, carry))
            carry = self.OR(self.AND(x, y), self.AND(carry, t))
        return out

    def multiplier(self, a: list, b: list) -> list:
        w = len(a)
        acc = [self.F] * w
        for i, bi in enumerate(b):
            if bi == self.F:
                continue
            partial = [self.F] * i + [self.AND(x, bi) for x in a[:w - i]]
            acc = self.adder(acc, partial, self.F)
        return acc

    def shifter(self, a: list, amount: list, left: bool) -> list:
        w = len(a)
        cur = list(a)
        overflow = self.F
        for k, s in enumerate(amount):
            dist = 1 << k
            if dist >= w:
                overflow = self.OR(overflow, s)
                continue
            if left:
                shifted = [self.F] * dist + cur[:w - dist]
            else:
                shifted = cur[dist:] + [self.F] * dist
            cur = [self.MUX(s, x, y) for x, y in zip(shifted, cur)]
        return [self.AND(-overflow, x) for x in cur]

    def less_than(self, a: list, b: list) -> int:
        lt = self.F
        for x, y in zip(a, b):
            # from LSB upwards: higher bits take precedence
            lt = self.MUX(self.XOR(x, y), self.AND(-x, y), lt)
        return lt

    def equal(self, a: list, b: list) -> int:
        return self.AND_all(-self.XOR(x, y) for x, y in zip(a, b))

    # term traversal -------------------------------------------------------------
    def blast(self, t: int) -> list:
        tm = self.tm
        stack = [t]
        while stack:
            u = stack[-1]
            if u in self.bits:
                stack.pop()
                continue
            pending = [a for a in tm.args[u] if a not in self.bits]
            if pending:
                stack.extend(pending)
                continue
            stack.pop()
            self.bits[u] = self._node(u)
        return self.bits[t]

    def _node(self, u: int) -> list:
        tm = self.tm
        kind, w = tm.kinds[u], tm.widths[u]
        args = [self.bits[a] for a in tm.args[u]]
        if kind == "const":
            v = tm.extra[u]
            return [self.T if (v >> i) & 1 else self.F for i in range(w)]
        if kind == "var":
            lits = [self.new_var() for _ in range(w)]
            self.var_bits[tm.extra[u]] = lits
            return lits
        if kind == "not":
            return [-x for x in args[0]]
        if kind == "and":
            return [self.AND(x, y) for x, y in zip(*args)]
        if kind == "or":
            return [self.OR(x, y) for x, y in zip(*args)]
        if kind == "xor":
            return [self.XOR(x, y) for x, y in zip(*args)]
        if kind == "add":
            return self.adder(args[0], args[1], self.F)
        if kind == "sub":
            return self.adder(args[0], [-y for y in args[1]], self.T)
        if kind == "neg":
            return self.adder([self.F] * w, [-y for y in args[0]], self.T)
        if kind == "mul":
            return self.multiplier(args[0], args[1])
        if kind == "shl":
            return self.shifter(args[0], args[1], True)
        if kind == "shr":
            return self.shifter(args[0], args[1], False)
        if kind == "eq":
            return [self.equal(args[0], args[1])]
        if kind == "ult":
            return [self.less_than(args[0], args[1])]
        if kind == "ite":
            s = args[0][0]
            return [self.MUX(s, x, y) for x, y in zip(args[1], args[2])]
        if kind == "zext":
            return args[0] + [self.F] * (w - len(args[0]))
        raise ValueError(f"cannot bit-blast {kind}")

    def assert_true(self, t: int) -> None:
        lit = self.blast(t)[0]
        self.clauses.append([lit])

    def decode(self, model: list) -> dict:
        """Variable name -> value from a solver model (model[v] is truth of v)."""
        out = {}
        for name, lits in self.var_bits.items():
            v = 0
            for i, lit in enumerate(lits):
                bit = model[abs(lit)] if lit > 0 else not model[abs(lit)]
                if bit:
                    v |= 1 << i
            out[name] = v
        return out


def to_dimacs(n_vars: int, clauses: list, comments: list = ()) -> str:
    lines = [f"c {c}" for c in comments]
    lines.append(f"p cnf {n_vars} {len(clauses)}")
    lines.extend(" ".join(str(l) for l in cl) + " 0" for cl in clauses)
    return "\n".join(lines) + "\n"
