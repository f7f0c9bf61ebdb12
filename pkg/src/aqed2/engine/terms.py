"""Hash-consed bitvector terms with constant folding.

Booleans are width-1 bitvectors.  Term handles are small integers indexing the
manager's node table; structurally equal terms share one handle.
"""
from __future__ import annotations

from dataclasses import dataclass, field

COMMUTATIVE = {"add", "mul", "and", "or", "xor", "eq"}


@dataclass
class TermManager:
    kinds: list = field(default_factory=list)
    widths: list = field(default_factory=list)
    args: list = field(default_factory=list)
    extra: list = field(default_factory=list)
    table: dict = field(default_factory=dict)
    variables: dict = field(default_factory=dict)  # name -> term

    def __len__(self):
        return len(self.kinds)

    def _mk(self, kind: str, width: int, args: tuple = (), extra=None) -> int:
        key = (kind, width, args, extra)
        t = self.table.get(key)
        if t is None:
            t = len(self.kinds)
            self.kinds.append(kind)
            self.widths.append(width)
            self.args.append(args)
            self.extra.append(extra)
            self.table[key] = t
        return t

    # leaves ---------------------------------------------------------------
    def const(self, value: int, width: int) -> int:
        return self._mk("const", width, (), value & ((1 << width) - 1))

    def var(self, name: str, width: int) -> int:
        if name in self.variables:
            t = self.variables[name]
            if self.widths[t] != width:
                raise ValueError(f"variable {name} redeclared with another width")
            return t
        t = self._mk("var", width, (), name)
        self.variables[name] = t
        return t

    def true(self) -> int:
        return self.const(1, 1)

    def false(self) -> int:
        return self.const(0, 1)

    def is_const(self, t: int) -> bool:
        return self.kinds[t] == "const"

    def value(self, t: int) -> int:
        return self.extra[t]

    def width(self, t: int) -> int:
        return self.widths[t]

    def _ones(self, w: int) -> int:
        return (1 << w) - 1

    # operators ------------------------------------------------------------
    def op(self, kind: str, *args: int) -> int:
        return getattr(self, "mk_" + kind)(*args)

    def _binary(self, kind, a, b):
        w = self.widths[a]
        if self.widths[b] != w:
            raise ValueError(f"{kind}: width mismatch {w} vs {self.widths[b]}")
        if kind in COMMUTATIVE and b < a:
            a, b = b, a
        return a, b, w

    def mk_add(self, a, b):
        a, b, w = self._binary("add", a, b)
        ca, cb = self.is_const(a), self.is_const(b)
        if ca and cb:
            return self.const(self.value(a) + self.value(b), w)
        if ca and self.value(a) == 0:
            return b
        if cb and self.value(b) == 0:
            return a
        return self._mk("add", w, (a, b))

    def mk_sub(self, a, b):
        a, b, w = self._binary("sub", a, b)
        if a == b:
            return self.const(0, w)
        if self.is_const(a) and self.is_const(b):
            return self.const(self.value(a) - self.value(b), w)
        if self.is_const(b) and self.value(b) == 0:
            return a
        return self._mk("sub", w, (a, b))

    def mk_mul(self, a, b):
        a, b, w = self._binary("mul", a, b)
        ca, cb = self.is_const(a), self.is_const(b)
        if ca and cb:
            return self.const(self.value(a) * self.value(b), w)
        for c, o in ((a, b), (b, a)):
            if self.is_const(c):
                if self.value(c) == 0:
                    return c
                if self.value(c) == 1:
                    return o
        return self._mk("mul", w, (a, b))

    def mk_and(self, a, b):
        a, b, w = self._binary("and", a, b)
        if a == b:
            return a
        for c, o in ((a, b), (b, a)):
            if self.is_const(c):
                if self.value(c) == 0:
                    return c
                if self.value(c) == self._ones(w):
                    return o
        if self._complementary(a, b):
            return self.const(0, w)
        return self._mk("and", w, (a, b))

    def mk_or(self, a, b):
        a, b, w = self._binary("or", a, b)
        if a == b:
            return a
        for c, o in ((a, b), (b, a)):
            if self.is_const(c):
                if self.value(c) == 0:
                    return o
                if self.value(c) == self._ones(w):
                    return c
        if self._complementary(a, b):
            return self.const(self._ones(w), w)
        return self._mk("or", w, (a, b))

    def mk_xor(self, a, b):
        a, b, w = self._binary("xor", a, b)
        if a == b:
            return self.const(0, w)
        if self.is_const(a) and self.is_const(b):
            return self.const(self.value(a) ^ self.value(b), w)
        for c, o in ((a, b), (b, a)):
            if self.is_const(c):
                if self.value(c) == 0:
                    return o
                if self.value(c) == self._ones(w):
                    return self.mk_not(o)
        return self._mk("xor", w, (a, b))

    def _complementary(self, a, b) -> bool:
        return (self.kinds[a] == "not" and self.args[a][0] == b) or \
               (self.kinds[b] == "not" and self.args[b][0] == a)

    def mk_not(self, a):
        w = self.widths[a]
        if self.is_const(a):
            return self.const(~self.value(a), w)
        if self.kinds[a] == "not":
            return self.args[a][0]
        return self._mk("not", w, (a,))

    def mk_neg(self, a):
        w = self.widths[a]
        if self.is_const(a):
            return self.const(-self.value(a), w)
        return self._mk("neg", w, (a,))

    def _shift(self, kind, a, b):
        a, b, w = self._binary(kind, a, b)
        if self.is_const(b):
            s = self.value(b)
            if s == 0:
                return a
            if s >= w:
                return self.const(0, w)
            if self.is_const(a):
                v = self.value(a)
                return self.const(v << s if kind == "shl" else v >> s, w)
        if self.is_const(a) and self.value(a) == 0:
            return a
        return self._mk(kind, w, (a, b))

    def mk_shl(self, a, b):
        return self._shift("shl", a, b)

    def mk_shr(self, a, b):
        return self._shift("shr", a, b)

    def mk_eq(self, a, b):
        a, b, w = self._binary("eq", a, b)
        if a == b:
            return self.true()
        if self.is_const(a) and self.is_const(b):
            return self.const(int(self.value(a) == self.value(b)), 1)
        if w == 1:
            # a == b over single bits is xnor
            return self.mk_not(self.mk_xor(a, b))
        return self._mk("eq", 1, (a, b))

    def mk_ne(self, a, b):
        return self.mk_not(self.mk_eq(a, b))

    def mk_ult(self, a, b):
        a, b, w = self._binary("ult", a, b)
        if a == b:
            return self.false()
        if self.is_const(b) and self.value(b) == 0:
            return self.false()
        if self.is_const(a) and self.is_const(b):
            return self.const(int(self.value(a) < self.value(b)), 1)
        return self._mk("ult", 1, (a, b))

    def mk_ule(self, a, b):
        return self.mk_not(self.mk_ult(b, a))

    def mk_ugt(self, a, b):
        return self.mk_ult(b, a)

    def mk_uge(self, a, b):
        return self.mk_not(self.mk_ult(a, b))

    def mk_ite(self, c, a, b):
        if self.widths[c] != 1:
            raise ValueError("ite condition must be boolean")
        if self.widths[a] != self.widths[b]:
            raise ValueError("ite branches differ in width")
        if self.is_const(c):
            return a if self.value(c) else b
        if a == b:
            return a
        if self.kinds[c] == "not":
            c, a, b = self.args[c][0], b, a
        if self.widths[a] == 1 and self.is_const(a) and self.is_const(b):
            return c if self.value(a) else self.mk_not(c)
        return self._mk("ite", self.widths[a], (c, a, b))

    def mk_zext(self, a, width: int):
        w = self.widths[a]
        if w == width:
            return a
        if self.is_const(a):
            return self.const(self.value(a), width)
        return self._mk("zext", width, (a,), width)

    # boolean helpers ------------------------------------------------------------
    def conj(self, terms) -> int:
        out = self.true()
        for t in terms:
            out = self.mk_and(out, t)
        return out

    def disj(self, terms) -> int:
        out = self.false()
        for t in terms:
            out = self.mk_or(out, t)
        return out

    def nonzero(self, a) -> int:
        if self.widths[a] == 1:
            return a
        return self.mk_ne(a, self.const(0, self.widths[a]))

    def substitute(self, t: int, mapping: dict, cache: dict | None = None) -> int:
        """Rebuild t with terms replaced per `mapping` (term -> term), re-simplifying."""
        cache = {} if cache is None else cache
        cache.update((k, v) for k, v in mapping.items() if k not in cache)
        stack = [t]
        while stack:
            u = stack[-1]
            if u in cache:
                stack.pop()
                continue
            pending = [a for a in self.args[u] if a not in cache]
            if pending:
                stack.extend(pending)
                continue
            stack.pop()
            new = [cache[a] for a in self.args[u]]
            kind = self.kinds[u]
            if new == list(self.args[u]):
                cache[u] = u
            elif kind == "zext":
                cache[u] = self.mk_zext(new[0], self.widths[u])
            else:
                cache[u] = getattr(self, "mk_" + kind)(*new)
        return cache[t]

    def evaluate(self, t: int, assignment: dict, cache: dict | None = None) -> int:
        """Concrete value of term t under variable-name -> value assignment."""
        cache = {} if cache is None else cache
        stack = [t]
        while stack:
            u = stack[-1]
            if u in cache:
                stack.pop()
                continue
            pending = [a for a in self.args[u] if a not in cache]
            if pending:
                stack.extend(pending)
                continue
            stack.pop()
            cache[u] = self._eval_node(u, [cache[a] for a in self.args[u]], assignment)
        return cache[t]

    def _eval_node(self, u, vals, assignment):
        kind, w = self.kinds[u], self.widths[u]
        mask = (1 << w) - 1
        if kind == "const":
            return self.extra[u]
        if kind == "var":
            return assignment.get(self.extra[u], 0) & mask
        if kind == "zext":
            return vals[0]
        if kind == "ite":
            return vals[1] if vals[0] else vals[2]
        if kind == "not":
            return ~vals[0] & mask
        if kind == "neg":
            return -vals[0] & mask
        a, b = vals
        wa = self.widths[self.args[u][0]]
        return {
            "add": lambda: (a + b) & mask, "sub": lambda: (a - b) & mask,
            "mul": lambda: (a * b) & mask, "and": lambda: a & b, "or": lambda: a | b,
            "xor": lambda: a ^ b,
            "shl": lambda: (a << b) & mask if b < wa else 0,
            "shr": lambda: a >> b if b < wa else 0,
            "eq": lambda: int(a == b), "ult": lambda: int(a < b),
        }[kind]()
