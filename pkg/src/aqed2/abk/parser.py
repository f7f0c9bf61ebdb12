"""Parser for ABK source text.

Line comments start with ``//``.  Two comment shapes are significant: the block
markers ``// ===ACC1 START===`` / ``// ===ACC1 END===`` and nothing else.  Lines
starting with ``%NAME`` are batch directives; a directive value continues onto
following lines while its brackets are unbalanced or it ends with ``=``.
"""
from __future__ import annotations

import itertools
import re
from dataclasses import dataclass

from ..errors import AbkSyntaxError, AnnotationError, BoundError
from .ast import (AbkProgram, AllocRule, AssignStmt, BatchAnnotation, Binary, Block, Call,
                  ForStmt, Index, Name, Num, Ternary, Unary, VarDecl, WhileStmt)

MARKER = re.compile(r"^\s*//\s*===\s*(\w+)\s+(START|END)\s*===\s*$")
DIRECTIVE = re.compile(r"^\s*%(\w+)(.*)$")
TOKEN = re.compile(
    r"\s*(?:(0[xX][0-9a-fA-F]+|\d+)|([A-Za-z_]\w*)|"
    r"(\.\.|<<=|>>=|<<|>>|==|!=|<=|>=|&&|\|\||\+=|-=|\*=|\^=|&=|\|=|[-+*/%^&|~!<>=?:;,(){}\[\]]))")

KEYWORDS = {"width", "const", "var", "for", "in", "while"}
INTRINSICS = {"rotl": 2, "rotr": 2, "min": 2, "max": 2}
OUT_DIRECTIVES = {"OUT_SIZE", "OUT_BATCH_SIZE", "BATCH_MEM_OUT", "OUT_ALLOC_RULE"}
IN_DIRECTIVES = {"IN_SIZE", "IN_BATCH_SIZE", "BATCH_MEM_IN", "IN_ALLOC_RULE", "REL",
                 "ACTIONS", "ACTION_MEM", "SPEC", "SAC_REL"}
DEFAULT_WIDTH = 8


@dataclass
class Tok:
    kind: str  # num, id, op, marker, directive, eof
    value: object
    line: int
    col: int


def _strip_comment(text: str) -> str:
    pos = text.find("//")
    return text if pos < 0 else text[:pos]


def tokenize_line(text: str, line: int, col0: int = 0) -> list:
    out = []
    pos = 0
    text = _strip_comment(text)
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = TOKEN.match(text, pos)
        if not m or m.end() == pos:
            col = len(text) - len(text[pos:].lstrip()) + 1
            raise AbkSyntaxError(f"unexpected character {text[col - 1]!r}", line, col + col0)
        num, ident, op = m.groups()
        col = m.start(m.lastindex) + 1 + col0
        if num is not None:
            out.append(Tok("num", int(num, 0), line, col))
        elif ident is not None:
            out.append(Tok("id", ident, line, col))
        else:
            out.append(Tok("op", op, line, col))
        pos = m.end()
    return out


def tokenize(text: str) -> list:
    lines = text.splitlines()
    toks: list = []
    i = 0
    while i < len(lines):
        raw = lines[i]
        lineno = i + 1
        m = MARKER.match(raw)
        if m:
            toks.append(Tok("marker", (m.group(1), m.group(2)), lineno, 1))
            i += 1
            continue
        d = DIRECTIVE.match(raw)
        if d:
            value = _strip_comment(d.group(2))
            while (_depth(value) > 0 or value.rstrip().endswith("=")) and i + 1 < len(lines):
                i += 1
                value += " " + _strip_comment(lines[i])
            if _depth(value) != 0:
                raise AnnotationError(f"line {lineno}: unbalanced brackets in %{d.group(1)}")
            toks.append(Tok("directive", (d.group(1), value.strip()), lineno, 1))
            i += 1
            continue
        toks.extend(tokenize_line(raw, lineno))
        i += 1
    toks.append(Tok("eof", None, len(lines) + 1, 1))
    return toks


def _depth(text: str) -> int:
    return sum(text.count(c) for c in "([{") - sum(text.count(c) for c in ")]}")


# ---------------------------------------------------------------------------
# compile-time evaluation

def const_eval(node, env: dict) -> int:
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Name):
        if node.id not in env:
            raise KeyError(node.id)
        return env[node.id]
    if isinstance(node, Unary):
        v = const_eval(node.operand, env)
        return {"-": -v, "~": ~v, "!": int(not v)}[node.op]
    if isinstance(node, Ternary):
        return const_eval(node.then if const_eval(node.cond, env) else node.other, env)
    if isinstance(node, Binary):
        a = const_eval(node.left, env)
        b = const_eval(node.right, env)
        if node.op in ("/", "%") and b == 0:
            raise ZeroDivisionError("constant division by zero")
        return {
            "+": lambda: a + b, "-": lambda: a - b, "*": lambda: a * b,
            "/": lambda: a // b, "%": lambda: a % b, "^": lambda: a ^ b,
            "&": lambda: a & b, "|": lambda: a | b, "<<": lambda: a << b,
            ">>": lambda: a >> b, "==": lambda: int(a == b), "!=": lambda: int(a != b),
            "<": lambda: int(a < b), "<=": lambda: int(a <= b), ">": lambda: int(a > b),
            ">=": lambda: int(a >= b), "&&": lambda: int(bool(a and b)),
            "||": lambda: int(bool(a or b)),
        }[node.op]()
    if isinstance(node, Call):
        args = [const_eval(a, env) for a in node.args]
        if node.fn == "min":
            return min(args)
        if node.fn == "max":
            return max(args)
    raise KeyError(f"not a constant: {node}")


def free_names(node, acc: set | None = None) -> set:
    if acc is None:
        acc = set()
    if isinstance(node, Name):
        acc.add(node.id)
    elif isinstance(node, Index):
        acc.add(node.name)
        for i in node.indices:
            free_names(i, acc)
    elif isinstance(node, Unary):
        free_names(node.operand, acc)
    elif isinstance(node, Binary):
        free_names(node.left, acc)
        free_names(node.right, acc)
    elif isinstance(node, Ternary):
        for n in (node.cond, node.then, node.other):
            free_names(n, acc)
    elif isinstance(node, Call):
        for a in node.args:
            free_names(a, acc)
    return acc


# ---------------------------------------------------------------------------

_BINARY_LEVELS = [
    ("||",), ("&&",), ("|",), ("^",), ("&",), ("==", "!="), ("<", "<=", ">", ">="),
    ("<<", ">>"), ("+", "-"), ("*", "/", "%"),
]


class Parser:
    def __init__(self, toks: list, rb_mode: bool = False, defines: dict | None = None):
        self.toks = toks
        self.defines = dict(defines or {})
        self.pos = 0
        self.rb_mode = rb_mode
        self.width = DEFAULT_WIDTH
        self.consts: dict = {}
        self.decls: dict = {}
        self.pending: dict = {}
        self.last_ended: Block | None = None
        self.static_loop_vars: list = []

    # token helpers ------------------------------------------------------
    @property
    def tok(self) -> Tok:
        return self.toks[self.pos]

    def error(self, msg: str, tok: Tok | None = None):
        tok = tok or self.tok
        return AbkSyntaxError(msg, tok.line, tok.col)

    def accept(self, value) -> bool:
        t = self.tok
        if t.kind in ("op", "id") and t.value == value:
            self.pos += 1
            return True
        return False

    def expect(self, value) -> Tok:
        t = self.tok
        if not self.accept(value):
            found = t.value if t.kind != "eof" else "end of input"
            raise self.error(f"expected {value!r}, found {found!r}", t)
        return t

    def ident(self) -> str:
        t = self.tok
        if t.kind != "id" or t.value in KEYWORDS:
            raise self.error(f"expected identifier, found {t.value!r}")
        self.pos += 1
        return t.value

    # expressions ----------------------------------------------------------
    def expr(self):
        cond = self.binary(0)
        if self.accept("?"):
            then = self.expr()
            self.expect(":")
            other = self.expr()
            return Ternary(cond, then, other)
        return cond

    def binary(self, level: int):
        if level == len(_BINARY_LEVELS):
            return self.unary()
        left = self.binary(level + 1)
        while self.tok.kind == "op" and self.tok.value in _BINARY_LEVELS[level]:
            op = self.tok.value
            self.pos += 1
            left = Binary(op, left, self.binary(level + 1))
        return left

    def unary(self):
        if self.tok.kind == "op" and self.tok.value in ("-", "~", "!"):
            op = self.tok.value
            self.pos += 1
            operand = self.unary()
            if isinstance(operand, Num) and op == "-":
                return Num(-operand.value)
            return Unary(op, operand)
        return self.primary()

    def primary(self):
        t = self.tok
        if t.kind == "num":
            self.pos += 1
            return Num(t.value)
        if self.accept("("):
            e = self.expr()
            self.expect(")")
            return e
        if t.kind == "id" and t.value not in KEYWORDS:
            name = self.ident()
            if self.accept("("):
                args = []
                if not self.accept(")"):
                    args.append(self.expr())
                    while self.accept(","):
                        args.append(self.expr())
                    self.expect(")")
                if name not in INTRINSICS:
                    raise self.error(f"unknown intrinsic {name!r}", t)
                if len(args) != INTRINSICS[name]:
                    raise self.error(f"{name} takes {INTRINSICS[name]} arguments", t)
                return Call(name, tuple(args))
            indices = []
            while self.accept("["):
                indices.append(self.expr())
                self.expect("]")
            return Index(name, tuple(indices)) if indices else Name(name)
        raise self.error(f"unexpected {t.value!r}" if t.kind != "eof" else "unexpected end of input")

    def const_expr(self, node, what: str, tok: Tok) -> int:
        try:
            return const_eval(node, self.consts)
        except (KeyError, ZeroDivisionError) as exc:
            raise self.error(f"{what} must be a compile-time constant ({exc})", tok)

    # statements -----------------------------------------------------------
    def parse_program(self, source: str) -> AbkProgram:
        body = self.stmt_list(top=True, end_block=None)
        if self.pending:
            names = ", ".join(sorted(self.pending))
            raise AnnotationError(f"directives not followed by a block: {names}")
        prog = AbkProgram(self.width, dict(self.consts), dict(self.decls), body,
                          self.rb_mode, source)
        for block in prog.blocks:
            finalize_annotation(prog, block)
        return prog

    def stmt_list(self, top: bool, end_block: str | None) -> list:
        out: list = []
        while True:
            t = self.tok
            if t.kind == "eof":
                if end_block is not None:
                    raise self.error(f"block {end_block} is never closed", t)
                if not top:
                    raise self.error("missing '}'", t)
                return out
            if t.kind == "op" and t.value == "}":
                if top:
                    raise self.error("unmatched '}'", t)
                return out
            if t.kind == "marker":
                name, kind = t.value
                if self.static_loop_vars or (not top and end_block is None):
                    raise self.error("block markers are not allowed inside loops", t)
                self.pos += 1
                if kind == "END":
                    if name != end_block:
                        raise self.error(f"END marker for {name} does not close {end_block}", t)
                    return out
                out.append(self.block(name, t))
                continue
            if t.kind == "directive":
                if self.static_loop_vars or (not top and end_block is None):
                    raise self.error("directives are not allowed inside loops", t)
                self.directive(t)
                self.pos += 1
                continue
            stmt = self.statement(top)
            if stmt is not None:
                out.append(stmt)

    def block(self, name: str, tok: Tok) -> Block:
        ann = BatchAnnotation()
        blk = Block(name, [], ann, tok.line)
        blk._raw = dict(self.pending)  # type: ignore[attr-defined]
        self.pending = {}
        self.last_ended = None
        blk.body = self.stmt_list(top=True, end_block=name)
        blk.end_line = self.toks[self.pos - 1].line
        self.last_ended = blk
        return blk

    def directive(self, t: Tok) -> None:
        name, value = t.value
        target_out = name in OUT_DIRECTIVES
        if name == "IN_ALLOC_RULE" and re.match(r"\s*out\s*\(", value):
            target_out, name = True, "OUT_ALLOC_RULE"
        if not target_out and name not in IN_DIRECTIVES:
            raise AnnotationError(f"line {t.line}: unknown directive %{name}")
        if target_out:
            if self.last_ended is None:
                raise AnnotationError(f"line {t.line}: %{name} does not follow a block END marker")
            raw = self.last_ended._raw  # type: ignore[attr-defined]
        else:
            raw = self.pending
        if name in raw:
            raise AnnotationError(f"line {t.line}: duplicate %{name}")
        raw[name] = (value, t.line)

    def statement(self, top: bool):
        t = self.tok
        if t.kind == "id" and t.value == "width":
            self.pos += 1
            w = self.const_expr(self.expr(), "width", t)
            self.expect(";")
            if not 1 <= w <= 32:
                raise self.error("width must be between 1 and 32", t)
            self.width = w
            return None
        if t.kind == "id" and t.value == "const":
            self.pos += 1
            name = self.ident()
            self.expect("=")
            value = self.const_expr(self.expr(), "const", t)
            self.consts[name] = self.defines.pop(name, value)
            self.expect(";")
            return None
        if t.kind == "id" and t.value == "var":
            if not top or self.static_loop_vars:
                raise self.error("declarations must be at top level", t)
            self.pos += 1
            return self.declaration(t)
        if t.kind == "id" and t.value == "for":
            return self.for_stmt(t)
        if t.kind == "id" and t.value == "while":
            self.pos += 1
            if not self.rb_mode:
                raise BoundError(f"line {t.line}: while-loops require RB mode")
            self.expect("(")
            cond = self.expr()
            self.expect(")")
            body = self.braced()
            return WhileStmt(cond, body, t.line)
        target = self.primary()
        if not isinstance(target, (Name, Index)):
            raise self.error("assignment target must be a variable", t)
        op_tok = self.tok
        if op_tok.kind == "op" and op_tok.value in ("+=", "-=", "*=", "^=", "&=", "|=", "<<=", ">>="):
            self.pos += 1
            value = Binary(op_tok.value[:-1], target, self.expr())
        else:
            self.expect("=")
            value = self.expr()
        self.expect(";")
        return AssignStmt(target, value, t.line)

    def braced(self) -> list:
        self.expect("{")
        body = self.stmt_list(top=False, end_block=None)
        self.expect("}")
        return body

    def for_stmt(self, t: Tok) -> ForStmt:
        self.pos += 1
        var = self.ident()
        if var in self.decls or var in self.consts:
            raise self.error(f"loop variable {var!r} shadows a declaration", t)
        self.expect("in")
        lo = self.expr()
        self.expect("..")
        hi = self.expr()
        allowed = set(self.consts) | set(self.static_loop_vars)
        static = free_names(lo) | free_names(hi) <= allowed
        if not static:
            if not self.rb_mode:
                raise BoundError(f"line {t.line}: for-loop bounds must be compile-time constants")
        self.static_loop_vars.append(var if static else None)
        try:
            body = self.braced()
        finally:
            self.static_loop_vars.pop()
        return ForStmt(var, lo, hi, body, t.line, dynamic=not static)

    def declaration(self, t: Tok):
        name = self.ident()
        if name in self.decls or name in self.consts:
            raise self.error(f"{name!r} declared twice", t)
        dims = []
        while self.accept("["):
            dims.append(self.const_expr(self.expr(), "array dimension", t))
            self.expect("]")
            if dims[-1] < 1:
                raise self.error("array dimensions must be positive", t)
        decl = VarDecl(name, tuple(dims), None, t.line)
        if self.accept("="):
            values = self.initializer()
            if len(values) == 1:
                values = values * decl.size
            if len(values) != decl.size:
                raise self.error(f"initializer has {len(values)} values for {decl.size} cells", t)
            decl.init = tuple(values)
        self.expect(";")
        self.decls[name] = decl
        return None

    def initializer(self) -> list:
        t = self.tok
        if self.accept("{"):
            vals = self.initializer()
            while self.accept(","):
                vals += self.initializer()
            self.expect("}")
            return vals
        return [self.const_expr(self.expr(), "initializer", t)]


def parse(text: str, rb_mode: bool = False, width: int | None = None,
          defines: dict | None = None) -> AbkProgram:
    """Parse ABK source.

    `width` overrides the program's own width declaration and `defines`
    overrides the values of named constants (batch sizes, for instance).
    """
    parser = Parser(tokenize(text), rb_mode, defines)
    prog = parser.parse_program(text)
    if parser.defines:
        raise AnnotationError(f"no constant named {', '.join(sorted(parser.defines))}")
    if width is not None:
        if not 1 <= width <= 32:
            raise BoundError("width must be between 1 and 32")
        prog.width = width
    return prog


# ---------------------------------------------------------------------------
# directive values

def _sub_parser(text: str, line: int) -> Parser:
    p = Parser(tokenize_line(text, line) + [Tok("eof", None, line, len(text) + 1)])
    return p


def _expr_value(text: str, line: int, env: dict, what: str) -> int:
    p = _sub_parser(text, line)
    try:
        node = p.expr()
        if p.tok.kind != "eof":
            raise p.error("trailing text")
        return const_eval(node, env)
    except (AbkSyntaxError, KeyError, ZeroDivisionError) as exc:
        raise AnnotationError(f"line {line}: malformed %{what} value {text!r}: {exc}") from None


def _name_value(text: str, line: int, what: str) -> str:
    if not re.fullmatch(r"[A-Za-z_]\w*", text):
        raise AnnotationError(f"line {line}: %{what} expects an array name, got {text!r}")
    return text


def parse_alloc_rule(text: str, line: int) -> AllocRule:
    try:
        p = _sub_parser(text, line)
        head = p.tok.value
        if p.tok.kind != "id":
            raise p.error("expected in(x) or out(x)")
        p.pos += 1
        p.expect("(")
        var = p.ident()
        p.expect(")")
        p.expect("addr")
        p.expect("range")
        p.expect("=")
        rows = []
        while True:
            p.expect("[")
            first = p.expr()
            if p.accept(":"):
                hi = p.expr()
                p.expect("]")
                break
            p.expect("]")
            rows.append(first)
        if p.tok.kind != "eof":
            raise p.error("trailing text after alloc rule")
    except AbkSyntaxError as exc:
        raise AnnotationError(f"line {line}: malformed alloc rule {text!r}: {exc}") from None
    if head not in ("in", "out"):
        raise AnnotationError(f"line {line}: alloc rule must start with in(x) or out(x)")
    return AllocRule(head, var, tuple(rows), first, hi, text)


def resolve_alloc_rule(rule: AllocRule, decl: VarDecl, lanes: int, size: int, env: dict,
                       line: int) -> None:
    """Bind free variables and compute each lane's flat cell offsets."""
    names = set()
    for node in rule.rows + (rule.lo, rule.hi):
        free_names(node, names)
    free = sorted(names - set(env) - {rule.var})
    candidates = itertools.product(range(decl.size + 1), repeat=len(free)) if free else [()]
    last_error = "no admissible binding"
    for values in candidates:
        binding = dict(zip(free, values))
        try:
            rule.lanes = _lane_offsets(rule, decl, lanes, size, {**env, **binding})
            rule.bindings = binding
            return
        except ValueError as exc:
            last_error = str(exc)
            if not free:
                break
    raise AnnotationError(f"line {line}: alloc rule {rule.text!r} on {decl.name}: {last_error}")


def _lane_offsets(rule: AllocRule, decl: VarDecl, lanes: int, size: int, env: dict) -> tuple:
    dims = decl.dims or (1,)
    out = []
    used: dict = {}
    for x in range(lanes):
        local = {**env, rule.var: x}
        try:
            rows = [const_eval(r, local) for r in rule.rows]
            lo = const_eval(rule.lo, local)
            hi = const_eval(rule.hi, local)
        except (KeyError, ZeroDivisionError) as exc:
            raise ValueError(f"cannot evaluate rule: {exc}")
        if hi - lo != size:
            raise ValueError(f"lane {x} covers {hi - lo} cells, expected {size}")
        if rows:
            if len(rows) != len(dims) - 1:
                raise ValueError("row prefix does not match the array rank")
            base = 0
            for r, d in zip(rows, dims[:-1]):
                if not 0 <= r < d:
                    raise ValueError(f"lane {x} row index {r} out of bounds")
                base = base * d + r
            if lo < 0 or hi > dims[-1]:
                raise ValueError(f"lane {x} range [{lo}:{hi}] exceeds the row")
            cells = tuple(base * dims[-1] + k for k in range(lo, hi))
        else:
            if lo < 0 or hi > decl.size:
                raise ValueError(f"lane {x} range [{lo}:{hi}] exceeds {decl.name}")
            cells = tuple(range(lo, hi))
        for c in cells:
            if c in used:
                raise ValueError(f"lanes {used[c]} and {x} overlap at element {c}")
            used[c] = x
        out.append(cells)
    return tuple(out)


def _rel_entries(text: str, line: int, prog: AbkProgram) -> tuple:
    p = _sub_parser(text, line)
    out = []
    try:
        while p.tok.kind != "eof":
            node = p.primary()
            if isinstance(node, Name):
                entry = (node.id, None)
            elif isinstance(node, Index):
                entry = (node.name, tuple(const_eval(i, prog.consts) for i in node.indices))
            else:
                raise p.error("expected a variable")
            out.append(entry)
            if not p.accept(","):
                break
        if p.tok.kind != "eof":
            raise p.error("trailing text")
    except (AbkSyntaxError, KeyError) as exc:
        raise AnnotationError(f"line {line}: malformed %REL {text!r}: {exc}") from None
    for name, idx in out:
        decl = prog.decls.get(name)
        if decl is None:
            raise AnnotationError(f"line {line}: %REL names undeclared {name!r}")
        if idx is not None and (len(idx) != len(decl.dims)
                                or any(not 0 <= i < d for i, d in zip(idx, decl.dims))):
            raise AnnotationError(f"line {line}: %REL index {name}{list(idx)} out of bounds")
    return tuple(out)


def _expr_list(text: str, line: int, what: str) -> tuple:
    p = _sub_parser(text, line)
    out = []
    try:
        while p.tok.kind != "eof":
            out.append(p.expr())
            if not p.accept(","):
                break
        if p.tok.kind != "eof":
            raise p.error("trailing text")
    except AbkSyntaxError as exc:
        raise AnnotationError(f"line {line}: malformed %{what}: {exc}") from None
    return tuple(out)


def _rows(text: str, line: int, env: dict) -> tuple:
    p = _sub_parser(text, line)
    rows = []
    try:
        while p.tok.kind != "eof":
            if p.accept("{"):
                row = [const_eval(p.expr(), env)]
                while p.accept(","):
                    row.append(const_eval(p.expr(), env))
                p.expect("}")
            else:
                row = [const_eval(p.expr(), env)]
            rows.append(tuple(row))
            if not p.accept(","):
                break
    except (AbkSyntaxError, KeyError) as exc:
        raise AnnotationError(f"line {line}: malformed %SAC_REL: {exc}") from None
    return tuple(rows)


def finalize_annotation(prog: AbkProgram, block: Block) -> None:
    raw = block._raw  # type: ignore[attr-defined]
    ann = block.annotation
    env = dict(prog.consts)
    for key in ("IN_SIZE", "OUT_SIZE", "IN_BATCH_SIZE", "OUT_BATCH_SIZE", "ACTIONS"):
        if key in raw:
            value = _expr_value(raw[key][0], raw[key][1], env, key)
            if value < 1:
                raise AnnotationError(f"line {raw[key][1]}: %{key} must be positive")
            env[key] = value
    ann.in_size = env.get("IN_SIZE")
    ann.out_size = env.get("OUT_SIZE")
    ann.in_batch_size = env.get("IN_BATCH_SIZE")
    ann.out_batch_size = env.get("OUT_BATCH_SIZE")
    ann.n_actions = env.get("ACTIONS", 1)
    for key, attr in (("BATCH_MEM_IN", "batch_mem_in"), ("BATCH_MEM_OUT", "batch_mem_out"),
                      ("ACTION_MEM", "action_mem")):
        if key in raw:
            name = _name_value(raw[key][0], raw[key][1], key)
            if name not in prog.decls:
                raise AnnotationError(f"line {raw[key][1]}: %{key} names undeclared {name!r}")
            setattr(ann, attr, name)
    for key, attr, mem, lanes, size in (
            ("IN_ALLOC_RULE", "in_alloc_rule", ann.batch_mem_in, ann.in_batch_size, ann.in_size),
            ("OUT_ALLOC_RULE", "out_alloc_rule", ann.batch_mem_out, ann.out_batch_size,
             ann.out_size)):
        if key not in raw:
            continue
        text, line = raw[key]
        rule = parse_alloc_rule(text, line)
        if mem is not None and lanes is not None and size is not None:
            resolve_alloc_rule(rule, prog.decls[mem], lanes, size, env, line)
        setattr(ann, attr, rule)
    if "REL" in raw:
        ann.rel_vars = _rel_entries(raw["REL"][0], raw["REL"][1], prog)
    if "SPEC" in raw:
        ann.spec = _expr_list(raw["SPEC"][0], raw["SPEC"][1], "SPEC")
    if "SAC_REL" in raw:
        ann.sac_rel = _rows(raw["SAC_REL"][0], raw["SAC_REL"][1], env)
    if ann.action_mem is not None and ann.in_batch_size is not None:
        if prog.decls[ann.action_mem].size < ann.in_batch_size:
            raise AnnotationError(f"%ACTION_MEM {ann.action_mem} holds fewer than "
                                  f"{ann.in_batch_size} lanes")
