"""Lowering of ABK programs to the instruction-level cell machine.

Every declared variable element gets one memory cell; the layout is shared by
all blocks of a program so that sub-models of one program address the same
cells.  A block that writes (or outputs into) its own input buffer gets fresh
staging cells as its input region, copied into the buffer by its first
instruction.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from ..errors import AbkSyntaxError, AnnotationError, RegionError, UnrollCap
from ..model import AcceleratorModel, MemoryLayout, MemoryPredicate
from ..program import (Assign, Branch, Const, Copy, Jump, Load, Nop, Op, Ref, Store, _scalar_op,
                       map_instr)
from .ast import (AbkProgram, AssignStmt, Binary, Block, Call, ForStmt, Index, Name, Num,
                  Ternary, Unary, WhileStmt)

DEFAULT_UNROLL_CAP = 1 << 20

_OPS = {"+": "add", "-": "sub", "*": "mul", "^": "xor", "&": "and", "|": "or",
        "<<": "shl", ">>": "shr", "==": "eq", "!=": "ne", "<": "ult", "<=": "ule",
        ">": "ugt", ">=": "uge"}
_EXACT = {
    "+": lambda a, b: a + b, "-": lambda a, b: a - b, "*": lambda a, b: a * b,
    "/": lambda a, b: a // b, "%": lambda a, b: a % b, "^": lambda a, b: a ^ b,
    "&": lambda a, b: a & b, "|": lambda a, b: a | b, "<<": lambda a, b: a << b,
    ">>": lambda a, b: a >> b, "==": lambda a, b: int(a == b), "!=": lambda a, b: int(a != b),
    "<": lambda a, b: int(a < b), "<=": lambda a, b: int(a <= b), ">": lambda a, b: int(a > b),
    ">=": lambda a, b: int(a >= b), "&&": lambda a, b: int(bool(a and b)),
    "||": lambda a, b: int(bool(a or b)),
}


@dataclass
class ProgramLayout:
    names: list
    base: dict  # variable -> first cell
    sizes: dict
    dims: dict
    staging: dict = field(default_factory=dict)  # block -> per-lane staging cells

    @property
    def n_cells(self) -> int:
        return len(self.names)

    def cell(self, var: str, flat: int) -> int:
        return self.base[var] + flat

    def cells_of(self, var: str) -> tuple:
        return tuple(range(self.base[var], self.base[var] + self.sizes[var]))


def _element_names(name: str, dims: tuple) -> list:
    if not dims:
        return [name]
    out = [name]
    for d in dims:
        out = [f"{p}[{i}]" for p in out for i in range(d)]
    return out


@dataclass
class Unrolled:
    instrs: list
    lines: list
    loops: list  # (entry, header, back-jump) instruction indices
    diagnostics: list


class Unroller:
    def __init__(self, prog: AbkProgram, layout: ProgramLayout, cap: int = DEFAULT_UNROLL_CAP):
        self.prog = prog
        self.layout = layout
        self.cap = cap
        self.mask = (1 << prog.width) - 1
        self.width = prog.width
        self.result = Unrolled([], [], [], [])

    def emit(self, ins, line: int) -> int:
        if len(self.result.instrs) >= self.cap:
            raise UnrollCap(f"unrolled program exceeds {self.cap} instructions")
        self.result.instrs.append(ins)
        self.result.lines.append(line)
        return len(self.result.instrs) - 1

    # expressions -------------------------------------------------------------
    def rt(self, v):
        return Const(v & self.mask) if isinstance(v, int) else v

    def op(self, name: str, *args):
        args = tuple(self.rt(a) for a in args)
        if all(isinstance(a, Const) for a in args):
            return Const(_scalar_op(name, [a.value for a in args], self.mask, self.width))
        return Op(name, args)

    def expr(self, node, env: dict, line: int):
        if isinstance(node, Num):
            return node.value
        if isinstance(node, Name):
            if node.id in env:
                return env[node.id]
            if node.id in self.prog.consts:
                return self.prog.consts[node.id]
            decl = self.prog.decls.get(node.id)
            if node.id in self.layout.base and (decl is None or not decl.dims):
                return Ref(self.layout.cell(node.id, 0))
            raise AbkSyntaxError(f"unknown scalar {node.id!r}", line)
        if isinstance(node, Index):
            access = self.access(node, env, line)
            if access is None:
                self.result.diagnostics.append(("oob-read", node.name, line))
                return Const(0)
            cells, dims, index = access
            if not dims:
                return Ref(cells[0])
            return Load(cells, dims, index)
        if isinstance(node, Unary):
            v = self.expr(node.operand, env, line)
            if isinstance(v, int):
                return {"-": -v, "~": ~v, "!": int(not v)}[node.op]
            return {"-": lambda: self.op("neg", v), "~": lambda: self.op("not", v),
                    "!": lambda: self.op("eq", v, 0)}[node.op]()
        if isinstance(node, Ternary):
            c = self.expr(node.cond, env, line)
            if isinstance(c, int):
                return self.expr(node.then if c else node.other, env, line)
            a = self.expr(node.then, env, line)
            b = self.expr(node.other, env, line)
            return self.op("ite", c, a, b)
        if isinstance(node, Binary):
            a = self.expr(node.left, env, line)
            b = self.expr(node.right, env, line)
            if isinstance(a, int) and isinstance(b, int):
                try:
                    return _EXACT[node.op](a, b)
                except ZeroDivisionError:
                    raise AbkSyntaxError("constant division by zero", line) from None
            if node.op in ("/", "%"):
                raise AbkSyntaxError("division needs compile-time operands", line)
            if node.op == "&&":
                return self.op("and", self.op("ne", a, 0), self.op("ne", b, 0))
            if node.op == "||":
                return self.op("or", self.op("ne", a, 0), self.op("ne", b, 0))
            return self.op(_OPS[node.op], a, b)
        if isinstance(node, Call):
            args = [self.expr(a, env, line) for a in node.args]
            if node.fn in ("rotl", "rotr"):
                if not isinstance(args[1], int):
                    raise AbkSyntaxError(f"{node.fn} needs a constant amount", line)
                c = args[1] % self.width
                if node.fn == "rotr":
                    c = (self.width - c) % self.width
                x = self.rt(args[0])
                if c == 0:
                    return x
                return self.op("or", self.op("shl", x, c), self.op("shr", x, self.width - c))
            a, b = args
            if isinstance(a, int) and isinstance(b, int):
                return min(a, b) if node.fn == "min" else max(a, b)
            cmp = "ult" if node.fn == "min" else "ugt"
            return self.op("ite", self.op(cmp, a, b), a, b)
        raise TypeError(node)

    def access(self, node: Index, env: dict, line: int):
        """Resolve an array access to (candidate cells, dynamic dims, dynamic index exprs)."""
        decl = self.prog.decls.get(node.name)
        if decl is None:
            raise AbkSyntaxError(f"unknown array {node.name!r}", line)
        if len(node.indices) != len(decl.dims):
            raise AbkSyntaxError(f"{node.name} needs {len(decl.dims)} indices", line)
        values = [self.expr(i, env, line) for i in node.indices]
        for v, d in zip(values, decl.dims):
            if isinstance(v, int) and not 0 <= v < d:
                return None
        dyn = [k for k, v in enumerate(values) if not isinstance(v, int)]
        strides = []
        acc = 1
        for d in reversed(decl.dims):
            strides.append(acc)
            acc *= d
        strides.reverse()
        static_off = sum(v * s for v, s in zip(values, strides) if isinstance(v, int))
        dims = tuple(decl.dims[k] for k in dyn)
        cells = []
        for combo in _row_major(dims):
            off = static_off + sum(c * strides[k] for c, k in zip(combo, dyn))
            cells.append(self.layout.cell(node.name, off))
        return tuple(cells), dims, tuple(values[k] for k in dyn)

    # statements ----------------------------------------------------------------
    def stmts(self, stmts: list, env: dict) -> None:
        for s in stmts:
            if isinstance(s, AssignStmt):
                self.assign(s, env)
            elif isinstance(s, ForStmt) and not s.dynamic:
                lo = self.expr(s.lo, env, s.line)
                hi = self.expr(s.hi, env, s.line)
                for i in range(lo, hi):
                    self.stmts(s.body, {**env, s.var: i})
            elif isinstance(s, ForStmt):
                var = Ref(self.layout.cell(s.var, 0))
                self.emit(Assign(var.key, self.rt(self.expr(s.lo, env, s.line))), s.line)
                self.loop(self.op("ugt", self.expr(s.hi, env, s.line), var), s.body, env, s.line,
                          step=Assign(var.key, self.op("add", var, 1)))
            elif isinstance(s, WhileStmt):
                self.loop(None, s.body, env, s.line, cond_node=s.cond)
            elif isinstance(s, Block):
                self.stmts(s.body, env)

    def loop(self, cond, body, env, line, step=None, cond_node=None) -> None:
        entry = self.emit(Nop("loop entry"), line)
        if cond is None:
            cond = self.rt(self.expr(cond_node, env, line))
        header = self.emit(Nop(), line)
        self.stmts(body, env)
        if step is not None:
            self.emit(step, line)
        back = self.emit(Jump(header), line)
        self.result.instrs[header] = Branch(self.rt(cond), back + 1)
        self.result.loops.append((entry, header, back))

    def assign(self, s: AssignStmt, env: dict) -> None:
        value = self.rt(self.expr(s.value, env, s.line))
        t = s.target
        if isinstance(t, Name):
            decl = self.prog.decls.get(t.id)
            if t.id in env or t.id in self.prog.consts:
                raise AbkSyntaxError(f"cannot assign to constant {t.id!r}", s.line)
            if t.id not in self.layout.base or (decl is not None and decl.dims):
                raise AbkSyntaxError(f"cannot assign to {t.id!r}", s.line)
            self.emit(Assign(self.layout.cell(t.id, 0), value), s.line)
            return
        access = self.access(t, env, s.line)
        if access is None:
            self.result.diagnostics.append(("oob-write", t.name, s.line))
            self.emit(Nop("dropped out-of-bounds write"), s.line)
            return
        cells, dims, index = access
        if not dims:
            self.emit(Assign(cells[0], value), s.line)
        else:
            self.emit(Store(cells, cells, dims, tuple(self.rt(i) for i in index), value), s.line)


def _row_major(dims: tuple):
    if not dims:
        yield ()
        return
    for head in range(dims[0]):
        for rest in _row_major(dims[1:]):
            yield (head,) + rest


def _hidden_loop_vars(stmts: list, acc: list) -> list:
    for s in stmts:
        if isinstance(s, ForStmt) and s.dynamic and s.var not in acc:
            acc.append(s.var)
        if isinstance(s, (ForStmt, WhileStmt, Block)):
            _hidden_loop_vars(s.body, acc)
    return acc


def base_layout(prog: AbkProgram) -> ProgramLayout:
    names: list = []
    base: dict = {}
    sizes: dict = {}
    dims: dict = {}
    for name, decl in prog.decls.items():
        base[name] = len(names)
        sizes[name] = decl.size
        dims[name] = decl.dims
        names.extend(_element_names(name, decl.dims))
    for var in _hidden_loop_vars(prog.body, []):
        base[var] = len(names)
        sizes[var] = 1
        dims[var] = ()
        names.append(var)
    return ProgramLayout(names, base, sizes, dims)


def unroll_statements(prog: AbkProgram, stmts: list, cap: int = DEFAULT_UNROLL_CAP) -> Unrolled:
    u = Unroller(prog, base_layout(prog), cap)
    u.stmts(stmts, {})
    return u.result


def block_unrolled(prog: AbkProgram, block: Block, cap: int = DEFAULT_UNROLL_CAP) -> Unrolled:
    key = ("block", block.name, prog.width, cap)
    if key not in prog._cache:
        prog._cache[key] = unroll_statements(prog, block.body, cap)
    return prog._cache[key]


def lane_cells(layout: ProgramLayout, var: str, rule) -> tuple:
    return tuple(tuple(layout.cell(var, off) for off in lane) for lane in rule.lanes)


def program_layout(prog: AbkProgram) -> ProgramLayout:
    """Shared layout: variables, hidden loop counters, then per-block staging cells."""
    key = ("layout", prog.width)
    if key in prog._cache:
        return prog._cache[key]
    layout = base_layout(prog)
    for block in prog.blocks:
        ann = block.annotation
        if ann.in_alloc_rule is None or not ann.in_alloc_rule.lanes or ann.batch_mem_in is None:
            continue
        in_lanes = lane_cells(layout, ann.batch_mem_in, ann.in_alloc_rule)
        in_cells = {c for lane in in_lanes for c in lane}
        out_cells: set = set()
        if ann.out_alloc_rule is not None and ann.out_alloc_rule.lanes and ann.batch_mem_out:
            out_cells = {c for lane in lane_cells(layout, ann.batch_mem_out, ann.out_alloc_rule)
                         for c in lane}
        writes = set()
        for ins in block_unrolled(prog, block).instrs:
            if isinstance(ins, Assign):
                writes.add(ins.dst)
            elif isinstance(ins, Store):
                writes.update(ins.dsts)
        if writes & in_cells or out_cells & in_cells:
            staged = []
            for x, lane in enumerate(in_lanes):
                cells = []
                for w in range(len(lane)):
                    cells.append(len(layout.names))
                    layout.names.append(f"{block.name}.in[{x}][{w}]")
                staged.append(tuple(cells))
            layout.staging[block.name] = tuple(staged)
    prog._cache[key] = layout
    return layout


def relevant_cells(prog: AbkProgram, layout: ProgramLayout) -> tuple:
    cells = []
    for name, idx in prog.rel_vars:
        if idx is None:
            cells.extend(layout.cells_of(name))
        else:
            flat = 0
            for i, d in zip(idx, layout.dims[name]):
                flat = flat * d + i
            cells.append(layout.cell(name, flat))
    out = []
    for c in cells:
        if c not in out:
            out.append(c)
    return tuple(out)


def initial_predicate(prog: AbkProgram, layout: ProgramLayout, exclude: set) -> MemoryPredicate | None:
    assignment = {}
    mask = (1 << prog.width) - 1
    for name, decl in prog.decls.items():
        if decl.init is None:
            continue
        for off, v in enumerate(decl.init):
            c = layout.cell(name, off)
            if c not in exclude:
                assignment[c] = v & mask
    return MemoryPredicate.fixed(assignment) if assignment else None


def lower(prog: AbkProgram, block: Block | str, cap: int = DEFAULT_UNROLL_CAP) -> AcceleratorModel:
    if isinstance(block, str):
        block = prog.block(block)
    ann = block.annotation
    missing = ann.missing()
    if missing:
        names = ", ".join("%" + m.upper() for m in missing)
        raise AnnotationError(f"block {block.name} is missing {names}")
    if ann.in_batch_size != ann.out_batch_size:
        raise AnnotationError(f"block {block.name}: input and output batch sizes differ "
                              f"({ann.in_batch_size} vs {ann.out_batch_size})")
    if ann.n_actions > 1 and ann.action_mem is None:
        raise AnnotationError(f"block {block.name}: %ACTIONS > 1 needs %ACTION_MEM")
    layout = program_layout(prog)
    unrolled = block_unrolled(prog, block, cap)
    in_base = lane_cells(layout, ann.batch_mem_in, ann.in_alloc_rule)
    out_lanes = lane_cells(layout, ann.batch_mem_out, ann.out_alloc_rule)
    staged = layout.staging.get(block.name)
    data_lanes = staged if staged else in_base
    has_action = ann.n_actions > 1
    action_cells = tuple(layout.cell(ann.action_mem, x) for x in range(ann.in_batch_size)) \
        if has_action else ()
    input_lanes = tuple(((action_cells[x],) if has_action else ()) + tuple(lane)
                        for x, lane in enumerate(data_lanes))
    rel = relevant_cells(prog, layout)
    in_all = {c for lane in in_base for c in lane} | {c for lane in data_lanes for c in lane}
    out_all = {c for lane in out_lanes for c in lane}
    clash = set(rel) & (in_all | out_all | set(action_cells))
    if clash:
        names = ", ".join(layout.names[c] for c in sorted(clash))
        raise RegionError(f"block {block.name}: relevant state aliases its input/output region ({names})")
    if set(action_cells) & (in_all | out_all):
        raise RegionError(f"block {block.name}: action memory overlaps the data regions")
    instrs = list(unrolled.instrs)
    offset = 0
    if staged:
        dsts = tuple(c for lane in in_base for c in lane)
        srcs = tuple(c for lane in staged for c in lane)
        instrs.insert(0, Copy(dsts, srcs, "entry"))
        offset = 1
    if offset:
        instrs = [instrs[0]] + [map_instr(i, lambda k: k, offset) for i in instrs[1:]]
    if not instrs:
        instrs = [Nop("empty block")]
    mem_layout = MemoryLayout(layout.n_cells, input_lanes, out_lanes, rel, has_action,
                              tuple(layout.names))
    inputs = set(mem_layout.input_cells)
    return AcceleratorModel(
        name=block.name,
        batch_size=ann.in_batch_size,
        n_actions=ann.n_actions,
        data_width=prog.width,
        in_size=ann.in_size,
        out_size=ann.out_size,
        layout=mem_layout,
        program=tuple(instrs),
        initial=initial_predicate(prog, layout, inputs),
        source=block,
    )
