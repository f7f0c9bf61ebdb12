"""Static single assignment view of a fully unrolled ABK program.

Each SSA line corresponds to exactly one instruction of the unrolled cell
program, so SSA line numbers double as transition-step positions.  Loops that
survive unrolling (RB mode) keep their back-edge: the loop-entry line becomes a
parallel copy into fresh loop-carried values, and the back-jump copies the
updated values into the same names.  Those loop-carried names are therefore
the only values written twice.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from ..errors import StepBudgetExceeded
from ..program import (Assign, Branch, Copy, Jump, Nop, Store, exec_scalar, format_instr,
                       instr_writes, map_expr)
from .ast import AbkProgram
from .lower import DEFAULT_UNROLL_CAP, base_layout, unroll_statements


def value_name(base: str, version: int) -> str:
    return f"{base}.{version}"


def base_of(name: str) -> str:
    return name.rsplit(".", 1)[0]


@dataclass
class SsaProgram:
    instrs: tuple
    spans: tuple  # source line per SSA line
    inputs: tuple  # version-0 values that are read
    outputs: tuple  # final version of every variable that is defined
    loops: tuple  # (entry, header, back-jump) as 1-based line numbers
    cell_of: dict = field(default_factory=dict)  # base name -> cell in the program layout
    width: int = 8
    phi_values: frozenset = frozenset()

    def __len__(self):
        return len(self.instrs)

    def line(self, n: int):
        """Instruction at 1-based line n."""
        return self.instrs[n - 1]

    def dump(self) -> str:
        width = len(str(len(self.instrs)))
        rows = [f"{i + 1:>{width}}: {format_instr(ins)}" for i, ins in enumerate(self.instrs)]
        return "\n".join(rows) + ("\n" if rows else "")

    def defs(self) -> dict:
        """Value name -> list of defining line numbers."""
        out: dict = {}
        for i, ins in enumerate(self.instrs):
            for d in instr_writes(ins):
                out.setdefault(d, []).append(i + 1)
        return out


def build_ssa(instrs: list, lines: list, loops: list, names: list, width: int) -> SsaProgram:
    """Rename a cell-keyed instruction list into SSA form."""
    version: dict = {}
    current: dict = {}
    read_inputs: list = []
    seen_inputs: set = set()
    phi_values: set = set()
    loop_at = {entry: (entry, header, back) for entry, header, back in loops}
    back_copies: dict = {}  # back-jump index -> (phi names, bases)
    out = []

    def cur(cell):
        name = current.get(cell)
        if name is None:
            name = value_name(names[cell], 0)
            current[cell] = name
        if name.endswith(".0") and name not in seen_inputs:
            seen_inputs.add(name)
            read_inputs.append(name)
        return name

    def fresh(cell):
        v = version.get(cell, 0) + 1
        version[cell] = v
        return value_name(names[cell], v)

    for i, ins in enumerate(instrs):
        if i in loop_at:
            entry, header, back = loop_at[i]
            bases = []
            for inner in instrs[entry + 1:back + 1]:
                for c in instr_writes(inner):
                    if c not in bases:
                        bases.append(c)
            srcs = tuple(cur(c) for c in bases)
            dsts = tuple(fresh(c) for c in bases)
            phi_values.update(dsts)
            for c, d in zip(bases, dsts):
                current[c] = d
            back_copies[back] = (dsts, bases)
            out.append(Copy(dsts, srcs, "loop entry"))
            continue
        if i in back_copies:
            dsts, bases = back_copies[i]
            out.append(Jump(ins.target, dsts, tuple(cur(c) for c in bases)))
            for c, d in zip(bases, dsts):
                current[c] = d
            continue
        if isinstance(ins, Assign):
            expr = map_expr(ins.expr, cur)
            out.append(Assign(fresh(ins.dst), expr))
            current[ins.dst] = value_name(names[ins.dst], version[ins.dst])
        elif isinstance(ins, Store):
            index = tuple(map_expr(a, cur) for a in ins.index)
            value = map_expr(ins.value, cur)
            srcs = tuple(cur(c) for c in ins.srcs)
            dsts = tuple(fresh(c) for c in ins.dsts)
            out.append(Store(dsts, srcs, ins.dims, index, value))
            for c, d in zip(ins.dsts, dsts):
                current[c] = d
        elif isinstance(ins, Copy):
            srcs = tuple(cur(c) for c in ins.srcs)
            dsts = tuple(fresh(c) for c in ins.dsts)
            out.append(Copy(dsts, srcs, ins.note))
            for c, d in zip(ins.dsts, dsts):
                current[c] = d
        elif isinstance(ins, Branch):
            out.append(Branch(map_expr(ins.cond, cur), ins.target))
        elif isinstance(ins, Jump):
            out.append(Jump(ins.target))
        else:
            out.append(ins if isinstance(ins, Nop) else Nop())
    outputs = tuple(current[c] for c in sorted(version))
    cell_of = {names[c]: c for c in range(len(names))}
    return SsaProgram(tuple(out), tuple(lines), tuple(read_inputs), outputs,
                      tuple((e + 1, h + 1, b + 1) for e, h, b in loops), cell_of, width,
                      frozenset(phi_values))


def unroll_and_ssa(prog: AbkProgram, stmts: list | None = None,
                   cap: int = DEFAULT_UNROLL_CAP) -> SsaProgram:
    """SSA view of the whole program (or of `stmts`)."""
    unrolled = unroll_statements(prog, prog.body if stmts is None else stmts, cap)
    names = base_layout(prog).names
    return build_ssa(unrolled.instrs, unrolled.lines, unrolled.loops, names, prog.width)


def interpret_ssa(ssa: SsaProgram, inputs: dict, budget: int = 1 << 22) -> dict:
    """Run an SSA program; `inputs` maps variable base names to values.

    Returns base name -> final value for every variable mentioned by the program.
    """
    env: dict = {}

    def read(name):
        if name in env:
            return env[name]
        base = base_of(name)
        return inputs.get(base, 0)

    pc = 0
    steps = 0
    while pc < len(ssa.instrs):
        steps += 1
        if steps > budget:
            raise StepBudgetExceeded("SSA interpreter budget exhausted", steps)
        pc, writes = exec_scalar(ssa.instrs[pc], pc, read, ssa.width)
        for k, v in writes:
            env[k] = v
    final = dict(inputs)
    for name in ssa.outputs:
        final[base_of(name)] = read(name)
    return final
