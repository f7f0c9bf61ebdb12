"""Encoding of check obligations as bitvector constraint systems.

Straight-line programs are executed symbolically (one term per written cell
per step).  RB obligations are unrolled step by step with states merged per
program counter, tracking only the cells that can influence control flow.
Lane indices are one-hot boolean selector families.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from ..errors import NotApplicable
from ..model import InputBatch
from ..obligations import ACTION_KEY, CheckObligation, Mode, Witness
from ..program import (Assign, Branch, Const, Copy, Jump, Load, Nop, Op, Ref, Store,
                       instr_reads, instr_writes, is_straight_line)
from .terms import TermManager

_CMP = {"eq", "ne", "ult", "ule", "ugt", "uge"}


@dataclass(frozen=True)
class Location:
    """Where a solver variable lives in the checked executions."""
    kind: str  # "memory" | "input" | "lane"
    copy: int = 0
    batch: int = 0
    cell: int = -1
    role: str = ""
    index: int = -1


@dataclass
class ConstraintSystem:
    tm: TermManager
    roots: list
    variables: dict  # variable name -> Location
    obligation: CheckObligation
    init_terms: dict = field(default_factory=dict)  # (copy, cell) -> term
    input_terms: dict = field(default_factory=dict)  # (copy, batch, cell) -> term
    selectors: dict = field(default_factory=dict)  # role -> list of boolean terms

    def root(self) -> int:
        return self.tm.conj(self.roots)

    def variable_families(self) -> dict:
        """copy index -> set of variable names that belong to that copy."""
        out: dict = {}
        for name, loc in self.variables.items():
            if loc.kind != "lane":
                out.setdefault(loc.copy, set()).add(name)
        return out

    def decode(self, assignment: dict) -> Witness:
        """Concrete witness from a variable-name -> value assignment."""
        obl = self.obligation
        m = obl.model
        cache: dict = {}
        memories = []
        for c in range(obl.mode.copies):
            mem = [0] * m.layout.n_cells
            for (copy, cell), t in self.init_terms.items():
                if copy == c:
                    mem[cell] = self.tm.evaluate(t, assignment, cache)
            memories.append(tuple(mem))
        batches = []
        for c in range(obl.mode.copies):
            seq = []
            for k in range(obl.batches):
                lanes = []
                for cells in m.layout.input_lanes:
                    words = [self.tm.evaluate(self.input_terms[(c, k, cell)], assignment, cache)
                             if (c, k, cell) in self.input_terms else 0 for cell in cells]
                    if m.layout.has_action:
                        lanes.append((words[0], tuple(words[1:])))
                    else:
                        lanes.append((0, tuple(words)))
                seq.append(InputBatch(tuple(lanes)))
            batches.append(tuple(seq))
        lanes = []
        for role in ("pos", "j", "j2"):
            if role in self.selectors:
                hot = [k for k, s in enumerate(self.selectors[role])
                       if self.tm.evaluate(s, assignment, cache)]
                k = hot[0] if hot else 0
                if role == "pos":
                    b = m.batch_size
                    lanes.extend([k // b, k % b])
                else:
                    lanes.append(k)
        if obl.mode == Mode.SAC:
            lanes = [obl.lane]
        return Witness(tuple(memories), tuple(batches), tuple(lanes))


def control_cone(program) -> set:
    """Cells that can influence which instruction executes next."""
    cone: set = set()
    for ins in program:
        if isinstance(ins, Branch):
            cone |= instr_reads(ins)
    changed = True
    while changed:
        changed = False
        for ins in program:
            if isinstance(ins, (Copy, Jump)):
                for d, s in zip(ins.dsts, ins.srcs):
                    if d in cone and s not in cone:
                        cone.add(s)
                        changed = True
            elif set(instr_writes(ins)) & cone:
                extra = instr_reads(ins) - cone
                if extra:
                    cone |= extra
                    changed = True
    return cone


class Encoder:
    def __init__(self, obl: CheckObligation):
        self.obl = obl
        self.model = m = obl.model
        self.w = m.data_width
        self.tm = TermManager()
        self.roots: list = []
        self.variables: dict = {}
        self.init_terms: dict = {}
        self.input_terms: dict = {}
        self.selectors: dict = {}
        self.input_cells = set(m.layout.input_cells)
        self.action_cells = {lane[0] for lane in m.layout.input_lanes} if m.layout.has_action \
            else set()

    # variables ---------------------------------------------------------------
    def var(self, name: str, loc: Location, width: int | None = None) -> int:
        self.variables[name] = loc
        return self.tm.var(name, self.w if width is None else width)

    def const(self, v: int) -> int:
        return self.tm.const(v, self.w)

    def initial(self, copy: int, cell: int) -> int:
        key = (copy, cell)
        t = self.init_terms.get(key)
        if t is None:
            t = self.var(f"c{copy}.m{cell}", Location("memory", copy, 0, cell))
            self.init_terms[key] = t
        return t

    def constrain_rows(self, copy: int, cells: tuple, rows) -> None:
        rows = sorted(rows)
        if len(rows) == 1:
            for c, v in zip(cells, rows[0]):
                if (copy, c) in self.init_terms:
                    self.roots.append(self.tm.mk_eq(self.init_terms[(copy, c)], self.const(v)))
                else:
                    self.init_terms[(copy, c)] = self.const(v)
            return
        terms = [self.initial(copy, c) for c in cells]
        self.roots.append(self.tm.disj(
            self.tm.conj(self.tm.mk_eq(t, self.const(v)) for t, v in zip(terms, row))
            for row in rows))

    def setup_copy(self, copy: int) -> None:
        pred = self.obl.predicate
        if pred is not None:
            self.constrain_rows(copy, pred.cells, pred.rows)
        if self.obl.mode == Mode.SAC and self.obl.relevant_rows is not None:
            self.constrain_rows(copy, self.model.layout.relevant, self.obl.relevant_rows)

    def input_value(self, copy: int, batch: int, cell: int) -> int:
        key = (copy, batch, cell)
        t = self.input_terms.get(key)
        if t is None:
            t = self.var(f"c{copy}.b{batch}.m{cell}", Location("input", copy, batch, cell))
            if cell in self.action_cells and self.model.n_actions < (1 << self.w):
                self.roots.append(self.tm.mk_ult(t, self.const(self.model.n_actions)))
            self.input_terms[key] = t
        return t

    def one_hot(self, role: str, size: int) -> list:
        sels = [self.var(f"sel.{role}.{k}", Location("lane", role=role, index=k), 1)
                for k in range(size)]
        tm = self.tm
        self.roots.append(tm.disj(sels))
        for a in range(size):
            for b in range(a + 1, size):
                self.roots.append(tm.mk_not(tm.mk_and(sels[a], sels[b])))
        self.selectors[role] = sels
        return sels

    # expressions ---------------------------------------------------------------
    def as_bool(self, t: int) -> int:
        tm = self.tm
        if tm.kinds[t] == "zext" and tm.widths[tm.args[t][0]] == 1:
            return tm.args[t][0]
        return tm.nonzero(t)

    def index_conds(self, dims: tuple, idx: list) -> list:
        tm = self.tm
        conds = [tm.true()]
        for d, t in zip(dims, idx):
            step = []
            for c in conds:
                for v in range(d):
                    hit = tm.mk_eq(t, self.const(v)) if v < (1 << self.w) else tm.false()
                    step.append(tm.mk_and(c, hit))
            conds = step
        return conds

    def term(self, e, read) -> int:
        tm = self.tm
        if isinstance(e, Const):
            return self.const(e.value)
        if isinstance(e, Ref):
            return read(e.key)
        if isinstance(e, Load):
            idx = [self.term(a, read) for a in e.index]
            out = self.const(0)
            for cond, cell in zip(self.index_conds(e.dims, idx), e.cells):
                out = tm.mk_ite(cond, read(cell), out)
            return out
        if isinstance(e, Op):
            if e.op == "ite":
                c = self.as_bool(self.term(e.args[0], read))
                return tm.mk_ite(c, self.term(e.args[1], read), self.term(e.args[2], read))
            args = [self.term(a, read) for a in e.args]
            t = tm.op(e.op, *args)
            return tm.mk_zext(t, self.w) if e.op in _CMP else t
        raise TypeError(e)

    # execution ------------------------------------------------------------------
    def execute(self, copy: int, batch: int, env: dict, inputs: dict) -> dict:
        """Symbolically run one batch; `env` maps cells to terms (missing = initial)."""
        env = dict(env)
        env.update(inputs)

        def read(cell):
            t = env.get(cell)
            return self.initial(copy, cell) if t is None else t

        for ins in self.model.program:
            if isinstance(ins, Assign):
                env[ins.dst] = self.term(ins.expr, read)
            elif isinstance(ins, Store):
                value = self.term(ins.value, read)
                idx = [self.term(a, read) for a in ins.index]
                conds = self.index_conds(ins.dims, idx)
                new = [self.tm.mk_ite(c, value, read(s)) for c, s in zip(conds, ins.srcs)]
                for d, v in zip(ins.dsts, new):
                    env[d] = v
            elif isinstance(ins, Copy):
                new = [read(s) for s in ins.srcs]
                for d, v in zip(ins.dsts, new):
                    env[d] = v
            elif isinstance(ins, Nop):
                continue
            else:
                raise NotApplicable("self-consistency encodings need loop-free sub-accelerators")
        return env

    def batch_inputs(self, copy: int, batch: int, live_lanes=None) -> dict:
        out = {}
        for x, cells in enumerate(self.model.layout.input_lanes):
            for cell in cells:
                if live_lanes is None or x in live_lanes:
                    out[cell] = self.input_value(copy, batch, cell)
                else:
                    out[cell] = self.const(0)
                    self.input_terms[(copy, batch, cell)] = out[cell]
        return out

    def lane_words(self, inputs: dict) -> list:
        return [[inputs[c] for c in cells] for cells in self.model.layout.input_lanes]

    def out_words(self, env: dict, copy: int) -> list:
        def read(cell):
            t = env.get(cell)
            return self.initial(copy, cell) if t is None else t
        return [[read(c) for c in cells] for cells in self.model.layout.output_lanes]

    def rel_words(self, env: dict, copy: int) -> list:
        return [env[c] if c in env else self.initial(copy, c) for c in self.model.layout.relevant]

    def same_input_case(self, premise: list, ins_a: list, ins_b: list, outs_a: list,
                        outs_b: list, extra=None, tied: dict | None = None) -> int:
        """premise ∧ in_a = in_b ∧ out_a ≠ out_b, rewriting in_b to in_a where in_b is free.

        Under the equality premise the rewrite is equivalence-preserving; it lets
        hash-consing fold the output comparison for lanes that do not depend on
        anything but their own input.
        """
        tm = self.tm
        mapping = dict(tied or {})
        mapping.update((b, a) for a, b in zip(ins_a, ins_b) if tm.kinds[b] == "var" and a != b)
        cache: dict = {}
        outs_b = [tm.substitute(t, mapping, cache) for t in outs_b]
        bad = self.any_differs(outs_a, outs_b)
        if extra is not None:
            bad = tm.mk_or(bad, tm.substitute(extra, mapping, cache))
        if tm.is_const(bad) and tm.value(bad) == 0:
            return bad
        return tm.conj(list(premise) + [self.all_equal(ins_a, ins_b), bad])

    def all_equal(self, xs: list, ys: list) -> int:
        return self.tm.conj(self.tm.mk_eq(a, b) for a, b in zip(xs, ys))

    def any_differs(self, xs: list, ys: list) -> int:
        return self.tm.disj(self.tm.mk_ne(a, b) for a, b in zip(xs, ys))

    # obligation modes -------------------------------------------------------------
    def encode(self) -> ConstraintSystem:
        obl = self.obl
        for copy in range(obl.mode.copies):
            self.setup_copy(copy)
        if obl.mode == Mode.RB:
            self.encode_rb()
        else:
            if not is_straight_line(self.model.program):
                raise NotApplicable(f"{self.model.name}: {obl.mode.value} needs a loop-free "
                                    "sub-accelerator (use the rb command for looping code)")
            getattr(self, "encode_" + obl.mode.name.lower())()
        return ConstraintSystem(self.tm, self.roots, self.variables, obl, self.init_terms,
                                self.input_terms, self.selectors)

    def encode_fc(self) -> None:
        m, tm = self.model, self.tm
        n, b = self.obl.bound, m.batch_size
        env: dict = {}
        ins, outs, rels = [], [], []
        for k in range(n):
            rels.append(self.rel_words(env, 0))
            inputs = self.batch_inputs(0, k)
            env = self.execute(0, k, env, inputs)
            ins.append(self.lane_words(inputs))
            outs.append(self.out_words(env, 0))
        pos = self.one_hot("pos", n * b)
        j2 = self.one_hot("j2", b)
        # one disjunct per (i, j, j') triple keeps each case a small local circuit
        cases = []
        for k in range(n):
            same_rel = self.all_equal(rels[k], rels[n - 1])
            for x in range(b):
                for y in range(b):
                    if (k, x) == (n - 1, y):
                        # (i, j) = (n, j') compares a lane with itself
                        self.roots.append(tm.mk_not(tm.mk_and(pos[k * b + x], j2[y])))
                        continue
                    cases.append(self.same_input_case(
                        [pos[k * b + x], j2[y], same_rel], ins[k][x], ins[n - 1][y],
                        outs[k][x], outs[n - 1][y]))
        self.roots.append(tm.disj(cases))

    def _two_copies(self, fcd: bool) -> None:
        m = self.model
        b = m.batch_size
        runs = []
        for copy in range(2):
            inputs = self.batch_inputs(copy, 0)
            env = self.execute(copy, 0, {}, inputs)
            runs.append((self.lane_words(inputs), self.out_words(env, copy), env))
        for c in m.layout.relevant:
            self.roots.append(self.tm.mk_eq(self.initial(0, c), self.initial(1, c)))
        j = self.one_hot("j", b)
        j2 = self.one_hot("j2", b)
        (in0, out0, env0), (in1, out1, env1) = runs
        tm = self.tm
        # relevant cells are equal across copies (asserted above)
        tied = {self.initial(1, c): self.initial(0, c) for c in m.layout.relevant
                if tm.kinds[self.initial(1, c)] == "var"}
        rel_bad = tm.false()
        if fcd:
            rel_bad = self.any_differs(self.rel_words(env0, 0), self.rel_words(env1, 1))
        cases = []
        for x in range(b):
            for y in range(b):
                cases.append(self.same_input_case([j[x], j2[y]], in0[x], in1[y],
                                                  out0[x], out1[y], rel_bad, tied))
        self.roots.append(tm.disj(cases))

    def encode_strong_fc(self) -> None:
        self._two_copies(False)

    def encode_strong_fcd(self) -> None:
        self._two_copies(True)

    def encode_intra_fc(self) -> None:
        m, tm = self.model, self.tm
        b = m.batch_size
        inputs = self.batch_inputs(0, 0)
        env = self.execute(0, 0, {}, inputs)
        ins, outs = self.lane_words(inputs), self.out_words(env, 0)
        j = self.one_hot("j", b)
        j2 = self.one_hot("j2", b)
        cases = []
        for x in range(b):
            self.roots.append(tm.mk_not(tm.mk_and(j[x], j2[x])))
            for y in range(b):
                if x != y:
                    cases.append(self.same_input_case([j[x], j2[y]], ins[x], ins[y],
                                                      outs[x], outs[y]))
        self.roots.append(tm.disj(cases))

    def encode_sac(self) -> None:
        obl, m = self.obl, self.model
        spec = obl.spec
        if spec.exprs is None:
            raise NotApplicable("callback specs can only be checked by the exhaustive backend")
        if obl.existential:
            raise NotApplicable("the existential single-action variant is exhaustive-only")
        inputs = self.batch_inputs(0, 0, live_lanes={obl.lane})
        env = self.execute(0, 0, {}, inputs)
        lane = self.lane_words(inputs)[obl.lane]
        action = lane[0] if m.layout.has_action else self.const(0)
        data = lane[1:] if m.layout.has_action else lane
        rel = [self.initial(0, c) for c in m.layout.relevant]

        def read(key):
            if key == ACTION_KEY:
                return action
            kind, k = key
            return data[k] if kind == "d" else rel[k]

        expected = [self.term(e, read) for e in spec.exprs]
        got = self.out_words(env, 0)[obl.lane]
        self.roots.append(self.any_differs(got, expected))

    def encode_rb(self) -> None:
        """Unroll `bound` steps, merging states per program counter."""
        tm = self.tm
        prog = self.model.program
        final = len(prog)
        cone = control_cone(prog)
        inputs = {c: self.input_value(0, 0, c) for c in self.input_cells if c in cone}
        for cells in self.model.layout.input_lanes:
            for c in cells:
                if c not in inputs:
                    self.input_terms[(0, 0, c)] = self.const(0)

        def reader(env):
            def read(cell):
                t = env.get(cell)
                if t is not None:
                    return t
                if cell in self.input_cells:
                    return inputs.get(cell, self.const(0))
                return self.initial(0, cell) if cell in cone else self.const(0)
            return read

        def update(env, writes):
            new = dict(env)
            for k, v in writes:
                if k in cone:
                    new[k] = v
            return new

        frontier = {0: (tm.true(), {})}
        for _ in range(self.obl.bound):
            nxt: dict = {}

            def merge(pc, g, env):
                if tm.is_const(g) and tm.value(g) == 0:
                    return
                if pc not in nxt:
                    nxt[pc] = (g, env)
                    return
                g0, e0 = nxt[pc]
                if e0 is env:
                    nxt[pc] = (tm.mk_or(g0, g), env)
                    return
                r0, r1 = reader(e0), reader(env)
                merged = {}
                for c in set(e0) | set(env):
                    a, b = r0(c), r1(c)
                    merged[c] = a if a == b else tm.mk_ite(g0, a, b)
                nxt[pc] = (tm.mk_or(g0, g), merged)

            for pc, (g, env) in sorted(frontier.items()):
                if pc == final:
                    continue
                ins = prog[pc]
                read = reader(env)
                if isinstance(ins, Branch):
                    c = self.as_bool(self.term(ins.cond, read))
                    merge(pc + 1, tm.mk_and(g, c), env)
                    merge(ins.target, tm.mk_and(g, tm.mk_not(c)), env)
                elif isinstance(ins, Jump):
                    merge(ins.target, g, update(env, [(d, read(s))
                                                      for d, s in zip(ins.dsts, ins.srcs)]))
                elif isinstance(ins, Assign):
                    merge(pc + 1, g, update(env, [(ins.dst, self.term(ins.expr, read))]
                                            if ins.dst in cone else []))
                elif isinstance(ins, Store):
                    if set(ins.dsts) & cone:
                        value = self.term(ins.value, read)
                        conds = self.index_conds(ins.dims, [self.term(a, read) for a in ins.index])
                        writes = [(d, tm.mk_ite(c, value, read(s)))
                                  for c, d, s in zip(conds, ins.dsts, ins.srcs)]
                        env = update(env, writes)
                    merge(pc + 1, g, env)
                elif isinstance(ins, Copy):
                    merge(pc + 1, g, update(env, [(d, read(s))
                                                  for d, s in zip(ins.dsts, ins.srcs)]))
                else:
                    merge(pc + 1, g, env)
            frontier = nxt
            if all(pc == final for pc in frontier):
                break
        self.roots.append(tm.disj(g for pc, (g, _) in sorted(frontier.items()) if pc != final))


def encode(obl: CheckObligation) -> ConstraintSystem:
    return Encoder(obl).encode()
