"""Exhaustive enumeration backend (the oracle).

Every concrete assignment to the open parts of an obligation is enumerated in
a fixed order: lane-index combinations lexicographically, then a mixed-radix
counter over the value slots, first slot most significant.  Straight-line
programs run vectorised over chunks of cases; looping programs run case by
case.  Only cells that can affect the outcome become slots: cells read before
being written (or, for RB, cells in the control cone); everything else is
fixed to zero, which leaves the verdict unchanged.
"""
from __future__ import annotations

import time
from dataclasses import dataclass
from math import prod

import numpy as np

from ..errors import ExplosionCap, NotApplicable, StepBudgetExceeded
from ..model import InputBatch, _run_segment
from ..obligations import ACTION_KEY, CheckObligation, Mode, Witness, replay
from ..program import (Assign, Copy, Jump, Store, eval_vector, exec_vector, instr_reads,
                       is_straight_line)
from .encode import control_cone

DEFAULT_CASE_CAP = 1 << 24
CHUNK = 1 << 16
U = np.uint64


@dataclass
class Caps:
    cases: int = DEFAULT_CASE_CAP
    chunk: int = CHUNK


def live_in(program) -> set:
    """Cells that may be read before the program has written them."""
    if not is_straight_line(program):
        acc: set = set()
        for ins in program:
            acc |= instr_reads(ins)
        return acc
    written: set = set()
    live: set = set()
    for ins in program:
        live |= instr_reads(ins) - written
        if isinstance(ins, Assign):
            written.add(ins.dst)
        elif isinstance(ins, (Store, Copy, Jump)):
            written.update(ins.dsts)
    return live


class _Space:
    def __init__(self):
        self.labels: list = []
        self.sizes: list = []

    def add(self, label: str, size: int) -> int:
        self.labels.append(label)
        self.sizes.append(size)
        return len(self.sizes) - 1

    @property
    def total(self) -> int:
        return prod(self.sizes)

    def decode(self, idx: np.ndarray) -> list:
        vals = [None] * len(self.sizes)
        rem = idx.copy()
        for s in range(len(self.sizes) - 1, -1, -1):
            size = U(self.sizes[s])
            vals[s] = rem % size
            rem //= size
        return vals


def lane_combos(obl: CheckObligation) -> list:
    b = obl.model.batch_size
    if obl.mode == Mode.FC:
        n = obl.bound
        return [(i, j, j2) for i in range(n) for j in range(b) for j2 in range(b)
                if (i, j) != (n - 1, j2)]
    if obl.mode in (Mode.STRONG_FC, Mode.STRONG_FCD):
        return [(j, j2) for j in range(b) for j2 in range(b)]
    if obl.mode == Mode.INTRA_FC:
        return [(j, j2) for j in range(b) for j2 in range(b) if j != j2]
    if obl.mode == Mode.SAC:
        return [(obl.lane,)]
    return [()]


class _Plan:
    """Value sources for one lane combination.

    Keys are ("m", copy, cell) for initial memory and ("i", copy, batch, cell)
    for inputs.  Sources: ("slot", s), ("const", v), ("row", s, column),
    ("tie", key).
    """

    def __init__(self, obl: CheckObligation, lanes: tuple):
        self.obl = obl
        m = self.model = obl.model
        self.space = _Space()
        self.src: dict = {}
        w = m.data_width
        rb = obl.mode == Mode.RB
        cone = control_cone(m.program) if rb else None
        inputs = set(m.layout.input_cells)
        free = (cone if rb else live_in(m.program)) - inputs
        rel = set(m.layout.relevant)
        pred = obl.predicate
        two = obl.mode in (Mode.STRONG_FC, Mode.STRONG_FCD)
        ties = self._lane_ties(lanes)
        for copy in range(obl.mode.copies):
            if obl.mode == Mode.SAC and obl.relevant_rows is not None:
                self._rows(copy, m.layout.relevant, obl.relevant_rows, "rel")
            if pred is not None:
                cells = tuple(c for c in pred.cells if ("m", copy, c) not in self.src)
                pos = [pred.cells.index(c) for c in cells]
                rows = {tuple(r[p] for p in pos) for r in pred.rows}
                self._rows(copy, cells, rows, "init")
            for cell in sorted(free):
                key = ("m", copy, cell)
                if key in self.src:
                    continue
                if copy == 1 and two and cell in rel and self.src.get(("m", 0, cell), ("",))[0] == "slot":
                    self.src[key] = ("tie", ("m", 0, cell))
                else:
                    self.src[key] = ("slot", self.space.add(f"c{copy}.{m.layout.name(cell)}", 1 << w))
            for k in range(obl.batches):
                for x, cells in enumerate(m.layout.input_lanes):
                    tie = ties.get((copy, k, x))
                    for pos, cell in enumerate(cells):
                        key = ("i", copy, k, cell)
                        if tie is not None:
                            tc, tk, tx = tie
                            self.src[key] = ("tie", ("i", tc, tk, m.layout.input_lanes[tx][pos]))
                        elif (obl.mode == Mode.SAC and x != obl.lane) or (rb and cell not in cone):
                            self.src[key] = ("const", 0)
                        else:
                            size = m.n_actions if (m.layout.has_action and pos == 0) else 1 << w
                            self.src[key] = ("slot", self.space.add(f"c{copy}.b{k}.lane{x}.{pos}",
                                                                    size))

    def _rows(self, copy: int, cells: tuple, rows, label: str) -> None:
        if not cells:
            return
        table = np.array(sorted(rows), dtype=U).reshape(len(rows), len(cells))
        s = self.space.add(f"c{copy}.{label}-row", len(rows))
        for p, c in enumerate(cells):
            self.src[("m", copy, c)] = ("row", s, table[:, p])

    def _lane_ties(self, lanes: tuple) -> dict:
        """(copy, batch, lane) -> (copy, batch, lane) whose inputs it must equal."""
        mode = self.obl.mode
        if mode == Mode.FC:
            i, j, j2 = lanes
            return {(0, self.obl.bound - 1, j2): (0, i, j)}
        if mode in (Mode.STRONG_FC, Mode.STRONG_FCD):
            j, j2 = lanes
            return {(1, 0, j2): (0, 0, j)}
        if mode == Mode.INTRA_FC:
            j, j2 = lanes
            return {(0, 0, j2): (0, 0, j)}
        return {}

    def values(self, idx: np.ndarray) -> dict:
        slots = self.space.decode(idx)
        out = {}
        for key, src in self.src.items():
            if src[0] == "slot":
                out[key] = slots[src[1]]
            elif src[0] == "const":
                out[key] = U(src[1])
            elif src[0] == "row":
                out[key] = src[2][slots[src[1]].astype(np.int64)]
        for key, src in self.src.items():
            if src[0] == "tie":
                out[key] = out[src[1]]
        return out


def _execute(model, env: dict, n: int, budget: int):
    """Run one batch for every case; returns (final env, done mask)."""
    if is_straight_line(model.program):
        # a straight-line run takes exactly one step per instruction
        if len(model.program) > budget:
            return env, np.zeros(n, dtype=bool)
        exec_vector(model.program, env, model.data_width)
        return env, np.ones(n, dtype=bool)
    cells = model.layout.n_cells
    mat = np.zeros((cells, n), dtype=U)
    for c, v in env.items():
        mat[c, :] = v
    done = np.zeros(n, dtype=bool)
    for k in range(n):
        mem = [int(v) for v in mat[:, k]]
        try:
            seg = _run_segment(model, mem, budget, False, False)
        except StepBudgetExceeded:
            continue
        done[k] = True
        mat[:, k] = seg.final.memory
    return {c: mat[c] for c in range(cells)}, done


def _read(env: dict, cell: int):
    return env.get(cell, U(0))


def _differs(xs: list, ys: list, n: int) -> np.ndarray:
    out = np.zeros(n, dtype=bool)
    for a, b in zip(xs, ys):
        out |= np.broadcast_to(a != b, (n,))
    return out


def _equal(xs: list, ys: list, n: int) -> np.ndarray:
    return ~_differs(xs, ys, n)


def _pred_mask(pred, env: dict, n: int) -> np.ndarray:
    ok = np.zeros(n, dtype=bool)
    for row in pred.rows:
        hit = np.ones(n, dtype=bool)
        for c, v in zip(pred.cells, row):
            hit &= np.broadcast_to(_read(env, c) == U(v), (n,))
        ok |= hit
    return ok


def _chunk_outcome(obl: CheckObligation, plan: _Plan, lanes: tuple, idx: np.ndarray):
    """Violation mask for a chunk, plus (good codes, bad codes) for existential SAC."""
    m = obl.model
    n = len(idx)
    vals = plan.values(idx)
    rel = m.layout.relevant
    runs = []
    admissible = np.ones(n, dtype=bool)
    for copy in range(obl.mode.copies):
        env = {key[2]: v for key, v in vals.items() if key[0] == "m" and key[1] == copy}
        if obl.predicate is not None:
            admissible &= _pred_mask(obl.predicate, env, n)
        starts, finals, ins, done = [], [], [], np.ones(n, dtype=bool)
        budget = obl.bound if obl.mode == Mode.RB else m.step_budget
        for k in range(obl.batches):
            starts.append([_read(env, c) for c in rel])
            for key, v in vals.items():
                if key[0] == "i" and key[1] == copy and key[2] == k:
                    env[key[3]] = v
            ins.append([[_read(env, c) for c in cells] for cells in m.layout.input_lanes])
            env, ok = _execute(m, dict(env), n, budget)
            done &= ok
            finals.append(dict(env))
        runs.append((starts, finals, ins, done))
    if obl.mode == Mode.RB:
        return admissible & ~runs[0][3], None
    outs = [[[[_read(f, c) for c in cells] for cells in m.layout.output_lanes] for f in finals]
            for _, finals, _, _ in runs]
    done = admissible.copy()
    for r in runs:
        done &= r[3]
    if obl.mode == Mode.FC:
        i, j, j2 = lanes
        last = obl.bound - 1
        starts = runs[0][0]
        bad = _equal(starts[i], starts[last], n) & _differs(outs[0][i][j], outs[0][last][j2], n)
    elif obl.mode in (Mode.STRONG_FC, Mode.STRONG_FCD):
        j, j2 = lanes
        premise = _equal(runs[0][0][0], runs[1][0][0], n)
        bad = _differs(outs[0][0][j], outs[1][0][j2], n)
        if obl.mode == Mode.STRONG_FCD:
            fa = [_read(runs[0][1][0], c) for c in rel]
            fb = [_read(runs[1][1][0], c) for c in rel]
            bad |= _differs(fa, fb, n)
        bad &= premise
    elif obl.mode == Mode.INTRA_FC:
        j, j2 = lanes
        bad = _differs(outs[0][0][j], outs[0][0][j2], n)
    else:
        (j,) = lanes
        lane = runs[0][2][0][j]
        action = lane[0] if m.layout.has_action else U(0)
        data = lane[1:] if m.layout.has_action else lane
        start_rel = runs[0][0][0]
        expected = _spec_vector(obl.spec, action, data, start_rel, n)
        bad = _differs(outs[0][0][j], expected, n)
        if obl.existential:
            code = np.zeros(n, dtype=U)
            for v in [action] + list(data) + list(start_rel):
                code = code * U(1 << m.data_width) + np.broadcast_to(v, (n,)).astype(U)
            ok = done & ~bad
            bad_m = done & bad
            return None, (code[ok], code[bad_m], idx[bad_m])
    return done & bad, None


def _spec_vector(spec, action, data, rel, n: int) -> list:
    if spec.exprs is not None:
        def read(key):
            if key == ACTION_KEY:
                return action
            kind, k = key
            return data[k] if kind == "d" else rel[k]
        return [eval_vector(e, read, spec.width) for e in spec.exprs]
    cols = [np.broadcast_to(v, (n,)) for v in [action] + list(data) + list(rel)]
    out = np.zeros((spec.out_size, n), dtype=U)
    for k in range(n):
        vs = [int(c[k]) for c in cols]
        out[:, k] = spec(vs[0], vs[1:1 + len(data)], vs[1 + len(data):])
    return list(out)


def _witness(obl: CheckObligation, plan: _Plan, lanes: tuple, index: int) -> Witness:
    m = obl.model
    vals = plan.values(np.array([index], dtype=U))
    memories, batches = [], []
    for copy in range(obl.mode.copies):
        mem = [0] * m.layout.n_cells
        for key, v in vals.items():
            if key[0] == "m" and key[1] == copy:
                mem[key[2]] = int(np.broadcast_to(v, (1,))[0])
        memories.append(tuple(mem))
        seq = []
        for k in range(obl.batches):
            lane_vals = []
            for cells in m.layout.input_lanes:
                words = [int(np.broadcast_to(vals[("i", copy, k, c)], (1,))[0]) for c in cells]
                if m.layout.has_action:
                    lane_vals.append((words[0], tuple(words[1:])))
                else:
                    lane_vals.append((0, tuple(words)))
            seq.append(InputBatch(tuple(lane_vals)))
        batches.append(tuple(seq))
    return Witness(tuple(memories), tuple(batches), tuple(lanes))


def check_exhaustive(obl: CheckObligation, caps: Caps | None = None):
    from .check import CheckResult, Verdict

    caps = caps or Caps()
    start = time.perf_counter()
    if obl.mode != Mode.RB and not is_straight_line(obl.model.program):
        # same scope as the symbolic encoder: looping code is checked for RB only
        raise NotApplicable(f"{obl.model.name}: {obl.mode.value} needs a loop-free "
                            "sub-accelerator (use the rb command for looping code)")
    combos = lane_combos(obl)
    plans = [(lanes, _Plan(obl, lanes)) for lanes in combos]
    domain = sum(p.space.total for _, p in plans)
    if domain > caps.cases:
        raise ExplosionCap(f"{obl.mode.value} on {obl.model.name}: {domain} cases exceed the cap "
                           f"of {caps.cases}")
    stats = {"backend": "oracle", "domain": domain, "combos": len(combos),
             "slots": len(plans[0][1].space.sizes) if plans else 0}
    cases = 0
    existential = obl.mode == Mode.SAC and obl.existential
    good_codes: set = set()
    bad_first: dict = {}
    for lanes, plan in plans:
        total = plan.space.total
        for lo in range(0, total, caps.chunk):
            idx = np.arange(lo, min(total, lo + caps.chunk), dtype=U)
            cases += len(idx)
            bad, ex = _chunk_outcome(obl, plan, lanes, idx)
            if existential:
                ok_codes, bad_codes, bad_idx = ex
                good_codes.update(int(c) for c in np.unique(ok_codes))
                for c, k in zip(bad_codes.tolist(), bad_idx.tolist()):
                    bad_first.setdefault(c, (lanes, plan, k))
                continue
            hits = np.flatnonzero(bad)
            if hits.size:
                w = _witness(obl, plan, lanes, int(idx[hits[0]]))
                stats.update(cases=cases, seconds=time.perf_counter() - start)
                return CheckResult(Verdict.SAT, replay(obl, w), stats=stats, obligation=obl)
    if existential:
        missing = sorted(set(bad_first) - good_codes)
        if missing:
            lanes, plan, k = bad_first[missing[0]]
            w = _witness(obl, plan, lanes, k)
            stats.update(cases=cases, seconds=time.perf_counter() - start)
            return CheckResult(Verdict.SAT, replay(obl, w), stats=stats, obligation=obl)
    stats.update(cases=cases, seconds=time.perf_counter() - start)
    return CheckResult(Verdict.UNSAT, stats=stats, obligation=obl)
