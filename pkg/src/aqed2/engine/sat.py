"""Conflict-driven clause-learning SAT solver.

Two watched literals, VSIDS decisions with phase saving, first-UIP learning
with local minimisation, Luby restarts, and activity-based learned-clause
reduction.  Literal values live in a list indexed by the signed literal itself
(Python's negative indexing maps -v to a distinct slot), which keeps the hot
loop free of abs()/sign arithmetic.
"""
from __future__ import annotations

import heapq
import time
from dataclasses import dataclass, field
from enum import Enum


class SatStatus(Enum):
    SAT = "sat"
    UNSAT = "unsat"
    UNKNOWN = "unknown"


@dataclass
class SatResult:
    status: SatStatus
    model: list | None = None  # model[v] truth value for v in 1..n
    cause: str = ""
    stats: dict = field(default_factory=dict)


def luby(i: int) -> int:
    """i-th element (1-based) of the Luby sequence 1,1,2,1,1,2,4,..."""
    k = 1
    while (1 << k) - 1 < i:
        k += 1
    while True:
        if i == (1 << k) - 1:
            return 1 << (k - 1)
        i -= (1 << (k - 1)) - 1
        k = 1
        while (1 << k) - 1 < i:
            k += 1


class Solver:
    def __init__(self, n_vars: int, clauses: list):
        self.n = n_vars
        size = 2 * n_vars + 1
        self.val = [0] * size  # val[lit]: 1 true, -1 false, 0 unassigned
        self.level = [0] * (n_vars + 1)
        self.reason = [None] * (n_vars + 1)
        self.activity = [0.0] * (n_vars + 1)
        self.phase = [False] * (n_vars + 1)
        self.watches = [[] for _ in range(size)]
        self.clauses: list = []
        self.learnt: set = set()
        self.clause_act: dict = {}
        self.trail: list = []
        self.trail_lim: list = []
        self.qhead = 0
        self.inc = 1.0
        self.cla_inc = 1.0
        self.heap = [(0.0, v) for v in range(1, n_vars + 1)]
        heapq.heapify(self.heap)
        self.ok = True
        self.stats = {"decisions": 0, "conflicts": 0, "propagations": 0, "restarts": 0,
                      "learned": 0, "deleted": 0}
        for cl in clauses:
            if not self.add_clause(cl):
                self.ok = False
                break

    # clause database --------------------------------------------------------
    def add_clause(self, lits) -> bool:
        seen = set()
        out = []
        for lit in lits:
            if -lit in seen:
                return True  # tautology
            if lit not in seen:
                seen.add(lit)
                out.append(lit)
        # drop literals false at level 0; satisfied clauses are skipped
        val = self.val
        kept = []
        for lit in out:
            if val[lit] == 1 and self.level[abs(lit)] == 0:
                return True
            if val[lit] == -1 and self.level[abs(lit)] == 0:
                continue
            kept.append(lit)
        if not kept:
            return False
        if len(kept) == 1:
            if val[kept[0]] == -1:
                return False
            if val[kept[0]] == 0:
                self.assign(kept[0], None)
                return self.propagate() is None
            return True
        ci = len(self.clauses)
        self.clauses.append(kept)
        self.watches[kept[0]].append(ci)
        self.watches[kept[1]].append(ci)
        return True

    def assign(self, lit: int, reason) -> None:
        v = lit if lit > 0 else -lit
        self.val[lit] = 1
        self.val[-lit] = -1
        self.level[v] = len(self.trail_lim)
        self.reason[v] = reason
        self.trail.append(lit)

    # propagation --------------------------------------------------------------
    def propagate(self):
        """Unit propagation; returns a conflicting clause index or None."""
        val = self.val
        clauses = self.clauses
        watches = self.watches
        trail = self.trail
        props = 0
        while self.qhead < len(trail):
            p = trail[self.qhead]
            self.qhead += 1
            false_lit = -p
            ws = watches[false_lit]
            i = j = 0
            n = len(ws)
            conflict = None
            while i < n:
                ci = ws[i]
                i += 1
                c = clauses[ci]
                if c is None:
                    continue
                if c[0] == false_lit:
                    c[0], c[1] = c[1], false_lit
                first = c[0]
                if val[first] == 1:
                    ws[j] = ci
                    j += 1
                    continue
                found = False
                for k in range(2, len(c)):
                    lk = c[k]
                    if val[lk] != -1:
                        c[1] = lk
                        c[k] = false_lit
                        watches[lk].append(ci)
                        found = True
                        break
                if found:
                    continue
                ws[j] = ci
                j += 1
                if val[first] == -1:
                    conflict = ci
                    while i < n:
                        ws[j] = ws[i]
                        j += 1
                        i += 1
                    break
                # unit
                v = first if first > 0 else -first
                val[first] = 1
                val[-first] = -1
                self.level[v] = len(self.trail_lim)
                self.reason[v] = ci
                trail.append(first)
                props += 1
            del ws[j:]
            if conflict is not None:
                self.stats["propagations"] += props
                return conflict
        self.stats["propagations"] += props
        return None

    # conflict analysis ------------------------------------------------------------
    def bump_var(self, v: int) -> None:
        self.activity[v] += self.inc
        if self.activity[v] > 1e100:
            for u in range(1, self.n + 1):
                self.activity[u] *= 1e-100
            self.inc *= 1e-100
            self.heap = [(-self.activity[u], u) for u in range(1, self.n + 1)
                         if self.val[u] == 0]
            heapq.heapify(self.heap)
            return
        if self.val[v] == 0:
            heapq.heappush(self.heap, (-self.activity[v], v))

    def analyze(self, confl: int):
        level = self.level
        reason = self.reason
        seen = [False] * (self.n + 1)
        learnt = [0]
        counter = 0
        p = None
        idx = len(self.trail) - 1
        cur_level = len(self.trail_lim)
        ci = confl
        while True:
            if ci in self.clause_act:
                self.clause_act[ci] += self.cla_inc
            for q in self.clauses[ci]:
                if p is not None and q == p:
                    continue
                v = q if q > 0 else -q
                if not seen[v] and level[v] > 0:
                    seen[v] = True
                    self.bump_var(v)
                    if level[v] >= cur_level:
                        counter += 1
                    else:
                        learnt.append(q)
            while True:
                p = self.trail[idx]
                idx -= 1
                if seen[p if p > 0 else -p]:
                    break
            v = p if p > 0 else -p
            counter -= 1
            if counter == 0:
                break
            ci = reason[v]
        learnt[0] = -p
        # local minimisation: drop literals implied by other literals of the clause
        marked = {abs(q) for q in learnt}
        minimized = [learnt[0]]
        for q in learnt[1:]:
            r = reason[abs(q)]
            if r is None:
                minimized.append(q)
                continue
            if all(abs(x) in marked or level[abs(x)] == 0
                   for x in self.clauses[r] if abs(x) != abs(q)):
                continue
            minimized.append(q)
        learnt = minimized
        if len(learnt) == 1:
            back = 0
        else:
            best = max(range(1, len(learnt)), key=lambda k: level[abs(learnt[k])])
            learnt[1], learnt[best] = learnt[best], learnt[1]
            back = level[abs(learnt[1])]
        return learnt, back

    def backtrack(self, lvl: int) -> None:
        if len(self.trail_lim) <= lvl:
            return
        start = self.trail_lim[lvl]
        val = self.val
        for lit in self.trail[start:]:
            v = lit if lit > 0 else -lit
            self.phase[v] = lit > 0
            val[lit] = 0
            val[-lit] = 0
            self.reason[v] = None
            heapq.heappush(self.heap, (-self.activity[v], v))
        del self.trail[start:]
        del self.trail_lim[lvl:]
        self.qhead = len(self.trail)

    def decide(self):
        heap = self.heap
        val = self.val
        while heap:
            _, v = heapq.heappop(heap)
            if val[v] == 0:
                return v if self.phase[v] else -v
        return None

    def reduce_db(self) -> None:
        locked = {self.reason[abs(l)] for l in self.trail}
        cands = sorted((ci for ci in self.learnt if ci not in locked and len(self.clauses[ci]) > 2),
                       key=lambda ci: self.clause_act[ci])
        for ci in cands[:len(cands) // 2]:
            self.clauses[ci] = None
            self.learnt.discard(ci)
            del self.clause_act[ci]
            self.stats["deleted"] += 1

    # main loop ------------------------------------------------------------------
    def solve(self, max_conflicts: int | None = None, deadline: float | None = None) -> SatResult:
        if not self.ok:
            return SatResult(SatStatus.UNSAT, stats=dict(self.stats))
        if self.propagate() is not None:
            return SatResult(SatStatus.UNSAT, stats=dict(self.stats))
        restart_i = 1
        budget = 100 * luby(restart_i)
        since_restart = 0
        max_learnts = max(len(self.clauses) // 3, 2000)
        while True:
            confl = self.propagate()
            if confl is not None:
                self.stats["conflicts"] += 1
                since_restart += 1
                if not self.trail_lim:
                    return SatResult(SatStatus.UNSAT, stats=dict(self.stats))
                learnt, back = self.analyze(confl)
                self.backtrack(back)
                if len(learnt) == 1:
                    self.assign(learnt[0], None)
                else:
                    ci = len(self.clauses)
                    self.clauses.append(learnt)
                    self.watches[learnt[0]].append(ci)
                    self.watches[learnt[1]].append(ci)
                    self.learnt.add(ci)
                    self.clause_act[ci] = self.cla_inc
                    self.stats["learned"] += 1
                    self.assign(learnt[0], ci)
                self.inc /= 0.95
                self.cla_inc /= 0.999
                if max_conflicts is not None and self.stats["conflicts"] >= max_conflicts:
                    return SatResult(SatStatus.UNKNOWN, cause="conflicts", stats=dict(self.stats))
                if deadline is not None and self.stats["conflicts"] % 64 == 0 \
                        and time.perf_counter() > deadline:
                    return SatResult(SatStatus.UNKNOWN, cause="timeout", stats=dict(self.stats))
                continue
            if since_restart >= budget:
                self.stats["restarts"] += 1
                restart_i += 1
                budget = 100 * luby(restart_i)
                since_restart = 0
                self.backtrack(0)
            if len(self.learnt) >= max_learnts:
                self.reduce_db()
                max_learnts = int(max_learnts * 1.1)
            lit = self.decide()
            if lit is None:
                model = [False] * (self.n + 1)
                for v in range(1, self.n + 1):
                    model[v] = self.val[v] == 1
                return SatResult(SatStatus.SAT, model=model, stats=dict(self.stats))
            self.stats["decisions"] += 1
            if deadline is not None and self.stats["decisions"] % 256 == 0 \
                    and time.perf_counter() > deadline:
                return SatResult(SatStatus.UNKNOWN, cause="timeout", stats=dict(self.stats))
            self.trail_lim.append(len(self.trail))
            self.assign(lit, None)


def solve(n_vars: int, clauses: list, max_conflicts: int | None = None,
          seconds: float | None = None) -> SatResult:
    deadline = None if seconds is None else time.perf_counter() + seconds
    return Solver(n_vars, clauses).solve(max_conflicts, deadline)
