"""Sliding-window responsiveness campaign over the SSA view of a program.

A window of SSA lines becomes a one-lane sub-model: values the window reads
but never defines are its inputs, definitions used after the window (or
live at program exit) are its outputs, and every other value is
non-relevant.  The initial state is fully symbolic.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from enum import Enum

from .abk.ssa import SsaProgram
from .engine.check import Budget, CheckResult, Verdict, check
from .errors import ConfigError, EmptyInterface
from .model import AcceleratorModel, MemoryLayout
from .obligations import build_rb
from .program import Branch, Jump, instr_reads, instr_writes, map_instr

DEFAULT_WINDOW = 16
DEFAULT_DELTA = 8


class Phase(Enum):
    ENLARGING = "enlarging"
    SHRINKING = "shrinking"


@dataclass
class WindowRecord:
    top: int
    bottom: int
    checked: tuple  # (top, bottom) after widening to whole loops
    phase: Phase
    verdict: str  # unsat | sat | unknown | empty
    seconds: float = 0.0
    cause: str = ""

    def to_dict(self) -> dict:
        out = {"top": self.top, "bottom": self.bottom, "checked": list(self.checked),
               "phase": self.phase.value, "verdict": self.verdict,
               "seconds": round(self.seconds, 6)}
        if self.cause:
            out["cause"] = self.cause
        return out


@dataclass
class WindowState:
    top_line: int
    bottom_line: int
    phase: Phase = Phase.ENLARGING
    delta: int = DEFAULT_DELTA
    history: list = field(default_factory=list)


@dataclass
class Campaign:
    lines: int
    bound: int
    history: list
    stop: str  # "end-of-code" | "rb-failure"
    failing: CheckResult | None = None
    window_model: AcceleratorModel | None = None

    @property
    def failed(self) -> bool:
        return self.failing is not None

    def covered(self) -> set:
        out: set = set()
        for r in self.history:
            if r.verdict in ("unsat", "sat"):
                out.update(range(r.checked[0], r.checked[1] + 1))
        return out

    def to_dict(self) -> dict:
        out = {"lines": self.lines, "bound": self.bound, "stop": self.stop,
               "verdict": "sat" if self.failed else "unsat",
               "windows": [r.to_dict() for r in self.history]}
        if self.failing is not None and self.failing.trace is not None:
            out["trace"] = self.failing.trace.to_dict()
        return out


def loop_closure(ssa: SsaProgram, top: int, bottom: int) -> tuple:
    """Widen [top, bottom] until every loop it touches is wholly inside."""
    changed = True
    while changed:
        changed = False
        for entry, _, back in ssa.loops:
            if entry <= bottom and back >= top and (entry < top or back > bottom):
                top, bottom = min(top, entry), max(bottom, back)
                changed = True
    return top, bottom


def window_interface(ssa: SsaProgram, top: int, bottom: int) -> tuple:
    """(inputs, outputs, locals) of the SSA lines top..bottom (1-based, inclusive)."""
    inside = ssa.instrs[top - 1:bottom]
    defined: list = []
    read: list = []
    for ins in inside:
        for v in sorted(instr_reads(ins)):
            if v not in read:
                read.append(v)
        for v in instr_writes(ins):
            if v not in defined:
                defined.append(v)
    outside_reads: set = set()
    for k, ins in enumerate(ssa.instrs):
        if not top - 1 <= k < bottom:
            outside_reads |= instr_reads(ins)
    inputs = [v for v in read if v not in defined]
    live = outside_reads | set(ssa.outputs)
    outputs = [v for v in defined if v in live]
    local = [v for v in defined if v not in live]
    return inputs, outputs, local


def window_to_submodel(ssa: SsaProgram, w: WindowState) -> AcceleratorModel:
    top, bottom = loop_closure(ssa, w.top_line, w.bottom_line)
    if not 1 <= top <= bottom <= len(ssa):
        raise ConfigError(f"window [{w.top_line}, {w.bottom_line}] outside 1..{len(ssa)}")
    inputs, outputs, local = window_interface(ssa, top, bottom)
    if not outputs:
        raise EmptyInterface(f"window [{top}, {bottom}] defines nothing used elsewhere")
    names = inputs + outputs + local
    cell = {v: k for k, v in enumerate(names)}
    size = bottom - top + 1

    def target(t):
        if t >= bottom:
            return size
        if t < top - 1:
            raise ConfigError(f"jump from window [{top}, {bottom}] to line {t + 1}")
        return t - (top - 1)

    program = []
    for ins in ssa.instrs[top - 1:bottom]:
        moved = map_instr(ins, cell.__getitem__)
        if isinstance(moved, Branch):
            moved = Branch(moved.cond, target(moved.target))
        elif isinstance(moved, Jump):
            moved = Jump(target(moved.target), moved.dsts, moved.srcs)
        program.append(moved)
    layout = MemoryLayout(
        len(names),
        (tuple(cell[v] for v in inputs),),
        (tuple(cell[v] for v in outputs),),
        (), False, tuple(names))
    return AcceleratorModel(
        name=f"W{top}-{bottom}", batch_size=1, n_actions=1, data_width=ssa.width,
        in_size=len(inputs), out_size=len(outputs), layout=layout, program=tuple(program),
        source=(top, bottom))


def slide(ssa: SsaProgram, n: int, delta: int = DEFAULT_DELTA, window: int = DEFAULT_WINDOW,
          budget: Budget | None = None, backend: str = "sat", on_window=None) -> Campaign:
    """Run the enlarge/shrink window scan; stop on a failing check or at end of code.

    Passing checks move the bottom down by `delta` (top fixed); checks that run
    out of budget move the top down by `delta` (bottom fixed).  The top never
    moves back up, so after a shrink followed by a pass it stays frozen at its
    new position.
    """
    if n < 1:
        raise ConfigError("the RB bound must be at least 1")
    if delta < 1 or window < 1:
        raise ConfigError("window size and delta must be at least 1")
    last = len(ssa)
    if last == 0:
        return Campaign(0, n, [], "end-of-code")
    state = WindowState(1, min(window, last), Phase.ENLARGING, delta)
    while True:
        checked = loop_closure(ssa, state.top_line, state.bottom_line)
        try:
            model = window_to_submodel(ssa, state)
        except EmptyInterface:
            state.history.append(WindowRecord(state.top_line, state.bottom_line, checked,
                                              state.phase, "empty"))
            if checked[1] >= last:
                return Campaign(last, n, state.history, "end-of-code")
            state.bottom_line = checked[1] + 1
            continue
        start = time.perf_counter()
        result = check(build_rb(model, n), backend, budget)
        rec = WindowRecord(state.top_line, state.bottom_line, checked, state.phase,
                           result.verdict.value, time.perf_counter() - start, result.cause)
        state.history.append(rec)
        if on_window is not None:
            on_window(rec)
        if result.verdict == Verdict.SAT:
            return Campaign(last, n, state.history, "rb-failure", result, model)
        if checked[1] >= last:
            # end of code wins over a timeout on the last window
            return Campaign(last, n, state.history, "end-of-code")
        if result.verdict == Verdict.UNSAT:
            state.phase = Phase.ENLARGING
            state.bottom_line = min(checked[1] + delta, last)
            continue
        state.phase = Phase.SHRINKING
        if state.top_line < state.bottom_line:
            state.top_line = min(state.top_line + delta, state.bottom_line)
        else:
            # a single line still out of budget: give up on it and move on
            state.top_line = state.bottom_line + 1
            state.bottom_line = min(state.top_line + delta - 1, last)


def movement_ok(history: list) -> bool:
    """Top never moves up; shrinks raise the top, enlargements lower the bottom."""
    for prev, cur in zip(history, history[1:]):
        if cur.top < prev.top:
            return False
        if cur.phase == Phase.SHRINKING and prev.verdict == "unknown" and not cur.top > prev.top:
            return False
        if prev.verdict in ("unsat", "empty") and not cur.bottom > prev.bottom:
            return False
        if cur.top > cur.bottom:
            return False
    return True
