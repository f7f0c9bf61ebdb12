from __future__ import annotations

import pytest

from aqed2 import drb
from aqed2.abk import parse, unroll_and_ssa
from aqed2.drb import (Phase, WindowRecord, WindowState, loop_closure, movement_ok, slide,
                       window_interface, window_to_submodel)
from aqed2.engine import Verdict
from aqed2.engine.check import CheckResult
from aqed2.errors import ConfigError, EmptyInterface

CHAIN = """\
width 3;
var x[4];
var t;
x[0] = x[0] + x[1];
x[1] = x[1] ^ 3;
x[2] = x[0] + x[2];
x[3] = x[3] + 1;
x[0] = x[0] ^ x[3];
x[1] = x[1] + x[2];
"""

SPIN = CHAIN.replace("x[3] = x[3] + 1;", "while (x[3] == 5) { t = t + 1; }\nx[3] = x[3] + 1;")


def ssa(src):
    return unroll_and_ssa(parse(src, rb_mode=True))


def test_window_interface_splits_reads_and_live_definitions():
    s = ssa(CHAIN)
    inputs, outputs, local = window_interface(s, 1, 2)
    assert len(inputs) == 2 and len(outputs) == 2 and local == []
    whole_in, whole_out, _ = window_interface(s, 1, len(s))
    assert set(whole_out) <= set(s.outputs) and whole_in


def test_loop_closure_widens_to_whole_loops():
    s = ssa(SPIN)
    entry, _, back = s.loops[0]
    assert loop_closure(s, entry + 1, entry + 1) == (entry, back)
    assert loop_closure(s, 1, 1) == (1, 1)


def test_window_submodel_and_empty_interface():
    s = ssa(CHAIN)
    m = window_to_submodel(s, WindowState(1, 3))
    assert m.batch_size == 1 and m.source == (1, 3)
    dead = ssa("width 2;\nvar x;\nvar y;\ny = x + 1;\ny = 2;\n")
    with pytest.raises(EmptyInterface):
        window_to_submodel(dead, WindowState(1, 1))
    with pytest.raises(ConfigError):
        window_to_submodel(s, WindowState(3, 99))


def test_clean_code_runs_to_the_end():
    s = ssa(CHAIN)
    c = slide(s, 40, delta=2, window=2)
    assert c.stop == "end-of-code" and not c.failed
    assert c.covered() == set(range(1, len(s) + 1))
    assert movement_ok(c.history)
    assert c.to_dict()["verdict"] == "unsat"


def test_spin_loop_stops_the_campaign():
    s = ssa(SPIN)
    c = slide(s, 40, delta=2, window=2)
    assert c.stop == "rb-failure" and c.failed
    entry, _, back = s.loops[0]
    lo, hi = c.history[-1].checked
    assert lo <= entry and back <= hi
    assert "trace" in c.to_dict()


def test_bound_must_be_positive():
    with pytest.raises(ConfigError):
        slide(ssa(CHAIN), 0)
    with pytest.raises(ConfigError):
        slide(ssa(CHAIN), 4, delta=0)


def test_budget_exhaustion_shrinks_from_the_top(monkeypatch):
    real = drb.check

    def limited(obl, backend="sat", budget=None, **kw):
        if len(obl.model.program) > 2:
            return CheckResult(Verdict.UNKNOWN, cause="timeout")
        return real(obl, backend, budget, **kw)

    monkeypatch.setattr(drb, "check", limited)
    s = ssa(CHAIN)
    c = slide(s, 40, delta=2, window=4)
    phases = [r.phase for r in c.history]
    assert Phase.SHRINKING in phases
    assert c.stop == "end-of-code" and movement_ok(c.history)
    tops = [r.top for r in c.history]
    assert tops == sorted(tops)


def test_single_line_out_of_budget_is_skipped(monkeypatch):
    monkeypatch.setattr(drb, "check", lambda *a, **k: CheckResult(Verdict.UNKNOWN, cause="timeout"))
    s = ssa(CHAIN)
    c = slide(s, 40, delta=1, window=1)
    assert c.stop == "end-of-code" and not c.failed
    assert c.covered() == set()
    assert [r.top for r in c.history] == list(range(1, len(s) + 1))


def rec(top, bottom, phase, verdict):
    return WindowRecord(top, bottom, (top, bottom), phase, verdict)


def test_movement_invariants_reject_bad_histories():
    up = [rec(3, 5, Phase.ENLARGING, "unsat"), rec(1, 7, Phase.ENLARGING, "unsat")]
    assert not movement_ok(up)
    stuck = [rec(1, 5, Phase.ENLARGING, "unsat"), rec(1, 5, Phase.ENLARGING, "unsat")]
    assert not movement_ok(stuck)
    lazy = [rec(1, 5, Phase.ENLARGING, "unknown"), rec(1, 5, Phase.SHRINKING, "unsat")]
    assert not movement_ok(lazy)
    good = [rec(1, 5, Phase.ENLARGING, "unknown"), rec(3, 5, Phase.SHRINKING, "unsat"),
            rec(3, 7, Phase.ENLARGING, "unsat")]
    assert movement_ok(good)
