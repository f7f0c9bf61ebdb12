from __future__ import annotations

import random

import pytest

from aqed2.errors import BatchSizeError, StepBudgetExceeded
from aqed2.model import (AcceleratorModel, InputBatch, MemoryLayout, MemoryPredicate, execute,
                         enumerate_reachable, reachable_relevant, run_batch, run_sequence)
from aqed2.program import Assign, Branch, Const, Jump, Load, Op, Ref, Store


def stateless(width=1):
    # cell 0 input, cell 1 output: out = ~in
    layout = MemoryLayout(2, ((0,),), ((1,),), ())
    return AcceleratorModel("neg", 1, 1, width, 1, 1, layout, (Assign(1, Op("not", (Ref(0),))),))


def toggler():
    # cell 0 input, cell 1 output, cell 2 relevant flag: out = in ^ flag; flag = ~flag & 1
    layout = MemoryLayout(3, ((0,),), ((1,),), (2,))
    program = (Assign(1, Op("xor", (Ref(0), Ref(2)))),
               Assign(2, Op("xor", (Ref(2), Const(1)))))
    return AcceleratorModel("toggle", 1, 1, 1, 1, 1, layout, program,
                            initial=MemoryPredicate.fixed({2: 0}))


def test_depth_zero_is_the_initial_set():
    m = stateless()
    states = enumerate_reachable(m, 0)
    assert {s.control for s in states} == {0}
    assert len(states) == 2 * 2  # input cell x output cell


def test_stateless_reachable_initial_states_do_not_grow():
    m = stateless()
    starts = {s for s in enumerate_reachable(m, 0)}
    for depth in (1, 2, 3):
        assert {s for s in enumerate_reachable(m, depth) if s.control == 0} == starts


def test_toggling_flag_reaches_both_values():
    m = toggler()
    assert reachable_relevant(m, 1) == {(0,)}
    assert reachable_relevant(m, 2) == {(0,), (1,)}
    assert reachable_relevant(m, 4) == {(0,), (1,)}


def test_determinism_and_prefix_property():
    m = toggler()
    rng = random.Random(5)
    batches = [InputBatch.of([rng.randrange(2)]) for _ in range(6)]
    init = m.initial_state((0, 0, 0))
    a = run_sequence(m, init, batches)
    b = run_sequence(m, init, batches)
    assert a.states == b.states
    for k in range(1, 6):
        prefix = run_sequence(m, init, batches[:k])
        assert prefix.states == a.states[:len(prefix.states)]


def test_step_budget_turns_spinning_into_an_error():
    layout = MemoryLayout(2, ((0,),), ((1,),), ())
    # spins on pc 1 when the input is 1
    program = (Branch(Op("eq", (Ref(0), Const(1))), 2), Jump(1))
    m = AcceleratorModel("spin", 1, 1, 2, 1, 1, layout, program, step_budget=50)
    assert execute(m, (0, 0), InputBatch.of([0]))[1] == 1
    with pytest.raises(StepBudgetExceeded) as exc:
        execute(m, (0, 0), InputBatch.of([1]))
    assert exc.value.steps == 50 and exc.value.state.control == 1


def test_out_of_bounds_reads_are_zero_and_writes_dropped():
    layout = MemoryLayout(4, ((0,),), ((1,),), ())
    program = (Assign(1, Load((2, 3), (2,), (Ref(0),))),
               Store((2, 3), (2, 3), (2,), (Ref(0),), Const(3)))
    m = AcceleratorModel("oob", 1, 1, 2, 1, 1, layout, program)
    final, _ = execute(m, (0, 0, 1, 2), InputBatch.of([1]))
    assert final[1] == 2 and final[3] == 3
    trace = run_batch(m, m.initial_state((0, 0, 1, 2)), InputBatch.of([3]))
    final = trace.finals[0].memory
    assert final[1] == 0 and final[2:] == (1, 2)
    assert any(kind.startswith("oob") for kind, _ in trace.diagnostics)


def test_batch_shape_is_checked():
    m = toggler()
    with pytest.raises(BatchSizeError):
        m.with_inputs((0, 0, 0), InputBatch.of([0, 1]))


def test_regions_must_be_disjoint():
    with pytest.raises(ValueError):
        MemoryLayout(2, ((0,),), ((0,),), ())


def test_projections_round_trip():
    m = toggler()
    mem = (1, 0, 1)
    assert m.assemble(m.inp(mem), m.out(mem), m.rel(mem), m.nrel(mem)) == mem
