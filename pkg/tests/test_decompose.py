from __future__ import annotations

import random

import pytest

from aqed2.abk import parse
from aqed2.corpus import generate
from aqed2.decompose import (AlphaMap, check_composable, compose, compose_pair, composed_spec,
                             condition_holds, direct_outputs, plan, violated_conditions)
from aqed2.errors import ComposabilityError, SpecError, WiringError
from aqed2.model import InputBatch, execute
from aqed2.suite import summarize

HALF = """\
width 3;
var data[4];
var out[4];
var key = 1;

%IN_SIZE 1
%IN_BATCH_SIZE 2
%BATCH_MEM_IN data
%IN_ALLOC_RULE in(x) addr range = [{lo} + x : {lo} + x + 1]
%REL key
%SPEC d ^ key
// ==={name} START===
for j in {lo}..{hi} {{
    out[j] = data[j] ^ key;
}}
// ==={name} END===
%OUT_SIZE 1
%OUT_BATCH_SIZE 2
%BATCH_MEM_OUT out
%OUT_ALLOC_RULE out(x) addr range = [{lo} + x : {lo} + x + 1]
"""


def halves() -> str:
    first = HALF.format(name="ACC1", lo=0, hi=2)
    second = HALF.format(name="ACC2", lo=2, hi=4).split("\n", 5)[5]
    return first + "\n" + second


def test_alpha_map_construction():
    ident = AlphaMap.identity(4)
    assert ident.is_identity and ident((5, 6, 7, 8)) == (5, 6, 7, 8)
    swap = AlphaMap.from_pairs(4, [(0, 2), (2, 0)])
    assert swap.is_bijection() and swap((5, 6, 7, 8)) == (7, 6, 5, 8)
    assert swap.image({0}) == {2}
    moved = AlphaMap.from_pairs(3, [(0, 1)])
    assert moved.is_bijection() and moved.perm[0] == 1
    with pytest.raises(ValueError):
        AlphaMap.from_pairs(3, [(0, 1), (2, 1)])


def test_plan_orders_stages_by_dataflow():
    prog = generate(5, "none", 2, 2).program()
    p = plan(prog)
    assert [m.name for m in p.models] == ["ACC1", "ACC2"]
    w = p.wiring[0]
    assert (w.producer, w.consumer, w.buffer) == ("ACC1", "ACC2", "buf")
    assert w.alpha.is_identity


def test_staged_consumer_gets_a_swapping_alpha():
    p = plan(generate(9, "none", 2, 2).program())
    alpha = p.alpha_maps[0]
    assert not alpha.is_identity and alpha.is_bijection()
    assert all(alpha.perm[alpha.perm[c]] == c for c in range(len(alpha.perm)))


def test_parallel_blocks_share_one_stage():
    p = plan(parse(halves()))
    assert p.parallel_groups == (("ACC1", "ACC2"),)
    (stage,) = p.models
    assert stage.batch_size == 4 and len(p.members) == 2


def test_composition_matches_the_whole_program():
    rng = random.Random(2)
    for seed in (5, 9, 11):
        prog = generate(seed, "none", 2, 2).program()
        p = plan(prog)
        whole = compose(p)
        assert len(whole.program) == sum(len(m.program) for m in p.models) + 1
        for _ in range(30):
            mem = [rng.randrange(4) for _ in range(whole.layout.n_cells)]
            batch = InputBatch.of([rng.randrange(4) for _ in range(2)])
            final, _ = execute(whole, mem, batch)
            assert whole.out(final) == direct_outputs(prog, whole, mem, batch)


def test_composability_conditions():
    p = plan(generate(5, "none", 2, 2).program())
    m1, m2 = p.models
    alpha = p.alpha_maps[0]
    assert violated_conditions(m1, m2, alpha) == []
    check_composable(m1, m2, alpha)
    # alpha that does not land the producer's outputs on the consumer's inputs
    in1, in2 = m1.layout.input_cells[0], m2.layout.input_cells[0]
    bad = AlphaMap.from_pairs(m1.layout.n_cells, [(in2, in1), (in1, in2)])
    assert not condition_holds("v", m1, m2, bad)
    with pytest.raises(ComposabilityError) as exc:
        compose_pair(m1, m2, bad)
    assert exc.value.condition == "v"
    with pytest.raises(ValueError):
        condition_holds("vi", m1, m2, alpha)


def test_wiring_mismatch_is_rejected():
    src = generate(5, "none", 2, 2).source
    # second stage now reads a buffer nobody writes
    broken = src.replace("%BATCH_MEM_IN buf", "%BATCH_MEM_IN data", 1)
    with pytest.raises(WiringError):
        plan(parse(broken))


def test_composed_spec_chains_the_stages():
    prog = generate(5, "none", 2, 2).program()
    p = plan(prog)
    spec = composed_spec(prog, p)
    whole = compose(p)
    rng = random.Random(4)
    for _ in range(20):
        mem = [0] * whole.layout.n_cells
        for c in whole.layout.relevant:
            mem[c] = rng.randrange(4)
        batch = InputBatch.of([rng.randrange(4) for _ in range(2)])
        final, _ = execute(whole, mem, batch)
        rel = whole.rel(mem)
        lanes = whole.out(final)
        for (action, data), got in zip(batch.lanes, lanes):
            assert spec(action, data, rel) == tuple(got)
    with pytest.raises(SpecError):
        composed_spec(parse(halves()), plan(parse(halves())))


def test_summary_counts():
    prog = generate(5, "none", 2, 2).program()
    p = plan(prog)
    s = summarize(p.members, [])
    assert (s.total, s.parallel, s.buggy, s.completed) == (2, 2, 0, 0)
