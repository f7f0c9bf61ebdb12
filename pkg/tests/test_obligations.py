from __future__ import annotations

import pytest

from aqed2.corpus import generate
from aqed2.decompose import plan
from aqed2.engine import check, check_exhaustive
from aqed2.errors import NotApplicable, ReplayMismatch, SpecError
from aqed2.model import InputBatch, MemoryPredicate
from aqed2.monitor import Monitor, monitor_batch, replay_monitor, run_monitor
from aqed2.obligations import (CounterexampleTrace, Mode, Policy, Witness, build_fc,
                               build_intra_fc, build_sac, build_strong_fc, replay,
                               spec_from_block, spec_from_callback)
from aqed2.suite import checks_for, run_check


def kernel(bug="none", batch=4, width=2, seed=1):
    case = generate(seed, bug, batch, width)
    prog = case.program()
    return prog, plan(prog).members[0]


def test_mode_shapes():
    assert Mode.STRONG_FC.copies == 2 and Mode.FC.copies == 1
    assert Mode.INTRA_FC.fc_family and not Mode.SAC.fc_family


def test_intra_fc_needs_two_lanes():
    _, m = kernel()
    one = generate(1, "consistent-wrong", 1, 2)
    single = plan(one.program()).members[0]
    with pytest.raises(NotApplicable):
        build_intra_fc(single)
    assert build_intra_fc(m).mode == Mode.INTRA_FC


def test_obligation_validation():
    prog, m = kernel()
    with pytest.raises(ValueError):
        build_fc(m, 0)
    with pytest.raises(ValueError):
        build_strong_fc(m, Policy.CONSTRAINED)
    spec = spec_from_block(prog, "ACC1", m)
    with pytest.raises(ValueError):
        build_sac(m, spec, lane=4)
    with pytest.raises(SpecError):
        build_sac(m, spec_from_callback("two", lambda a, d, r: (0, 0), out_size=2), 0)


def test_spec_from_block_matches_the_kernel():
    prog, m = kernel()
    spec = spec_from_block(prog, "ACC1", m)
    for pc in checks_for(prog, m, ("sac",)):
        assert run_check(pc, "oracle").verdict == "unsat"
    assert spec.describe().startswith("ACC1(")


def test_replay_rejects_non_witnesses():
    _, m = kernel("cross-lane")
    obl = build_strong_fc(m)
    trace = check(obl, "sat").trace
    assert replay(obl, trace.witness).mode == Mode.STRONG_FC
    quiet = Witness(tuple((0,) * m.layout.n_cells for _ in range(2)),
                    tuple((InputBatch.of([0] * 4),) for _ in range(2)), (0, 1))
    with pytest.raises(ReplayMismatch):
        replay(obl, quiet)


def test_trace_round_trips_through_json():
    _, m = kernel("indexing")
    obl = build_fc(m, 2)
    trace = check(obl, "sat").trace
    back = CounterexampleTrace.from_dict(trace.to_dict())
    assert back.witness == trace.witness and back.mode == Mode.FC
    assert replay(obl, back.witness).detail == trace.detail


def test_concrete_and_constrained_policies():
    _, m = kernel("rel-mutation")
    # pinned to the declared initial key the strong-FC check is still violated
    assert check_exhaustive(build_strong_fc(m, Policy.CONCRETE)).verdict.value == "sat"
    key = m.layout.relevant[0]
    obl = build_strong_fc(m, Policy.CONSTRAINED, constraint=MemoryPredicate.fixed({key: 2}))
    res = check(obl, "sat")
    assert res.verdict.value == "sat"
    assert all(mem[key] == 2 for mem in res.trace.witness.memories)


def test_consistent_wrong_is_invisible_to_fc():
    prog, m = kernel("consistent-wrong")
    verdicts = {pc.key: run_check(pc, "oracle").verdict for pc in checks_for(prog, m)}
    assert {v for k, v in verdicts.items() if "/sac" not in k} == {"unsat"}
    assert {v for k, v in verdicts.items() if "/sac" in k} == {"sat"}


def test_monitor_labels_and_compares():
    seq_in = [(1,), (2,), (1,), (3,)]
    assert run_monitor(seq_in, [(5,), (6,), (5,), (7,)], 0, 2).fc_check == 0
    bad = run_monitor(seq_in, [(5,), (6,), (4,), (7,)], 0, 2)
    assert bad.fc_check == 1 and bad.dup_done == 1
    # dup is only labelled when its input equals orig's
    unmatched = run_monitor(seq_in, [(5,), (6,), (4,), (7,)], 0, 1)
    assert unmatched.fc_check == 0
    assert not any("dup labeled" in line for line in unmatched.log)
    mon = Monitor(1, 1)
    mon.aqed_in((1,), 1, 0)
    assert mon.orig_labeled == 1 and mon.orig_idx == 0


def test_monitor_confirms_fc_traces_and_stays_quiet_on_clean_runs():
    _, m = kernel("cross-lane")
    trace = check(build_intra_fc(m), "sat").trace
    assert replay_monitor(trace, m).fc_check == 1
    _, clean = kernel()
    batch = InputBatch.of([2, 1, 2, 3])
    assert monitor_batch(clean, (0,) * clean.layout.n_cells, batch, 0, 2).fc_check == 0
