"""Acceptance criteria 1-8.  Each test records one PASS/FAIL line (shown in the
terminal summary) before asserting."""
from __future__ import annotations

import dataclasses
import random
import time

from aqed2.abk import parse
from aqed2.abk.ssa import unroll_and_ssa
from aqed2.corpus import BugClass, aes_style_source, generate, zero_initialized
from aqed2.decompose import compose, composed_spec, direct_outputs, plan
from aqed2.drb import movement_ok, slide
from aqed2.engine.exhaustive import check_exhaustive, live_in
from aqed2.errors import ExplosionCap, StepBudgetExceeded
from aqed2.model import InputBatch, all_batches, execute, reachable_initial_memories
from aqed2.monitor import monitor_batch, replay_monitor
from aqed2.obligations import build_rb, build_sac, build_strong_fc, evaluate, replay
from aqed2.suite import MODES, checks_for, run_check

FC_FAMILY = {"intra-fc", "strong-fc", "fc", "fcd"}
LOCAL_BUGS = (BugClass.INDEXING, BugClass.INIT, BugClass.CROSS_LANE, BugClass.REL_MUTATION)


def _planned(case):
    prog = case.program()
    p = plan(prog)
    return prog, p, [pc for m in p.members for pc in checks_for(prog, m, MODES)]


# 1 -----------------------------------------------------------------------------------
def test_backend_equivalence(shipped, record):
    start = time.perf_counter()
    agree = total = replayed = sat_traces = 0
    disagreements = []
    for case in shipped:
        if case.width > 3 or case.batch > 4:
            continue
        _, _, planned = _planned(case)
        for pc in planned:
            oracle = run_check(pc, "oracle")
            sat = run_check(pc, "sat")
            if oracle.verdict not in ("sat", "unsat"):
                assert sat.verdict == oracle.verdict == "n/a", pc.key
                continue
            total += 1
            if oracle.verdict == sat.verdict:
                agree += 1
            else:
                disagreements.append((case.name, pc.key, oracle.verdict, sat.verdict))
            for o in (oracle, sat):
                if o.verdict == "sat":
                    sat_traces += 1
                    replayed += evaluate(pc.obligation, o.result.trace.witness).violated
    elapsed = time.perf_counter() - start
    ok = total >= 200 and agree == total and replayed == sat_traces and elapsed < 600
    record(1, "backend equivalence", ok,
           f"{agree}/{total} obligations agree (need >= 200, 100%), "
           f"{replayed}/{sat_traces} SAT traces replay, {elapsed:.1f}s (< 600s)")
    assert not disagreements, disagreements
    assert ok


# 2 -----------------------------------------------------------------------------------
def test_soundness_on_correct_kernels(shipped, record):
    cases = [c for c in shipped if c.bug == BugClass.NONE and c.width <= 3]
    checked = alarms = 0
    for case in cases:
        _, _, planned = _planned(case)
        # functional correctness first: every lane matches the kernel's %SPEC exhaustively
        for pc in planned:
            if pc.mode == "sac":
                assert run_check(pc, "oracle").verdict == "unsat", (case.name, pc.key)
        for pc in planned:
            if pc.mode in FC_FAMILY and pc.obligation is not None:
                checked += 1
                alarms += run_check(pc, "oracle").verdict != "unsat"
    ok = len(cases) >= 1 and checked > 0 and alarms == 0
    record(2, "soundness", ok, f"{alarms} false alarms in {checked} FC-family obligations "
                               f"over {len(cases)} correct kernels (need 0)")
    assert ok


# 3 -----------------------------------------------------------------------------------
def _constructed(seed: int, bug: str):
    """Generated kernel with every cell initialized; b=4 for one stage, b=2 for two."""
    case = generate(seed, bug, 4, 2)
    if "===ACC2" in case.source:
        case = generate(seed, bug, 2, 2)
    prog = parse(zero_initialized(case.source))
    p = plan(prog)
    composed = compose(p) if len(p.models) > 1 else p.models[0]
    return prog, p, composed, composed_spec(prog, p)


def _spec_equal(model, spec, memories) -> bool:
    """Exhaustive spec comparison from every given start memory over all batches."""
    live = sorted(live_in(model.program) - set(model.layout.input_cells))
    distinct = {tuple(m[c] for c in live): m for m in memories}
    for mem in distinct.values():
        rel = model.rel(mem)
        for batch in all_batches(model):
            out = model.out(execute(model, mem, batch)[0])
            for (action, data), got in zip(batch.lanes, out):
                if spec(action, data, rel) != tuple(got):
                    return False
    return True


def test_completeness(record):
    start = time.perf_counter()
    correct = buggy = 0
    failures = []
    for seed in range(1, 13):
        prog, p, composed, spec = _constructed(seed, "none")
        starts = reachable_initial_memories(composed, 2)
        rows = {composed.rel(m) for m in starts}
        if all(check_exhaustive(build_strong_fc(m, fcd=True)).verdict.value == "unsat"
               for m in p.models) and \
           all(check_exhaustive(build_sac(composed, spec, lane, rows)).verdict.value == "unsat"
               for lane in range(composed.batch_size)):
            correct += 1
            if not _spec_equal(composed, spec, starts):
                failures.append(("spec", seed))
    for bug in ("init", "cross-lane", "rel-mutation", "indexing"):
        for seed in range(1, 9):
            prog, p, composed, spec = _constructed(seed, bug)
            starts = reachable_initial_memories(composed, 2)
            if _spec_equal(composed, spec, starts):
                continue  # the injected edit happens to be harmless here
            rows = {composed.rel(m) for m in starts}
            passing = [lane for lane in range(composed.batch_size) if check_exhaustive(
                build_sac(composed, spec, lane, rows)).verdict.value == "unsat"]
            if passing:
                buggy += 1
                if check_exhaustive(build_strong_fc(composed)).verdict.value != "sat":
                    failures.append((bug, seed))
    elapsed = time.perf_counter() - start
    ok = correct >= 10 and buggy >= 10 and not failures and elapsed < 600
    record(3, "completeness", ok,
           f"{correct} correct cases (need >= 10) spec-equal, {buggy} buggy SAC-passing cases "
           f"(need >= 10) caught by strong FC, {len(failures)} failures, {elapsed:.1f}s (< 600s)")
    assert ok, failures


# 4 -----------------------------------------------------------------------------------
def test_composition_fidelity(shipped, record):
    rng = random.Random(4)
    runs = mismatches = 0
    for case in shipped:
        prog = case.program()
        p = plan(prog)
        composed = dataclasses.replace(compose(p), step_budget=4096)
        mask = (1 << composed.data_width) - 1
        for _ in range(100):
            mem = tuple(rng.randint(0, mask) for _ in range(composed.layout.n_cells))
            batch = InputBatch(tuple((0, tuple(rng.randint(0, mask) for _ in range(composed.in_size)))
                                     for _ in range(composed.batch_size)))
            try:
                got = composed.out(execute(composed, mem, batch)[0])
            except StepBudgetExceeded:
                got = "spins"
            try:
                want = direct_outputs(prog, composed, mem, batch)
            except StepBudgetExceeded:
                want = "spins"
            runs += 1
            mismatches += got != want
    # strong-FCD of both stages implies strong-FCD of the composition
    implied = capped = 0
    broken = []
    for seed in range(1, 13):
        for bug in BugClass:
            if bug == BugClass.UNRESPONSIVE:
                continue
            case = generate(seed, bug, 2, 2)
            prog = case.program()
            p = plan(prog)
            if len(p.models) < 2:
                continue
            if any(check_exhaustive(build_strong_fc(m, fcd=True)).verdict.value != "unsat"
                   for m in p.models):
                continue
            try:
                verdict = check_exhaustive(build_strong_fc(compose(p), fcd=True)).verdict.value
            except ExplosionCap:
                capped += 1
                continue
            implied += 1
            if verdict != "unsat":
                broken.append(case.name)
    ok = runs >= 100 and mismatches == 0 and implied >= 1 and not broken
    record(4, "composition fidelity", ok,
           f"{runs - mismatches}/{runs} random runs bit-exact over {len(shipped)} decompositions; "
           f"strong-FCD carried to {implied - len(broken)}/{implied} compositions "
           f"({capped} over the oracle cap)")
    assert ok, broken


# 5 -----------------------------------------------------------------------------------
def test_bug_class_detection(record):
    slowest = 0.0
    problems = []
    n = 0
    for bug in BugClass:
        for seed in (1, 2, 3):
            case = generate(seed, bug, 16, 8)
            prog = case.program()
            p = plan(prog)
            n += 1
            verdicts: dict = {}
            for m in p.members:
                for pc in checks_for(prog, m, MODES):
                    o = run_check(pc, "sat")
                    slowest = max(slowest, o.seconds)
                    verdicts.setdefault((m.name, pc.mode), set()).add(o.verdict)
            stage = case.edit.get("stage")
            if bug in LOCAL_BUGS and "sat" not in verdicts[(stage, "intra-fc")]:
                problems.append((case.name, "intra-fc missed"))
            if bug == BugClass.CONSISTENT_WRONG:
                if any("sat" in v for (_, mode), v in verdicts.items() if mode in FC_FAMILY):
                    problems.append((case.name, "FC-family reported a violation"))
                if "sat" not in verdicts[(stage, "sac")]:
                    problems.append((case.name, "SAC missed"))
            if bug == BugClass.NONE and any("sat" in v for v in verdicts.values()):
                problems.append((case.name, "false alarm"))
            if bug in (BugClass.NONE, BugClass.UNRESPONSIVE):
                campaign = slide(unroll_and_ssa(prog), case.rb_bound)
                if campaign.failed != (bug == BugClass.UNRESPONSIVE):
                    problems.append((case.name, "dRB verdict"))
    ok = not problems and slowest < 60
    record(5, "bug-class detection", ok,
           f"{n - len({p[0] for p in problems})}/{n} kernels at width 8, b=16 classified as "
           f"expected, slowest SAT obligation {slowest:.2f}s (< 60s)")
    assert ok, problems


# 6 -----------------------------------------------------------------------------------
def test_aes_style_annotation_fidelity(record):
    p = plan(parse(aes_style_source()))
    shapes = [(m.name, m.batch_size, m.in_size) for m in p.members]
    counts = p.counts()
    ok = (shapes == [("ACC1", 256, 16), ("ACC2", 256, 16)] and counts == {"T": 2, "P": 2}
          and "T=2 P=2" in p.report())
    record(6, "annotation fidelity", ok, f"sub-models {shapes} (need two with b=256, 16 words), "
                                         f"T={counts['T']} P={counts['P']} (need 2, 2)")
    assert ok


# 7 -----------------------------------------------------------------------------------
def synthetic_source(lines: int = 500, loop_at: int | None = None, width: int = 4) -> str:
    """`lines` SSA lines of chained updates; a 3-line spin loop replaces 3 of them."""
    src = [f"width {width};", "var x[8];", "var t;"]
    k = 0
    while len(src) - 3 + (3 if loop_at is not None and k > loop_at else 0) < lines:
        if k == loop_at:
            src.append("while (x[3] == 5) { t = t + 1; }")
        a, b = k % 8, (k * 3 + 1) % 8
        src.append(f"x[{a}] = x[{a}] + (x[{b}] ^ {k % 7 + 1});")
        k += 1
    return "\n".join(src) + "\n"


def test_drb_conformance(record):
    clean = unroll_and_ssa(parse(synthetic_source(), rb_mode=True))
    spun = unroll_and_ssa(parse(synthetic_source(loop_at=300), rb_mode=True))
    bound = 2 * len(clean) + 8
    full = slide(clean, bound)
    stopped = slide(spun, bound)
    loop_lines = set(range(spun.loops[0][0], spun.loops[0][2] + 1))
    last = stopped.history[-1]
    witness_ok = False
    if stopped.failed:
        trace = replay(build_rb(stopped.window_model, bound), stopped.failing.trace.witness)
        witness_ok = trace.detail["steps"] >= bound
    first_failing = all(r.verdict != "sat" for r in stopped.history[:-1]) and last.verdict == "sat"
    ok = (len(clean) == 500 and len(spun) == 500 and full.stop == "end-of-code"
          and full.covered() == set(range(1, 501)) and stopped.stop == "rb-failure"
          and first_failing and loop_lines <= set(range(last.checked[0], last.checked[1] + 1))
          and witness_ok and movement_ok(full.history) and movement_ok(stopped.history))
    record(7, "dRB conformance", ok,
           f"clean: {len(full.covered())}/{len(clean)} lines covered in {len(full.history)} "
           f"windows; injected loop: stopped at window {last.checked} with a replaying witness; "
           f"movement invariants hold")
    assert ok


# 8 -----------------------------------------------------------------------------------
def test_monitor_conformance(shipped, record):
    confirmed = traces = 0
    for case in shipped:
        prog, p, planned = _planned(case)
        models = {m.name: m for m in p.members}
        for pc in planned:
            if pc.mode not in FC_FAMILY or pc.obligation is None:
                continue
            o = run_check(pc, "sat")
            if o.verdict == "sat":
                traces += 1
                confirmed += replay_monitor(o.result.trace, models[pc.model]).fc_check == 1
    rng = random.Random(8)
    clean = [m for c in shipped if c.bug == BugClass.NONE for m in plan(c.program()).members
             if m.batch_size > 1]
    quiet = 0
    for _ in range(100):
        m = rng.choice(clean)
        mask = (1 << m.data_width) - 1
        orig, dup = sorted(rng.sample(range(m.batch_size), 2))
        lanes = [(0, tuple(rng.randint(0, mask) for _ in range(m.in_size)))
                 for _ in range(m.batch_size)]
        lanes[dup] = lanes[orig]
        mem = tuple(rng.randint(0, mask) for _ in range(m.layout.n_cells))
        quiet += monitor_batch(m, mem, InputBatch(tuple(lanes)), orig, dup).fc_check == 0
    ok = traces > 0 and confirmed == traces and quiet == 100
    record(8, "monitor conformance", ok, f"fc_check=1 on {confirmed}/{traces} FC-family SAT "
                                         f"traces, fc_check=0 on {quiet}/100 consistent runs")
    assert ok
