from __future__ import annotations

import itertools
import random

import pytest

from aqed2.corpus import generate
from aqed2.decompose import plan
from aqed2.engine import Budget, Caps, Verdict, check, check_exhaustive, encode, export_dimacs, \
    minimize
from aqed2.engine.bitblast import Blaster
from aqed2.engine.sat import SatStatus, luby, solve
from aqed2.engine.terms import TermManager
from aqed2.errors import ConfigError, ExplosionCap
from aqed2.obligations import build_intra_fc, build_strong_fc, evaluate


def brute_force(n, clauses) -> bool:
    for bits in itertools.product((False, True), repeat=n):
        if all(any(bits[abs(l) - 1] == (l > 0) for l in c) for c in clauses):
            return True
    return False


def test_luby_prefix():
    assert [luby(i) for i in range(1, 16)] == [1, 1, 2, 1, 1, 2, 4, 1, 1, 2, 1, 1, 2, 4, 8]


def test_cdcl_matches_brute_force_on_random_3sat():
    rng = random.Random(7)
    for _ in range(200):
        n = rng.randint(3, 10)
        clauses = [[rng.choice((-1, 1)) * rng.randint(1, n) for _ in range(3)]
                   for _ in range(rng.randint(1, 5 * n))]
        res = solve(n, clauses)
        assert (res.status == SatStatus.SAT) == brute_force(n, clauses)
        if res.status == SatStatus.SAT:
            assert all(any(res.model[abs(l)] == (l > 0) for l in c) for c in clauses)


def pigeonhole(holes: int) -> tuple:
    pigeons = holes + 1
    var = lambda p, h: p * holes + h + 1
    clauses = [[var(p, h) for h in range(holes)] for p in range(pigeons)]
    for h in range(holes):
        for p, q in itertools.combinations(range(pigeons), 2):
            clauses.append([-var(p, h), -var(q, h)])
    return pigeons * holes, clauses


def test_pigeonhole_is_unsat_and_conflict_budget_gives_unknown():
    n, clauses = pigeonhole(5)
    assert solve(n, clauses).status == SatStatus.UNSAT
    res = solve(n, clauses, max_conflicts=3)
    assert res.status == SatStatus.UNKNOWN and res.cause == "conflicts"


OPS = ("add", "sub", "mul", "and", "or", "xor", "shl", "shr", "eq", "ne", "ult", "ule")


def random_term(tm, rng, leaves, depth):
    if depth == 0 or rng.random() < 0.2:
        return rng.choice(leaves)
    op = rng.choice(OPS)
    a = random_term(tm, rng, leaves, depth - 1)
    b = random_term(tm, rng, leaves, depth - 1)
    t = getattr(tm, "mk_" + op)(a, b)
    if tm.width(t) == 1:
        t = tm.mk_ite(t, a, b)
    return t


def test_bit_blasting_agrees_with_term_evaluation():
    rng = random.Random(3)
    for _ in range(60):
        tm = TermManager()
        width = rng.choice((2, 3, 4))
        leaves = [tm.var(f"v{k}", width) for k in range(3)] + [tm.const(rng.randrange(16), width)]
        t = random_term(tm, rng, leaves, 3)
        target = rng.randrange(1 << width)
        goal = tm.mk_eq(t, tm.const(target, width))
        blaster = Blaster(tm)
        blaster.assert_true(goal)
        res = solve(blaster.n_vars, blaster.clauses)
        reachable = any(tm.evaluate(t, dict(zip(("v0", "v1", "v2"), vals))) == target
                        for vals in itertools.product(range(1 << width), repeat=3))
        assert (res.status == SatStatus.SAT) == reachable
        if reachable:
            model = blaster.decode(res.model)
            assignment = {f"v{k}": model.get(f"v{k}", 0) for k in range(3)}
            assert tm.evaluate(t, assignment) == target


def test_substitution_folds_equal_sides():
    tm = TermManager()
    x, y, k = tm.var("x", 4), tm.var("y", 4), tm.var("k", 4)
    fx = tm.mk_add(tm.mk_xor(x, k), tm.const(1, 4))
    fy = tm.mk_add(tm.mk_xor(y, k), tm.const(1, 4))
    differs = tm.mk_ne(fx, fy)
    assert not tm.is_const(differs)
    folded = tm.substitute(differs, {y: x})
    assert tm.is_const(folded) and tm.value(folded) == 0


def _model(bug: str, batch=4, width=2):
    case = generate(1, bug, batch, width)
    return plan(case.program()).members[0]


def test_backends_agree_and_witness_replays():
    for bug in ("none", "cross-lane", "init", "indexing"):
        obl = build_intra_fc(_model(bug))
        a, b = check(obl, "sat"), check_exhaustive(obl)
        assert a.verdict == b.verdict
        if a.verdict == Verdict.SAT:
            assert evaluate(obl, a.trace.witness).violated
            assert evaluate(obl, b.trace.witness).violated


def test_oracle_cap():
    obl = build_strong_fc(_model("none", 4, 3))
    with pytest.raises(ExplosionCap):
        check_exhaustive(obl, Caps(cases=16))


def test_dimacs_export_header(tmp_path):
    obl = build_strong_fc(_model("cross-lane"))
    text = export_dimacs(encode(obl))
    header = [l for l in text.splitlines() if l.startswith("p cnf")]
    assert len(header) == 1
    assert any(l.startswith("c ") for l in text.splitlines())
    path = tmp_path / "x.cnf"
    check(obl, "sat", dimacs_path=str(path))
    assert path.read_text().count("p cnf") == 1


def test_minimized_witness_still_violates():
    obl = build_strong_fc(_model("cross-lane"))
    trace = check(obl, "sat").trace
    small = minimize(trace, obl)
    assert evaluate(obl, small.witness).violated
    size = lambda w: sum(sum(m) for m in w.memories)
    assert size(small.witness) <= size(trace.witness)


def test_budgets():
    with pytest.raises(ConfigError):
        Budget(seconds=0)
    with pytest.raises(ConfigError):
        Budget.from_env({"AQED2_BUDGET_SECONDS": "soon"})
    b = Budget.from_env({"AQED2_BUDGET_SECONDS": "2.5", "AQED2_BUDGET_CONFLICTS": "10"})
    assert (b.seconds, b.conflicts) == (2.5, 10)
    obl = build_strong_fc(_model("cross-lane", 4, 4))
    res = check(obl, "sat", Budget(clauses=1))
    assert res.verdict == Verdict.UNKNOWN and res.cause == "memory"
    with pytest.raises(ConfigError):
        check(obl, "z3")
