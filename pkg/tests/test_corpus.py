from __future__ import annotations

import pytest

from aqed2.abk import parse
from aqed2.corpus import (BugClass, CorpusCase, default_corpus, generate, label, load_manifest,
                          run_case, shipped_manifest, write_manifest, zero_initialized)
from aqed2.errors import BoundError


def test_generation_is_deterministic():
    for bug in BugClass:
        a, b = generate(3, bug, 4, 2), generate(3, bug, 4, 2)
        assert a.source == b.source and a.edit == b.edit and a.name == b.name


def test_each_bug_class_records_its_edit():
    for bug in BugClass:
        case = generate(1, bug, 4, 2)
        if bug == BugClass.NONE:
            assert case.edit == {}
        else:
            assert case.edit["stage"].startswith("ACC") and case.edit["change"]
        case.program()  # parses in the mode its class needs


def test_unresponsive_kernels_need_rb_mode():
    case = generate(1, "unresponsive", 4, 2)
    assert "while" in case.source
    with pytest.raises(BoundError):
        parse(case.source)


def test_lane_bugs_need_two_lanes():
    with pytest.raises(ValueError):
        generate(1, "indexing", 1, 2)


def test_zero_initialized_only_touches_bare_declarations():
    src = "width 2;\nvar a[4];\nvar k = 3;\nvar t;\n"
    out = zero_initialized(src)
    assert "var a[4] = 0;" in out and "var k = 3;" in out and "var t = 0;" in out
    parse(out)


def test_manifest_round_trip(tmp_path):
    cases = [generate(1, "none", 2, 2), generate(2, "cross-lane", 2, 2)]
    cases[1].expected = {"ACC1/intra-fc": "sat"}
    path = write_manifest(cases, tmp_path)
    back = load_manifest(path)
    assert [c.name for c in back] == [c.name for c in cases]
    assert back[1].expected == {"ACC1/intra-fc": "sat"} and back[1].source == cases[1].source
    assert CorpusCase.from_dict(cases[0].to_dict()).source == cases[0].source


def test_shipped_manifest_matches_the_generator():
    shipped = load_manifest(shipped_manifest())
    fresh = default_corpus()
    assert [c.name for c in shipped] == [c.name for c in fresh]
    assert all(a.source == b.source for a, b in zip(shipped, fresh))
    assert {c.bug for c in shipped} == set(BugClass)
    assert all(c.expected for c in shipped)


@pytest.mark.parametrize("name", ["indexing-s1-b4-w2", "consistent-wrong-s4-b2-w3",
                                  "unresponsive-s2-b4-w2"])
def test_shipped_labels_are_reproducible(name):
    case = next(c for c in load_manifest(shipped_manifest()) if c.name == name)
    stored = dict(case.expected)
    assert label(case) == stored


def test_run_case_against_labels():
    case = next(c for c in load_manifest(shipped_manifest()) if c.bug == BugClass.CROSS_LANE)
    run = run_case(case)
    assert run.ok and run.rb == "unsat"
    assert any(o.verdict == "sat" for o in run.outcomes)
    case.expected = dict(case.expected, rb="sat")
    assert run_case(case).mismatches == [("rb", "sat", "unsat")]
