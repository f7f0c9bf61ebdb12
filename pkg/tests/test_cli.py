from __future__ import annotations

import json
from pathlib import Path

import jsonschema
import pytest

from aqed2.cli import main
from aqed2.corpus import BugClass, load_manifest, shipped_manifest
from aqed2.report import schema

GOLDEN = Path(__file__).parent / "golden"
KERNELS = shipped_manifest().parent / "kernels"
CASES = load_manifest(shipped_manifest())


def kernel(name: str) -> str:
    return str(KERNELS / f"{name}.abk")


def valid(report_path) -> dict:
    doc = json.loads(Path(report_path).read_text())
    jsonschema.validate(doc, schema())
    return doc


def test_clean_kernel_exits_zero(tmp_path, capsys):
    rep = tmp_path / "r.json"
    assert main(["check", kernel("none-s1-b4-w2"), "--report", str(rep)]) == 0
    assert "T=1 P=1 C=1 B=0" in capsys.readouterr().out
    doc = valid(rep)
    assert doc["exit_code"] == 0 and {r["verdict"] for r in doc["results"]} == {"unsat"}


def test_buggy_kernel_exits_one_and_writes_traces(tmp_path):
    traces = tmp_path / "traces"
    rep = tmp_path / "r.json"
    code = main(["check", kernel("cross-lane-s1-b4-w2"), "--trace-dir", str(traces),
                 "--report", str(rep), "-q"])
    assert code == 1
    files = sorted(traces.glob("*.trace.json"))
    assert any("intra-fc" in f.name for f in files)
    doc = valid(rep)
    assert all(Path(r["trace_file"]).exists() for r in doc["results"] if r["verdict"] == "sat")


def test_report_matches_the_golden_verdicts(tmp_path):
    golden = json.loads((GOLDEN / "cross-lane-s1-b4-w2.json").read_text())
    rep = tmp_path / "r.json"
    code = main(["check", kernel("cross-lane-s1-b4-w2"), "--report", str(rep), "-q"])
    doc = valid(rep)
    assert code == golden["exit_code"] == doc["exit_code"]
    assert doc["summary"] == golden["summary"]
    assert {r["key"]: r["verdict"] for r in doc["results"]} == golden["verdicts"]


def test_replay_of_an_emitted_trace(tmp_path, capsys):
    main(["check", kernel("cross-lane-s1-b4-w2"), "--mode", "intra-fc",
          "--trace-dir", str(tmp_path), "-q"])
    (trace,) = tmp_path.glob("*.trace.json")
    capsys.readouterr()
    assert main(["replay", str(trace)]) == 1
    assert "monitor: fc_check=1" in capsys.readouterr().out
    doc = json.loads(trace.read_text())
    doc["trace"]["batches"] = [[[[0, [0]]] * 4] for _ in doc["trace"]["batches"]]
    doc["trace"]["initial_memories"] = [[0] * len(m) for m in doc["trace"]["initial_memories"]]
    doc["trace"]["detail"] = {}
    tampered = tmp_path / "bad.json"
    tampered.write_text(json.dumps(doc))
    assert main(["replay", str(tampered)]) == 2


def test_missing_annotation_is_a_tool_error(tmp_path, capsys):
    src = Path(kernel("none-s1-b4-w2")).read_text()
    broken = tmp_path / "broken.abk"
    broken.write_text("\n".join(l for l in src.splitlines() if "%OUT_ALLOC_RULE" not in l))
    rep = tmp_path / "r.json"
    assert main(["check", str(broken), "--report", str(rep)]) == 2
    assert "error: AnnotationError" in capsys.readouterr().err
    doc = valid(rep)
    assert doc["error"]["type"] == "AnnotationError"


def test_unknown_constant_and_bad_width_are_errors(capsys):
    assert main(["check", kernel("none-s1-b4-w2"), "--define", "NOPE=3", "-q"]) == 2
    assert main(["check", kernel("none-s1-b4-w2"), "--width", "0", "-q"]) == 2


def test_oracle_cap_gives_inconclusive_exit(tmp_path):
    rep = tmp_path / "r.json"
    code = main(["check", kernel("none-s1-b4-w2"), "--mode", "strong-fc", "--backend", "oracle",
                 "--width", "8", "--report", str(rep), "-q"])
    assert code == 3
    assert {r["verdict"] for r in valid(rep)["results"]} == {"cap"}


def test_rb_command(tmp_path, capsys):
    spin = next(c for c in CASES if c.bug == BugClass.UNRESPONSIVE)
    rep = tmp_path / "rb.json"
    assert main(["rb", kernel(spin.name), "--bound", str(spin.rb_bound),
                 "--trace-dir", str(tmp_path), "--report", str(rep), "-q"]) == 1
    assert list(tmp_path.glob("*-rb.trace.json"))
    assert valid(rep)["campaign"]["stop"] == "rb-failure"
    assert main(["rb", kernel("none-s1-b4-w2"), "--bound", "64", "-q"]) == 0
    assert main(["rb", kernel("none-s1-b4-w2"), "--bound", "0", "-q"]) == 2


def test_plan_command(capsys):
    assert main(["plan", kernel("none-s1-b4-w2")]) == 0
    assert "ACC1" in capsys.readouterr().out


def test_parallel_jobs_dimacs_and_assumptions(tmp_path):
    cnf = tmp_path / "cnf"
    rep = tmp_path / "r.json"
    code = main(["check", kernel("rel-mutation-s1-b4-w2"), "--jobs", "2", "--dimacs", str(cnf),
                 "--policy", "constrained", "--assume", "key1=1", "--mode", "strong-fc",
                 "--report", str(rep), "-q"])
    assert code in (0, 1)
    assert list(cnf.glob("*.cnf"))
    assert valid(rep)["config"]["jobs"] == 2


def test_corpus_run_exits_zero(tmp_path, capsys):
    rep = tmp_path / "c.json"
    assert main(["corpus", "run", "--report", str(rep), "-q"]) == 0
    doc = valid(rep)
    assert all(c["ok"] for c in doc["cases"]) and len(doc["cases"]) == len(CASES)


@pytest.mark.parametrize("case", CASES, ids=[c.name for c in CASES])
def test_exit_code_contract(case):
    args = ["check", kernel(case.name), "-q"]
    if case.bug == BugClass.UNRESPONSIVE:
        args.append("--rb-mode")
    verdicts = {v for k, v in case.expected.items() if k != "rb"}
    assert main(args) == (1 if "sat" in verdicts else 0)
