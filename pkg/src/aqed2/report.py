"""Machine-readable JSON reports for the command-line runs."""
from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

from .decompose import DecompositionPlan
from .drb import Campaign
from .suite import summarize

REPORT_VERSION = 1


def plan_dict(p: DecompositionPlan) -> dict:
    members = p.members or p.models
    return {
        **p.counts(),
        "parallel_groups": [list(g) for g in p.parallel_groups],
        "models": [{"name": m.name, "batch_size": m.batch_size, "in_size": m.in_size,
                    "out_size": m.out_size, "steps": len(m.program),
                    "relevant_cells": len(m.layout.relevant)} for m in members],
        "wiring": [{"producer": w.producer, "consumer": w.consumer, "buffer": w.buffer,
                    "alpha_identity": w.alpha.is_identity} for w in p.wiring],
    }


def check_report(source: str, config: dict, p: DecompositionPlan, outcomes: list,
                 exit_code: int) -> dict:
    members = p.members or p.models
    return {
        "version": REPORT_VERSION,
        "command": "check",
        "input": source,
        "config": config,
        "plan": plan_dict(p),
        "summary": summarize(members, outcomes).to_dict(),
        "results": [o.to_dict() for o in outcomes],
        "exit_code": exit_code,
    }


def rb_report(source: str, config: dict, campaign: Campaign, exit_code: int) -> dict:
    return {"version": REPORT_VERSION, "command": "rb", "input": source, "config": config,
            "campaign": campaign.to_dict(), "exit_code": exit_code}


def corpus_report(manifest: str, config: dict, runs: list, exit_code: int) -> dict:
    cases = []
    for r in runs:
        cases.append({"name": r.case.name, "class": r.case.bug.value, "ok": r.ok,
                      "rb": r.rb, "checks": len(r.outcomes),
                      "mismatches": [{"key": k, "expected": e, "got": g}
                                     for k, e, g in r.mismatches]})
    return {"version": REPORT_VERSION, "command": "corpus-run", "input": manifest,
            "config": config, "cases": cases, "exit_code": exit_code}


def error_report(command: str, source: str, exc: Exception) -> dict:
    return {"version": REPORT_VERSION, "command": command, "input": source, "exit_code": 2,
            "error": {"type": type(exc).__name__, "message": str(exc)}}


def schema() -> dict:
    return json.loads((resources.files("aqed2") / "data" / "report.schema.json").read_text())


def write_report(report: dict, path: str | Path) -> None:
    Path(path).write_text(json.dumps(report, indent=1) + "\n")
