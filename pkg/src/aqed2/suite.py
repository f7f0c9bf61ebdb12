"""Per-sub-model obligation suites and their execution."""
from __future__ import annotations

import time
from dataclasses import dataclass, field

from .engine.check import Budget, CheckResult, Verdict, check
from .engine.exhaustive import Caps
from .errors import AqedError, ExplosionCap, NotApplicable, SpecError
from .model import AcceleratorModel, MemoryPredicate
from .obligations import (CheckObligation, Policy, build_fc, build_intra_fc, build_sac,
                          build_strong_fc, spec_from_block)

FC_MODES = ("intra-fc", "strong-fc", "fc", "fcd")
MODES = FC_MODES + ("sac",)
DEFAULT_FC_BOUND = 2


@dataclass
class PlannedCheck:
    """One suite entry: an obligation, or the reason there is none."""
    model: str
    mode: str
    obligation: CheckObligation | None = None
    lane: int | None = None
    skip: str = ""

    @property
    def key(self) -> str:
        return f"{self.model}/{self.mode}" + ("" if self.lane is None else f"@{self.lane}")


@dataclass
class CheckOutcome:
    check: PlannedCheck
    verdict: str  # unsat | sat | unknown | n/a | cap | error
    result: CheckResult | None = None
    seconds: float = 0.0
    detail: str = ""

    def to_dict(self) -> dict:
        out = {"key": self.check.key, "model": self.check.model, "mode": self.check.mode,
               "verdict": self.verdict, "seconds": round(self.seconds, 6)}
        if self.check.lane is not None:
            out["lane"] = self.check.lane
        if self.detail:
            out["detail"] = self.detail
        if self.result is not None:
            out["stats"] = _plain(self.result.stats)
            if self.result.cause:
                out["cause"] = self.result.cause
            if self.result.trace is not None:
                out["trace"] = self.result.trace.to_dict()
        return out


def _plain(stats: dict) -> dict:
    return {k: (round(v, 6) if isinstance(v, float) else v) for k, v in stats.items()
            if isinstance(v, (int, float, str, bool)) or v is None}


def checks_for(prog, model: AcceleratorModel, modes=MODES, policy: Policy = Policy.SYMBOLIC,
               constraint: MemoryPredicate | None = None, fc_bound: int = DEFAULT_FC_BOUND,
               sac_lanes=None) -> list:
    """Obligations for one sub-model; modes that cannot apply are listed with a reason."""
    out = []
    for mode in modes:
        if mode == "intra-fc":
            try:
                out.append(PlannedCheck(model.name, mode, build_intra_fc(model, policy, constraint)))
            except NotApplicable as exc:
                out.append(PlannedCheck(model.name, mode, skip=str(exc)))
        elif mode == "strong-fc":
            out.append(PlannedCheck(model.name, mode, build_strong_fc(model, policy, False, constraint)))
        elif mode == "fcd":
            out.append(PlannedCheck(model.name, mode, build_strong_fc(model, policy, True, constraint)))
        elif mode == "fc":
            out.append(PlannedCheck(model.name, mode, build_fc(model, fc_bound, policy, constraint)))
        elif mode == "sac":
            block = getattr(model.source, "name", None)
            try:
                if prog is None or block is None:
                    raise SpecError(f"{model.name} has no source block")
                spec = spec_from_block(prog, block, model)
            except SpecError as exc:
                out.append(PlannedCheck(model.name, mode, skip=str(exc)))
                continue
            rows = getattr(model.source.annotation, "sac_rel", None) or None
            lanes = range(model.batch_size) if sac_lanes is None else sac_lanes
            for lane in lanes:
                if 0 <= lane < model.batch_size:
                    out.append(PlannedCheck(model.name, mode, build_sac(
                        model, spec, lane, rows, policy, constraint), lane=lane))
        else:
            raise ValueError(f"unknown mode {mode!r}")
    return out


def run_check(pc: PlannedCheck, backend: str = "sat", budget: Budget | None = None,
              caps: Caps | None = None, dimacs_path: str | None = None) -> CheckOutcome:
    if pc.obligation is None:
        return CheckOutcome(pc, "n/a", detail=pc.skip)
    start = time.perf_counter()
    try:
        result = check(pc.obligation, backend, budget, caps, dimacs_path)
    except NotApplicable as exc:
        return CheckOutcome(pc, "n/a", seconds=time.perf_counter() - start, detail=str(exc))
    except ExplosionCap as exc:
        return CheckOutcome(pc, "cap", seconds=time.perf_counter() - start, detail=str(exc))
    except AqedError as exc:
        return CheckOutcome(pc, "error", seconds=time.perf_counter() - start,
                            detail=f"{type(exc).__name__}: {exc}")
    return CheckOutcome(pc, result.verdict.value, result, time.perf_counter() - start)


@dataclass
class SuiteSummary:
    """Sub-model counts: total, batch size above one, fully checked, with a violation."""
    total: int = 0
    parallel: int = 0
    completed: int = 0
    buggy: int = 0
    models: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"T": self.total, "P": self.parallel, "C": self.completed, "B": self.buggy}


def summarize(models, outcomes) -> SuiteSummary:
    s = SuiteSummary(total=len(models), parallel=sum(1 for m in models if m.batch_size > 1))
    for m in models:
        mine = [o for o in outcomes if o.check.model == m.name]
        verdicts = {o.verdict for o in mine}
        if Verdict.SAT.value in verdicts:
            s.buggy += 1
        if mine and verdicts <= {"sat", "unsat", "n/a"}:
            s.completed += 1
        s.models[m.name] = sorted(verdicts)
    return s
