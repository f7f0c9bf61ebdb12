"""Backend dispatch: symbolic (bit-blast + CDCL) and exhaustive checking."""
from __future__ import annotations

import os
import time
from dataclasses import dataclass, field
from enum import Enum

from ..errors import ConfigError
from ..obligations import CheckObligation, CounterexampleTrace, replay
from .bitblast import Blaster, to_dimacs
from .encode import ConstraintSystem, encode
from .sat import SatStatus, Solver

BUDGET_SECONDS_ENV = "AQED2_BUDGET_SECONDS"
BUDGET_CONFLICTS_ENV = "AQED2_BUDGET_CONFLICTS"


class Verdict(Enum):
    UNSAT = "unsat"
    SAT = "sat"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class Budget:
    seconds: float | None = None
    conflicts: int | None = None
    clauses: int | None = None  # memory proxy

    def __post_init__(self):
        for name in ("seconds", "conflicts", "clauses"):
            v = getattr(self, name)
            if v is not None and v <= 0:
                raise ConfigError(f"budget {name} must be positive")

    @classmethod
    def from_env(cls, env=None) -> "Budget":
        env = os.environ if env is None else env
        try:
            seconds = float(env[BUDGET_SECONDS_ENV]) if env.get(BUDGET_SECONDS_ENV) else None
            conflicts = int(env[BUDGET_CONFLICTS_ENV]) if env.get(BUDGET_CONFLICTS_ENV) else None
        except ValueError as exc:
            raise ConfigError(f"malformed budget variable: {exc}") from None
        return cls(seconds, conflicts)


@dataclass
class CheckResult:
    verdict: Verdict
    trace: CounterexampleTrace | None = None
    cause: str = ""
    stats: dict = field(default_factory=dict)
    obligation: CheckObligation | None = None

    @property
    def sat(self) -> bool:
        return self.verdict == Verdict.SAT

    @property
    def unsat(self) -> bool:
        return self.verdict == Verdict.UNSAT

    def to_dict(self) -> dict:
        out = {"verdict": self.verdict.value, "stats": dict(self.stats)}
        if self.cause:
            out["cause"] = self.cause
        if self.trace is not None:
            out["trace"] = self.trace.to_dict()
        return out


def check_sat(sys: ConstraintSystem, budget: Budget | None = None,
              dimacs_path: str | None = None) -> CheckResult:
    budget = budget or Budget()
    start = time.perf_counter()
    tm = sys.tm
    root = sys.root()
    stats = {"backend": "sat", "terms": len(tm)}
    obl = sys.obligation
    if tm.is_const(root) and tm.value(root) == 0:
        if dimacs_path:
            blaster = Blaster(tm)
            blaster.assert_true(root)
            with open(dimacs_path, "w") as fh:
                fh.write(export_dimacs(sys, blaster))
        stats.update(clauses=0, vars=0, seconds=time.perf_counter() - start)
        return CheckResult(Verdict.UNSAT, stats=stats, obligation=obl)
    blaster = Blaster(tm)
    blaster.assert_true(root)
    stats.update(clauses=len(blaster.clauses), vars=blaster.n_vars)
    if dimacs_path:
        with open(dimacs_path, "w") as fh:
            fh.write(export_dimacs(sys, blaster))
    if budget.clauses is not None and len(blaster.clauses) > budget.clauses:
        stats["seconds"] = time.perf_counter() - start
        return CheckResult(Verdict.UNKNOWN, cause="memory", stats=stats, obligation=obl)
    deadline = None if budget.seconds is None else start + budget.seconds
    if deadline is not None and time.perf_counter() > deadline:
        stats.update(seconds=time.perf_counter() - start, budget_seconds=budget.seconds)
        return CheckResult(Verdict.UNKNOWN, cause="timeout", stats=stats, obligation=obl)
    result = Solver(blaster.n_vars, blaster.clauses).solve(budget.conflicts, deadline)
    stats.update(result.stats)
    stats["seconds"] = time.perf_counter() - start
    if result.status == SatStatus.UNKNOWN:
        stats["budget_seconds"] = budget.seconds
        stats["budget_conflicts"] = budget.conflicts
        return CheckResult(Verdict.UNKNOWN, cause=result.cause, stats=stats, obligation=obl)
    if result.status == SatStatus.UNSAT:
        return CheckResult(Verdict.UNSAT, stats=stats, obligation=obl)
    witness = sys.decode(blaster.decode(result.model))
    return CheckResult(Verdict.SAT, replay(obl, witness), stats=stats, obligation=obl)


def export_dimacs(sys: ConstraintSystem, blaster: Blaster | None = None) -> str:
    """Clause form with a header mapping solver variables to model locations.

    Variable 1 is the constant TRUE; each model variable's bits are listed
    least-significant first (a negative literal means the bit is the negation).
    """
    if blaster is None:
        blaster = Blaster(sys.tm)
        blaster.assert_true(sys.root())
    comments = [f"obligation {line}" for line in sys.obligation.describe().splitlines()]
    comments.append("var 1 = TRUE")
    for name in sorted(blaster.var_bits):
        loc = sys.variables.get(name)
        where = "" if loc is None else f" ({loc.kind} copy={loc.copy} batch={loc.batch} " \
                                       f"cell={loc.cell} role={loc.role} index={loc.index})"
        comments.append(f"var {name}{where} bits {' '.join(map(str, blaster.var_bits[name]))}")
    return to_dimacs(blaster.n_vars, blaster.clauses, comments)


def check(obl: CheckObligation, backend: str = "sat", budget: Budget | None = None,
          caps=None, dimacs_path: str | None = None) -> CheckResult:
    if backend == "sat":
        return check_sat(encode(obl), budget, dimacs_path)
    if backend == "oracle":
        from .exhaustive import check_exhaustive
        return check_exhaustive(obl, caps)
    raise ConfigError(f"unknown backend {backend!r}")
