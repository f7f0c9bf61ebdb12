"""Check obligations: the closed verification problems handed to a backend.

An obligation names a mode, a model, an initial-memory policy and the
mode-specific parameters.  A *witness* is a concrete assignment to everything
an obligation leaves open (initial memories, input batches, lane indices);
`evaluate` decides concretely whether a witness violates the property, which
is what both backends and the replay step rely on.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Sequence

from .errors import NotApplicable, ReplayMismatch, SpecError, StepBudgetExceeded
from .model import AcceleratorModel, ExecutionTrace, InputBatch, MemoryPredicate, run_sequence
from .program import Ref, eval_scalar, format_expr, format_instr, map_expr


class Mode(Enum):
    FC = "fc"
    STRONG_FC = "strong-fc"
    INTRA_FC = "intra-fc"
    STRONG_FCD = "fcd"
    SAC = "sac"
    RB = "rb"

    @property
    def fc_family(self) -> bool:
        return self in (Mode.FC, Mode.STRONG_FC, Mode.INTRA_FC, Mode.STRONG_FCD)

    @property
    def copies(self) -> int:
        return 2 if self in (Mode.STRONG_FC, Mode.STRONG_FCD) else 1


class Policy(Enum):
    SYMBOLIC = "symbolic"
    CONCRETE = "concrete"
    CONSTRAINED = "constrained"


# ---------------------------------------------------------------------------
# abstract specification for single-action checks

ACTION_KEY = "act"


def data_key(k: int) -> tuple:
    return ("d", k)


def rel_key(p: int) -> tuple:
    return ("rel", p)


@dataclass(frozen=True, eq=False)
class SpecOracle:
    """Reference function (action, data words, relevant state) -> output words.

    `exprs` holds one expression per output word over the keys ``"act"``,
    ``("d", k)`` and ``("rel", p)``; such specs work with both backends.  A
    host callback `fn` works with the exhaustive backend and replay only.
    """
    name: str
    out_size: int
    exprs: tuple | None = None
    fn: Callable | None = None
    width: int = 8

    def __post_init__(self):
        if self.exprs is None and self.fn is None:
            raise SpecError("a spec needs expressions or a callback")
        if self.exprs is not None and len(self.exprs) != self.out_size:
            raise SpecError(f"spec {self.name} gives {len(self.exprs)} words, "
                            f"expected {self.out_size}")

    def __call__(self, action: int, data: Sequence[int], rel: Sequence[int]) -> tuple:
        mask = (1 << self.width) - 1
        if self.exprs is not None:
            def read(key):
                if key == ACTION_KEY:
                    return action
                kind, idx = key
                return data[idx] if kind == "d" else rel[idx]
            return tuple(eval_scalar(e, read, self.width) for e in self.exprs)
        try:
            out = self.fn(action, tuple(data), tuple(rel))
        except Exception as exc:  # a partial oracle is a spec problem, not a checker crash
            raise SpecError(f"spec {self.name} undefined at action={action} data={tuple(data)} "
                            f"rel={tuple(rel)}: {exc}") from exc
        if out is None:
            raise SpecError(f"spec {self.name} undefined at action={action} data={tuple(data)}")
        out = (out,) if isinstance(out, int) else tuple(out)
        if len(out) != self.out_size:
            raise SpecError(f"spec {self.name} returned {len(out)} words")
        return tuple(v & mask for v in out)

    def describe(self) -> str:
        if self.exprs is None:
            return f"{self.name}(callback)"
        return f"{self.name}(" + ", ".join(format_expr(e, _key_text) for e in self.exprs) + ")"


def _key_text(key) -> str:
    if key == ACTION_KEY:
        return "act"
    return f"{key[0]}[{key[1]}]"


def spec_from_callback(name: str, fn: Callable, out_size: int = 1, width: int = 8) -> SpecOracle:
    return SpecOracle(name, out_size, None, fn, width)


def spec_from_block(prog, block_name: str, model: AcceleratorModel) -> SpecOracle:
    """Build a spec from a block's ``%SPEC`` expressions.

    Inside a spec, ``act`` is the lane's action, ``d`` / ``d[k]`` its data
    words, and relevant-state variables are referenced by their own names.
    """
    from .abk.lower import Unroller, program_layout
    from .abk.ast import Index, Name

    block = prog.block(block_name)
    exprs = block.annotation.spec
    if not exprs:
        raise SpecError(f"block {block_name} has no %SPEC")
    layout = program_layout(prog)
    relevant = {c: p for p, c in enumerate(model.layout.relevant)}

    class SpecLowering(Unroller):
        def expr(self, node, env, line):
            if isinstance(node, Name) and node.id == "act":
                return Ref(ACTION_KEY)
            if isinstance(node, Name) and node.id == "d":
                return Ref(data_key(0))
            if isinstance(node, Index) and node.name == "d":
                k = super().expr(node.indices[0], env, line)
                if not isinstance(k, int) or not 0 <= k < model.in_size:
                    raise SpecError(f"spec data index must be a constant below {model.in_size}")
                return Ref(data_key(k))
            return super().expr(node, env, line)

    lowering = SpecLowering(prog, layout)

    def to_key(key):
        if isinstance(key, int):
            if key not in relevant:
                raise SpecError(f"spec reads {layout.names[key]}, which is not relevant state")
            return rel_key(relevant[key])
        return key

    out = []
    for node in exprs:
        e = lowering.rt(lowering.expr(node, {}, block.line))
        out.append(map_expr(e, to_key))
    return SpecOracle(block_name, len(out), tuple(out), None, prog.width)


# ---------------------------------------------------------------------------
# obligations

@dataclass(frozen=True, eq=False)
class CheckObligation:
    mode: Mode
    model: AcceleratorModel
    policy: Policy = Policy.SYMBOLIC
    bound: int = 1  # batch count for FC, step bound for RB
    spec: SpecOracle | None = None
    lane: int = 0  # SAC lane position
    relevant_rows: frozenset | None = None  # SAC relevant-state set (rows over model.rel)
    constraint: MemoryPredicate | None = None  # CONSTRAINED policy predicate
    existential: bool = False  # SAC: reachable-state existential variant

    def __post_init__(self):
        if self.mode == Mode.SAC and self.spec is None:
            raise SpecError("single-action obligations need a spec oracle")
        if self.mode != Mode.SAC and self.spec is not None:
            raise ValueError("self-consistency obligations are specification-free")
        if self.bound < 1:
            raise ValueError("bound must be at least 1")
        if self.mode == Mode.SAC and not 0 <= self.lane < self.model.batch_size:
            raise ValueError(f"lane {self.lane} outside batch of {self.model.batch_size}")
        if self.policy == Policy.CONSTRAINED and self.constraint is None:
            raise ValueError("CONSTRAINED policy needs a predicate")

    @property
    def predicate(self) -> MemoryPredicate | None:
        """Initial-memory predicate implied by the policy (None = unconstrained)."""
        if self.policy == Policy.CONCRETE:
            return self.model.initial
        if self.policy == Policy.CONSTRAINED:
            return self.constraint
        return None

    @property
    def batches(self) -> int:
        return self.bound if self.mode == Mode.FC else 1

    @property
    def assertion(self) -> str:
        return {
            Mode.FC: "exists i<=n, j, j': in_i(j) = in_n(j') & rel(s_i) = rel(s_n) & o_i(j) != o_n(j')",
            Mode.STRONG_FC: "exists s0, s0', j, j': in(j) = in'(j') & rel(s0) = rel(s0') & o(j) != o'(j')",
            Mode.STRONG_FCD: "exists s0, s0', j, j': in(j) = in'(j') & rel(s0) = rel(s0') & "
                             "(o(j) != o'(j') | rel(sF) != rel(sF'))",
            Mode.INTRA_FC: "exists j != j': in(j) = in(j') & o(j) != o(j')",
            Mode.SAC: "exists in(j), rel in R: o(j) != spec(in(j), rel), other lanes zero",
            Mode.RB: "exists s0, in: no final control state within n steps",
        }[self.mode]

    def describe(self) -> str:
        """Deterministic text form, stable across runs (used for caching and golden tests)."""
        m = self.model
        digest = hashlib.sha256("\n".join(format_instr(i) for i in m.program).encode()).hexdigest()
        lines = [
            f"mode {self.mode.value}",
            f"model {m.name} b={m.batch_size} actions={m.n_actions} width={m.data_width} "
            f"in_size={m.in_size} out_size={m.out_size} cells={m.layout.n_cells} "
            f"steps={len(m.program)} program={digest[:16]}",
            f"relevant {list(m.layout.relevant)}",
            f"policy {self.policy.value}",
            f"bound {self.bound}",
        ]
        pred = self.predicate
        if pred is not None:
            lines.append(f"predicate cells={list(pred.cells)} rows={sorted(pred.rows)}")
        if self.mode == Mode.SAC:
            lines.append(f"lane {self.lane}")
            lines.append(f"spec {self.spec.describe()}")
            rows = "all" if self.relevant_rows is None else sorted(self.relevant_rows)
            lines.append(f"relevant-set {rows}")
            lines.append(f"quantifier {'exists' if self.existential else 'forall'}")
        lines.append(f"assert {self.assertion}")
        return "\n".join(lines) + "\n"


def build_fc(model: AcceleratorModel, n: int, policy: Policy = Policy.SYMBOLIC,
             constraint: MemoryPredicate | None = None) -> CheckObligation:
    return CheckObligation(Mode.FC, model, policy, n, constraint=constraint)


def build_strong_fc(model: AcceleratorModel, policy: Policy = Policy.SYMBOLIC, fcd: bool = False,
                    constraint: MemoryPredicate | None = None) -> CheckObligation:
    return CheckObligation(Mode.STRONG_FCD if fcd else Mode.STRONG_FC, model, policy,
                           constraint=constraint)


def build_intra_fc(model: AcceleratorModel, policy: Policy = Policy.SYMBOLIC,
                   constraint: MemoryPredicate | None = None) -> CheckObligation:
    if model.batch_size < 2:
        raise NotApplicable(f"{model.name}: intra-batch checks need a batch size above one")
    return CheckObligation(Mode.INTRA_FC, model, policy, constraint=constraint)


def build_sac(model: AcceleratorModel, spec: SpecOracle, lane: int = 0,
              relevant_rows=None, policy: Policy = Policy.SYMBOLIC,
              constraint: MemoryPredicate | None = None,
              existential: bool = False) -> CheckObligation:
    if spec.out_size != model.out_size:
        raise SpecError(f"spec yields {spec.out_size} words, model outputs {model.out_size}")
    rows = None if relevant_rows is None else frozenset(tuple(r) for r in relevant_rows)
    if rows is not None and any(len(r) != len(model.layout.relevant) for r in rows):
        raise SpecError("relevant-state rows must cover every relevant cell")
    return CheckObligation(Mode.SAC, model, policy, spec=spec, lane=lane, relevant_rows=rows,
                           constraint=constraint, existential=existential)


def build_rb(model: AcceleratorModel, n: int, policy: Policy = Policy.SYMBOLIC,
             constraint: MemoryPredicate | None = None) -> CheckObligation:
    return CheckObligation(Mode.RB, model, policy, n, constraint=constraint)


# ---------------------------------------------------------------------------
# witnesses and concrete evaluation

@dataclass(frozen=True)
class Witness:
    """Concrete values for everything an obligation leaves open.

    memories[c] is copy c's initial memory (input cells are overwritten by the
    batch); batches[c] its input batches.  lanes holds the lane indices, all
    0-based: (i, j, j') for FC(n), (j, j') for two-copy and intra checks,
    (j,) for SAC and () for RB.
    """
    memories: tuple
    batches: tuple
    lanes: tuple = ()


@dataclass
class Evaluation:
    violated: bool
    traces: list
    detail: dict = field(default_factory=dict)


def admits(obl: CheckObligation, memory: Sequence[int]) -> bool:
    pred = obl.predicate
    if pred is not None and not pred(memory):
        return False
    if obl.mode == Mode.SAC and obl.relevant_rows is not None:
        if obl.model.rel(memory) not in obl.relevant_rows:
            return False
    return True


def sac_batch(obl: CheckObligation, action: int, data: Sequence[int]) -> InputBatch:
    """One live lane at obl.lane; every other lane is (default action, zeros)."""
    m = obl.model
    lanes = [(0, (0,) * m.in_size)] * m.batch_size
    lanes[obl.lane] = (action, tuple(data))
    return InputBatch(tuple(lanes))


def _runs(model: AcceleratorModel, memory, batches):
    try:
        return run_sequence(model, model.initial_state(memory), list(batches))
    except StepBudgetExceeded:
        return None


def evaluate(obl: CheckObligation, w: Witness) -> Evaluation:
    """Decide concretely whether witness `w` violates the obligation's property."""
    m = obl.model
    if len(w.memories) != obl.mode.copies or any(not admits(obl, mem) for mem in w.memories):
        return Evaluation(False, [], {"reason": "initial memory outside the policy"})
    if obl.mode == Mode.RB:
        try:
            trace = run_sequence(m, m.initial_state(w.memories[0]), list(w.batches[0]),
                                 step_budget=obl.bound)
        except StepBudgetExceeded as exc:
            return Evaluation(True, [], {"steps": exc.steps, "stuck_at": exc.state.control})
        return Evaluation(False, [trace], {"steps": trace.segments[0].steps})
    traces = [_runs(m, mem, bs) for mem, bs in zip(w.memories, w.batches)]
    if any(t is None for t in traces):
        return Evaluation(False, [], {"reason": "a run did not reach its final state"})
    if obl.mode == Mode.FC:
        i, j, j2 = w.lanes
        n = obl.bound - 1
        trace = traces[0]
        inits, finals = trace.initials, trace.finals
        in_a, in_b = m.inp(inits[i].memory)[j], m.inp(inits[n].memory)[j2]
        rel_a, rel_b = m.rel(inits[i].memory), m.rel(inits[n].memory)
        out_a, out_b = m.out(finals[i].memory)[j], m.out(finals[n].memory)[j2]
        violated = (i, j) != (n, j2) and in_a == in_b and rel_a == rel_b and out_a != out_b
        detail = {"input": in_a, "rel": rel_a, "outputs": (out_a, out_b)}
    elif obl.mode in (Mode.STRONG_FC, Mode.STRONG_FCD):
        j, j2 = w.lanes
        a, b = traces
        s0a, s0b = a.initials[0].memory, b.initials[0].memory
        sfa, sfb = a.finals[0].memory, b.finals[0].memory
        in_a, in_b = m.inp(s0a)[j], m.inp(s0b)[j2]
        out_a, out_b = m.out(sfa)[j], m.out(sfb)[j2]
        premise = in_a == in_b and m.rel(s0a) == m.rel(s0b)
        differs = out_a != out_b
        rel_differs = m.rel(sfa) != m.rel(sfb)
        violated = premise and (differs or (obl.mode == Mode.STRONG_FCD and rel_differs))
        detail = {"input": in_a, "rel": m.rel(s0a), "outputs": (out_a, out_b),
                  "final_rel": (m.rel(sfa), m.rel(sfb))}
    elif obl.mode == Mode.INTRA_FC:
        j, j2 = w.lanes
        s0, sf = traces[0].initials[0].memory, traces[0].finals[0].memory
        in_a, in_b = m.inp(s0)[j], m.inp(s0)[j2]
        out_a, out_b = m.out(sf)[j], m.out(sf)[j2]
        violated = j != j2 and in_a == in_b and out_a != out_b
        detail = {"input": in_a, "outputs": (out_a, out_b)}
    else:  # SAC
        (j,) = w.lanes
        s0, sf = traces[0].initials[0].memory, traces[0].finals[0].memory
        batch = w.batches[0][0]
        expected_batch = sac_batch(obl, *batch.lanes[j])
        action, data = m.inp(s0)[j]
        expected = obl.spec(action, data, m.rel(s0))
        got = m.out(sf)[j]
        violated = j == obl.lane and batch == expected_batch and got != expected
        detail = {"input": (action, data), "rel": m.rel(s0), "output": got, "expected": expected}
    return Evaluation(violated, traces, detail)


# ---------------------------------------------------------------------------
# counterexample traces

@dataclass
class CounterexampleTrace:
    mode: Mode
    model_name: str
    witness: Witness
    traces: list
    detail: dict
    steps: int = 0
    monitor: object = None  # MonitorVerdict for FC-family traces

    @property
    def lanes(self) -> tuple:
        return self.witness.lanes

    def to_dict(self) -> dict:
        out = {
            "mode": self.mode.value,
            "model": self.model_name,
            "lanes": list(self.witness.lanes),
            "initial_memories": [list(m) for m in self.witness.memories],
            "batches": [[[[a, list(d)] for a, d in b.lanes] for b in bs]
                        for bs in self.witness.batches],
            "detail": _jsonable(self.detail),
            "steps": self.steps,
        }
        if self.monitor is not None:
            out["monitor"] = {"dup_done": self.monitor.dup_done, "fc_check": self.monitor.fc_check,
                              "log": list(self.monitor.log)}
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "CounterexampleTrace":
        batches = tuple(tuple(InputBatch(tuple((a, tuple(d)) for a, d in b)) for b in bs)
                        for bs in data["batches"])
        w = Witness(tuple(tuple(m) for m in data["initial_memories"]), batches,
                    tuple(data["lanes"]))
        return cls(Mode(data["mode"]), data["model"], w, [], data.get("detail", {}),
                   data.get("steps", 0))

    def format(self, model: AcceleratorModel) -> str:
        lines = [f"{self.mode.value} violation in {self.model_name}, lanes {list(self.lanes)}"]
        for c, (mem, bs) in enumerate(zip(self.witness.memories, self.witness.batches)):
            nz = {model.layout.name(k): v for k, v in enumerate(mem)
                  if v and k not in set(model.layout.input_cells)}
            lines.append(f"  copy {c}: initial non-zero cells {nz}")
            for k, b in enumerate(bs):
                lines.append(f"  copy {c} batch {k + 1}: {[list(d) for _, d in b.lanes]}")
        for key, v in self.detail.items():
            lines.append(f"  {key}: {v}")
        return "\n".join(lines)


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return v


def replay(obl: CheckObligation, w: Witness) -> CounterexampleTrace:
    """Re-establish a violation concretely; raises ReplayMismatch if it does not hold."""
    ev = evaluate(obl, w)
    if not ev.violated:
        raise ReplayMismatch(f"{obl.mode.value} witness for {obl.model.name} does not replay: "
                             f"{ev.detail}")
    steps = ev.detail.get("steps", 0) if obl.mode == Mode.RB else \
        sum(s.steps for t in ev.traces for s in t.segments)
    trace = CounterexampleTrace(obl.mode, obl.model.name, w, ev.traces, ev.detail, steps)
    if obl.mode.fc_family:
        from .monitor import replay_monitor
        verdict = replay_monitor(trace, obl.model)
        if verdict.fc_check != 1:
            raise ReplayMismatch(f"monitor did not confirm the {obl.mode.value} violation")
        trace.monitor = verdict
    return trace

