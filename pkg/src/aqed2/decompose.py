"""Sub-accelerator planning, composability checks and functional composition.

All sub-models of one program share the program's cell layout, so composing
them is concatenation of their instruction lists with one extra step in
between that applies the alpha memory map (a permutation of cell indices).
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .abk.ast import AbkProgram
from .abk.interp import interpret
from .abk.lower import lane_cells, lower, program_layout
from .errors import ComposabilityError, SpecError, WiringError
from .model import AcceleratorModel, InputBatch, MemoryLayout
from .obligations import SpecOracle, spec_from_block, spec_from_callback
from .program import Copy, Nop, map_instr

CONDITIONS = {
    "i": "equal batch sizes",
    "ii": "producer output words match consumer input words",
    "iii": "disjoint control states",
    "iv": "identical relevant regions",
    "v": "non-relevant state factors through the memory map",
}


@dataclass(frozen=True)
class AlphaMap:
    """Cell permutation: consumer memory[i] = producer memory[perm[i]]."""
    perm: tuple

    @classmethod
    def identity(cls, n_cells: int) -> "AlphaMap":
        return cls(tuple(range(n_cells)))

    @classmethod
    def from_pairs(cls, n_cells: int, pairs) -> "AlphaMap":
        """Complete a partial dst <- src assignment to a bijection."""
        src_of = dict(pairs)
        if len(set(src_of.values())) != len(src_of):
            raise ValueError("alpha pairs reuse a source cell")
        free_dst = [c for c in range(n_cells) if c not in src_of]
        used = set(src_of.values())
        free_src = [c for c in range(n_cells) if c not in used]
        fixed = set(free_dst) & set(free_src)
        rest_dst = [c for c in free_dst if c not in fixed]
        rest_src = [c for c in free_src if c not in fixed]
        for c in fixed:
            src_of[c] = c
        src_of.update(zip(rest_dst, rest_src))
        return cls(tuple(src_of[c] for c in range(n_cells)))

    def __call__(self, memory) -> tuple:
        return tuple(memory[s] for s in self.perm)

    @property
    def is_identity(self) -> bool:
        return all(i == s for i, s in enumerate(self.perm))

    def is_bijection(self) -> bool:
        return sorted(self.perm) == list(range(len(self.perm)))

    def image(self, cells) -> set:
        """Consumer cells that receive the given producer cells."""
        where = {s: i for i, s in enumerate(self.perm)}
        return {where[c] for c in cells}

    def as_copy(self) -> Copy:
        moved = [(i, s) for i, s in enumerate(self.perm) if i != s]
        return Copy(tuple(i for i, _ in moved), tuple(s for _, s in moved), "alpha")


@dataclass(frozen=True)
class Wiring:
    producer: str
    consumer: str
    buffer: str
    alpha: AlphaMap


@dataclass
class DecompositionPlan:
    models: tuple  # one composed-in-parallel model per stage, in dataflow order
    wiring: tuple  # Wiring per adjacent stage pair
    parallel_groups: tuple  # per stage: names of the member sub-models
    members: tuple = ()  # every sub-model, in source order
    program: AbkProgram | None = field(default=None, repr=False)

    @property
    def alpha_maps(self) -> tuple:
        return tuple(w.alpha for w in self.wiring)

    def counts(self) -> dict:
        """Total sub-models and those with more than one lane per batch."""
        members = self.members or self.models
        return {"T": len(members), "P": sum(1 for m in members if m.batch_size > 1)}

    def report(self) -> str:
        rows = [("stage", "sub-model", "lanes", "in", "out", "steps", "relevant", "buffers")]
        for k, (names, stage) in enumerate(zip(self.parallel_groups, self.models)):
            for name in names:
                m = next(x for x in self.members if x.name == name) if self.members else stage
                rows.append((str(k + 1), m.name, str(m.batch_size), str(m.in_size),
                             str(m.out_size), str(len(m.program)), str(len(m.layout.relevant)),
                             _buffers(m)))
        widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
        lines = ["  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in rows]
        for w in self.wiring:
            how = "identity" if w.alpha.is_identity else f"{len(w.alpha.as_copy().dsts)} cells moved"
            lines.append(f"wiring {w.producer} -> {w.consumer} via {w.buffer} (alpha: {how})")
        groups = [g for g in self.parallel_groups if len(g) > 1]
        for g in groups:
            lines.append(f"parallel group: {', '.join(g)}")
        c = self.counts()
        lines.append(f"T={c['T']} P={c['P']}")
        return "\n".join(lines) + "\n"


def _buffers(m: AcceleratorModel) -> str:
    ann = getattr(m.source, "annotation", None)
    if ann is None:
        return ""
    return f"{ann.batch_mem_in} -> {ann.batch_mem_out}"


# planning ----------------------------------------------------------------------
def _lanes(prog: AbkProgram, block, side: str) -> tuple:
    ann = block.annotation
    layout = program_layout(prog)
    if side == "in":
        return lane_cells(layout, ann.batch_mem_in, ann.in_alloc_rule)
    return lane_cells(layout, ann.batch_mem_out, ann.out_alloc_rule)


def _cells(lanes) -> set:
    return {c for lane in lanes for c in lane}


def _parallel(prog, a, b) -> bool:
    """Blocks on disjoint lane ranges of the same buffers, not feeding each other."""
    x, y = a.annotation, b.annotation
    if (x.batch_mem_in, x.batch_mem_out) != (y.batch_mem_in, y.batch_mem_out):
        return False
    if x.batch_mem_in == x.batch_mem_out:
        return False
    if (x.in_size, x.out_size, x.n_actions) != (y.in_size, y.out_size, y.n_actions):
        return False
    ia, ib = _cells(_lanes(prog, a, "in")), _cells(_lanes(prog, b, "in"))
    oa, ob = _cells(_lanes(prog, a, "out")), _cells(_lanes(prog, b, "out"))
    return not (ia & ib) and not (oa & ob)


def plan(prog: AbkProgram) -> DecompositionPlan:
    """One sub-model per innermost annotated block, ordered by dataflow."""
    blocks = prog.leaf_blocks
    if not blocks:
        raise WiringError("program has no annotated block")
    members = tuple(lower(prog, b) for b in blocks)
    by_name = {m.name: m for m in members}
    # group parallel blocks (source order, greedy)
    groups: list = []
    for b in blocks:
        for g in groups:
            if all(_parallel(prog, b, other) for other in g):
                g.append(b)
                break
        else:
            groups.append([b])
    # dataflow order: a group reading a buffer follows the group that writes it
    ins = [g[0].annotation.batch_mem_in for g in groups]
    outs = [g[0].annotation.batch_mem_out for g in groups]
    preds = {k: {p for p in range(len(groups)) if p != k and outs[p] == ins[k] and p < k}
             for k in range(len(groups))}
    order: list = []
    while len(order) < len(groups):
        ready = [k for k in range(len(groups)) if k not in order and preds[k] <= set(order)]
        if not ready:
            raise WiringError("blocks form a dataflow cycle")
        order.append(ready[0])
    stages = [_fuse(prog, [by_name[b.name] for b in groups[k]]) for k in order]
    names = tuple(tuple(b.name for b in groups[k]) for k in order)
    wiring = []
    for k in range(len(order) - 1):
        p, c = groups[order[k]], groups[order[k + 1]]
        wiring.append(_wire(prog, p, c, stages[k], stages[k + 1]))
    return DecompositionPlan(tuple(stages), tuple(wiring), names, members, prog)


def _fuse(prog: AbkProgram, models: list) -> AcceleratorModel:
    """Parallel composition: lanes side by side, programs run one after the other."""
    if len(models) == 1:
        return models[0]
    program: list = []
    stages = []
    for m in models:
        lo = len(program)
        program.extend(map_instr(i, lambda k: k, lo) for i in m.program)
        stages.append((m.name, lo, len(program)))
    first = models[0]
    layout = MemoryLayout(
        first.layout.n_cells,
        tuple(lane for m in models for lane in m.layout.input_lanes),
        tuple(lane for m in models for lane in m.layout.output_lanes),
        first.layout.relevant, first.layout.has_action, first.layout.cell_names)
    return AcceleratorModel(
        name="|".join(m.name for m in models),
        batch_size=sum(m.batch_size for m in models),
        n_actions=first.n_actions, data_width=first.data_width,
        in_size=first.in_size, out_size=first.out_size, layout=layout,
        program=tuple(program), initial=first.initial, step_budget=first.step_budget,
        stages=tuple(stages), source=tuple(m.source for m in models))


def _wire(prog, producers: list, consumers: list, pm: AcceleratorModel,
          cm: AcceleratorModel) -> Wiring:
    pa, ca = producers[0].annotation, consumers[0].annotation
    where = f"{pm.name} -> {cm.name}"
    if ca.batch_mem_in != pa.batch_mem_out:
        raise WiringError(f"{where}: consumer reads {ca.batch_mem_in}, producer writes "
                          f"{pa.batch_mem_out}")
    if ca.in_size != pa.out_size:
        raise WiringError(f"{where}: %IN_SIZE {ca.in_size} differs from %OUT_SIZE {pa.out_size}")
    if cm.batch_size != pm.batch_size:
        raise WiringError(f"{where}: batch sizes differ ({pm.batch_size} vs {cm.batch_size})")
    out_lanes = [lane for b in producers for lane in _lanes(prog, b, "out")]
    in_lanes = [lane for b in consumers for lane in _lanes(prog, b, "in")]
    if out_lanes != in_lanes:
        raise WiringError(f"{where}: alloc rules place lanes of {ca.batch_mem_in} differently")
    return Wiring(pm.name, cm.name, ca.batch_mem_in, alpha_for(prog, consumers, cm))


def alpha_for(prog: AbkProgram, consumers: list, cm: AcceleratorModel) -> AlphaMap:
    """Identity, or a swap of buffer and staging cells for staged consumers.

    A consumer that updates its own input buffer reads its inputs from staging
    cells and copies them into the buffer at entry; alpha moves the producer's
    output words into those staging cells so that the entry copy restores them.
    """
    layout = program_layout(prog)
    pairs = []
    for b in consumers:
        staged = layout.staging.get(b.name)
        if not staged:
            continue
        for base, stage in zip(_lanes(prog, b, "in"), staged):
            for c, s in zip(base, stage):
                pairs += [(s, c), (c, s)]
    return AlphaMap.from_pairs(cm.layout.n_cells, pairs) if pairs \
        else AlphaMap.identity(cm.layout.n_cells)


# composability -------------------------------------------------------------------
def condition_holds(cond: str, m1: AcceleratorModel, m2: AcceleratorModel,
                    alpha: AlphaMap) -> bool:
    if cond == "i":
        return m1.batch_size == m2.batch_size
    if cond == "ii":
        return m1.data_width == m2.data_width and \
            [len(x) for x in m1.layout.output_lanes] == [len(x) for x in m2.layout.input_lanes]
    if cond == "iii":
        # composition renames control states apart by offsetting program counters
        return len(m1.program) >= 1 and len(m2.program) >= 1
    if cond == "iv":
        return tuple(m1.layout.relevant) == tuple(m2.layout.relevant) and \
            all(alpha.perm[c] == c for c in m1.layout.relevant)
    if cond == "v":
        if not alpha.is_bijection() or m1.layout.n_cells != m2.layout.n_cells:
            return False
        # out1 lands on in2 lane by lane; in1 ends up non-relevant in the consumer
        lanes_ok = all(alpha.perm[c2] == c1
                       for l1, l2 in zip(m1.layout.output_lanes, m2.layout.input_lanes)
                       for c1, c2 in zip(l1, l2))
        landed = alpha.image(m1.layout.input_cells)
        return lanes_ok and not landed & (set(m2.layout.output_cells) | set(m2.layout.relevant)
                                          | set(m2.layout.input_cells))
    raise ValueError(f"unknown condition {cond!r}")


def violated_conditions(m1, m2, alpha: AlphaMap) -> list:
    return [c for c in CONDITIONS if not condition_holds(c, m1, m2, alpha)]


def check_composable(m1, m2, alpha: AlphaMap) -> None:
    bad = violated_conditions(m1, m2, alpha)
    if bad:
        c = bad[0]
        raise ComposabilityError(c, f"{m1.name} and {m2.name}: condition ({c}) "
                                    f"{CONDITIONS[c]} fails")


# composition -----------------------------------------------------------------------
def compose_pair(m1: AcceleratorModel, m2: AcceleratorModel, alpha: AlphaMap) -> AcceleratorModel:
    """m2 after m1: run m1 to its final state, apply alpha, enter m2's initial state."""
    check_composable(m1, m2, alpha)
    step = Nop("alpha: identity") if alpha.is_identity else alpha.as_copy()
    first = list(m1.program)
    shift = len(first) + 1
    program = first + [step] + [map_instr(i, lambda k: k, shift) for i in m2.program]
    stages = list(m1.stages or [(m1.name, 0, len(first))])
    stages.append(("alpha", len(first), shift))
    stages += [(o, lo + shift, hi + shift) for o, lo, hi in (m2.stages or [(m2.name, 0, len(m2.program))])]
    layout = MemoryLayout(m1.layout.n_cells, m1.layout.input_lanes, m2.layout.output_lanes,
                          m1.layout.relevant, m1.layout.has_action, m1.layout.cell_names)
    return AcceleratorModel(
        name=f"{m2.name}∘{m1.name}", batch_size=m1.batch_size, n_actions=m1.n_actions,
        data_width=m1.data_width, in_size=m1.in_size, out_size=m2.out_size, layout=layout,
        program=tuple(program), initial=m1.initial, step_budget=m1.step_budget,
        stages=tuple(stages), source=(m1.source, m2.source))


def compose(p: DecompositionPlan) -> AcceleratorModel:
    model = p.models[0]
    for w, nxt in zip(p.wiring, p.models[1:]):
        model = compose_pair(model, nxt, w.alpha)
    return model


# reference execution -----------------------------------------------------------------
def direct_outputs(prog: AbkProgram, model: AcceleratorModel, memory, batch: InputBatch) -> tuple:
    """Outputs of interpreting the whole program on the same initial memory and batch.

    `model` supplies the input and output cells; inputs that the model reads
    from staging cells are placed in the buffer cells they stand for.
    """
    layout = program_layout(prog)
    mem = list(model.with_inputs(memory, batch))
    staged = {}
    for block in prog.leaf_blocks:
        cells = layout.staging.get(block.name)
        if cells:
            for base, stage in zip(_lanes(prog, block, "in"), cells):
                staged.update(zip(stage, base))
    for s, c in staged.items():
        if s in model.layout.input_cells:
            mem[c] = mem[s]
    env = {name: [mem[layout.base[name] + k] for k in range(size)]
           for name, size in layout.sizes.items() if name in prog.decls}
    interpret(prog, env, budget=model.step_budget)
    flat = list(mem)
    for name in prog.decls:
        for k, v in enumerate(env[name]):
            flat[layout.base[name] + k] = v
    return model.out(flat)


def composed_spec(prog: AbkProgram, p: DecompositionPlan) -> SpecOracle:
    """Reference function of a chain of stages: each stage's spec fed by the previous one.

    Needs one block per stage, each with a ``%SPEC``.  All stages share the
    relevant cells, so every stage sees the same relevant-state tuple.
    """
    if len(p.members) != len(p.models):
        raise SpecError("composed specs need one block per stage")
    stages = [spec_from_block(prog, m.source.name, m) for m in p.models]

    def fn(action, data, rel):
        for spec in stages:
            data = spec(action, data, rel)
        return data

    return spec_from_callback("∘".join(reversed([m.name for m in p.models])), fn,
                              p.models[-1].out_size, prog.width)
