"""Executable batch-mode accelerator model: states, batches, runs, reachability."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .errors import AqedError, BatchSizeError, ExplosionCap, StepBudgetExceeded
from .program import Instr, exec_scalar, instr_writes

DEFAULT_STEP_BUDGET = 1 << 20


@dataclass(frozen=True)
class MemoryLayout:
    """Partition of a flat cell vector into input/output/relevant/non-relevant cells.

    ``input_lanes[x]`` lists the cells of lane x: the action cell first when
    ``has_action`` is set, then ``in_size`` data cells.
    """
    n_cells: int
    input_lanes: tuple
    output_lanes: tuple
    relevant: tuple
    has_action: bool = False
    cell_names: tuple = ()

    def __post_init__(self):
        seen = set()
        for cell in self.input_cells + self.output_cells + self.relevant:
            if not 0 <= cell < self.n_cells:
                raise ValueError(f"cell {cell} outside memory of {self.n_cells} cells")
            if cell in seen:
                raise ValueError(f"cell {self.name(cell)} belongs to two regions")
            seen.add(cell)

    @property
    def input_cells(self) -> tuple:
        return tuple(c for lane in self.input_lanes for c in lane)

    @property
    def output_cells(self) -> tuple:
        return tuple(c for lane in self.output_lanes for c in lane)

    @property
    def nonrelevant(self) -> tuple:
        used = set(self.input_cells) | set(self.output_cells) | set(self.relevant)
        return tuple(c for c in range(self.n_cells) if c not in used)

    def name(self, cell: int) -> str:
        if cell < len(self.cell_names):
            return self.cell_names[cell]
        return f"m{cell}"

    def region_of(self, cell: int) -> str:
        if cell in set(self.input_cells):
            return "in"
        if cell in set(self.output_cells):
            return "out"
        if cell in set(self.relevant):
            return "rel"
        return "nrel"


@dataclass(frozen=True)
class MemoryPredicate:
    """Set of allowed values for a subset of cells; other cells are unconstrained."""
    cells: tuple
    rows: frozenset

    def __call__(self, memory: Sequence[int]) -> bool:
        return tuple(memory[c] for c in self.cells) in self.rows

    @classmethod
    def fixed(cls, assignment: dict) -> "MemoryPredicate":
        cells = tuple(sorted(assignment))
        return cls(cells, frozenset({tuple(assignment[c] for c in cells)}))


@dataclass(frozen=True)
class MachineState:
    control: int
    memory: tuple


@dataclass(frozen=True)
class InputBatch:
    lanes: tuple  # of (action, data-tuple)

    @classmethod
    def of(cls, data: Iterable, actions: Iterable[int] | None = None) -> "InputBatch":
        data = [tuple(d) if isinstance(d, (tuple, list)) else (d,) for d in data]
        actions = list(actions) if actions is not None else [0] * len(data)
        return cls(tuple((a, d) for a, d in zip(actions, data)))

    def __len__(self):
        return len(self.lanes)


@dataclass(frozen=True, eq=False)
class AcceleratorModel:
    name: str
    batch_size: int
    n_actions: int
    data_width: int
    in_size: int
    out_size: int
    layout: MemoryLayout
    program: tuple
    initial: MemoryPredicate | None = None
    step_budget: int = DEFAULT_STEP_BUDGET
    stages: tuple = ()  # (owner name, first pc, end pc) for composed models
    source: object = None

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be at least 1")
        if not self.program:
            raise ValueError("a model needs at least one instruction")
        if len(self.layout.input_lanes) != self.batch_size:
            raise ValueError("input lane count differs from batch size")
        if len(self.layout.output_lanes) != self.batch_size:
            raise ValueError("output lane count differs from batch size")
        if self.layout.has_action != (self.n_actions > 1):
            raise ValueError("action cells exist exactly when there is more than one action")
        if self.n_actions > (1 << self.data_width):
            raise ValueError("action enumeration does not fit the cell width")

    # control states -------------------------------------------------------
    @property
    def output_width(self) -> int:
        return self.data_width

    @property
    def initial_control(self) -> int:
        return 0

    @property
    def final_control(self) -> int:
        return len(self.program)

    @property
    def control_states(self) -> tuple:
        return tuple(self.control_label(pc) for pc in range(len(self.program) + 1))

    def control_label(self, pc: int):
        for owner, lo, hi in self.stages:
            if lo <= pc < hi:
                return (owner, pc - lo)
        return (self.name, pc)

    @property
    def actions(self) -> range:
        return range(self.n_actions)

    # region projections -----------------------------------------------------
    def inp(self, memory: Sequence[int]) -> tuple:
        lanes = []
        for cells in self.layout.input_lanes:
            vals = [memory[c] for c in cells]
            if self.layout.has_action:
                lanes.append((vals[0], tuple(vals[1:])))
            else:
                lanes.append((0, tuple(vals)))
        return tuple(lanes)

    def out(self, memory: Sequence[int]) -> tuple:
        return tuple(tuple(memory[c] for c in cells) for cells in self.layout.output_lanes)

    def rel(self, memory: Sequence[int]) -> tuple:
        return tuple(memory[c] for c in self.layout.relevant)

    def nrel(self, memory: Sequence[int]) -> tuple:
        return tuple(memory[c] for c in self.layout.nonrelevant)

    def assemble(self, inp, out, rel, nrel) -> tuple:
        memory = [0] * self.layout.n_cells
        self._place_inputs(memory, InputBatch(tuple(inp)))
        for cells, words in zip(self.layout.output_lanes, out):
            for c, v in zip(cells, words):
                memory[c] = v
        for c, v in zip(self.layout.relevant, rel):
            memory[c] = v
        for c, v in zip(self.layout.nonrelevant, nrel):
            memory[c] = v
        return tuple(memory)

    def _place_inputs(self, memory: list, batch: InputBatch) -> None:
        if len(batch) != self.batch_size:
            raise BatchSizeError(f"batch of {len(batch)} lanes for a model with b={self.batch_size}")
        mask = (1 << self.data_width) - 1
        for cells, (action, data) in zip(self.layout.input_lanes, batch.lanes):
            if len(data) != self.in_size:
                raise BatchSizeError(f"lane with {len(data)} words, expected {self.in_size}")
            if not 0 <= action < self.n_actions:
                raise BatchSizeError(f"action {action} outside the enumeration")
            words = ((action,) if self.layout.has_action else ()) + tuple(data)
            for c, v in zip(cells, words):
                memory[c] = v & mask

    def with_inputs(self, memory: Sequence[int], batch: InputBatch) -> tuple:
        mem = list(memory)
        self._place_inputs(mem, batch)
        return tuple(mem)

    def initial_state(self, memory: Sequence[int] | None = None) -> MachineState:
        if memory is None:
            memory = (0,) * self.layout.n_cells
        return MachineState(0, tuple(memory))

    def step(self, state: MachineState) -> MachineState:
        """The transition function; final states are fixpoints."""
        if state.control == self.final_control:
            return state
        mem = list(state.memory)
        pc, writes = exec_scalar(self.program[state.control], state.control,
                                 mem.__getitem__, self.data_width)
        for k, v in writes:
            mem[k] = v
        return MachineState(pc, tuple(mem))

    def __repr__(self):
        return (f"AcceleratorModel({self.name!r}, b={self.batch_size}, |A|={self.n_actions}, "
                f"w={self.data_width}, cells={self.layout.n_cells}, instrs={len(self.program)})")


@dataclass
class Segment:
    """One batch run: the input-substituted initial state and per-step writes."""
    initial: MachineState
    deltas: list
    final: MachineState
    diagnostics: list = field(default_factory=list)

    def states(self) -> list:
        out = [self.initial]
        mem = list(self.initial.memory)
        for pc, writes in self.deltas:
            for k, v in writes:
                mem[k] = v
            out.append(MachineState(pc, tuple(mem)))
        return out

    @property
    def steps(self) -> int:
        return len(self.deltas)


@dataclass
class ExecutionTrace:
    segments: list

    @property
    def states(self) -> list:
        return [s for seg in self.segments for s in seg.states()]

    @property
    def initial_marks(self) -> tuple:
        marks, pos = [], 0
        for seg in self.segments:
            marks.append(pos)
            pos += seg.steps + 1
        return tuple(marks)

    @property
    def final_marks(self) -> tuple:
        marks, pos = [], 0
        for seg in self.segments:
            pos += seg.steps + 1
            marks.append(pos - 1)
        return tuple(marks)

    @property
    def initials(self) -> list:
        return [seg.initial for seg in self.segments]

    @property
    def finals(self) -> list:
        return [seg.final for seg in self.segments]

    @property
    def diagnostics(self) -> list:
        return [d for seg in self.segments for d in seg.diagnostics]

    def outputs(self, model: AcceleratorModel) -> list:
        return [model.out(seg.final.memory) for seg in self.segments]


def _run_segment(model: AcceleratorModel, memory: list, budget: int | None,
                 record: bool, debug: bool) -> Segment:
    start = MachineState(0, tuple(memory))
    prog = model.program
    final = len(prog)
    width = model.data_width
    budget = model.step_budget if budget is None else budget
    deltas: list = []
    diags: list = []
    oob = (lambda kind, cell: diags.append(("oob-" + kind, model.layout.name(cell))))
    read = memory.__getitem__
    if debug:
        inputs = set(model.layout.input_cells)
        outputs = set(model.layout.output_cells)
        written: set = set()

        def read(key):
            if key in outputs and key not in written:
                diags.append(("output-read-before-write", model.layout.name(key)))
            return memory[key]

    pc, steps = 0, 0
    while pc != final:
        if steps >= budget:
            raise StepBudgetExceeded(f"no final state within {budget} steps",
                                     steps, MachineState(pc, tuple(memory)))
        pc2, writes = exec_scalar(prog[pc], pc, read, width, oob)
        for k, v in writes:
            memory[k] = v
        if debug:
            for k, _ in writes:
                if k in inputs:
                    diags.append(("input-written", model.layout.name(k)))
                written.add(k)
        steps += 1
        if pc2 == 0:
            raise AqedError("initial control state recurred during a batch run")
        if record:
            deltas.append((pc2, tuple(writes)))
        pc = pc2
    return Segment(start, deltas, MachineState(final, tuple(memory)), diags)


def run_batch(model: AcceleratorModel, init: MachineState, batch: InputBatch, *,
              step_budget: int | None = None, debug: bool = False) -> ExecutionTrace:
    if init.control != model.initial_control:
        raise ValueError("run_batch must start at the initial control state")
    memory = list(model.with_inputs(init.memory, batch))
    return ExecutionTrace([_run_segment(model, memory, step_budget, True, debug)])


def run_sequence(model: AcceleratorModel, init: MachineState, batches: Sequence[InputBatch], *,
                 step_budget: int | None = None, debug: bool = False) -> ExecutionTrace:
    if init.control != model.initial_control:
        raise ValueError("run_sequence must start at the initial control state")
    segments = []
    memory = init.memory
    for batch in batches:
        seg = _run_segment(model, list(model.with_inputs(memory, batch)), step_budget, True, debug)
        segments.append(seg)
        memory = seg.final.memory
    return ExecutionTrace(segments)


def execute(model: AcceleratorModel, memory: Sequence[int], batch: InputBatch | None = None,
            step_budget: int | None = None) -> tuple:
    """Run one batch without recording; returns (final memory, step count)."""
    mem = list(model.with_inputs(memory, batch) if batch is not None else memory)
    seg = _run_segment(model, mem, step_budget, True, False)
    return seg.final.memory, seg.steps


def all_batches(model: AcceleratorModel) -> Iterable[InputBatch]:
    words = range(1 << model.data_width)
    lane_values = [(a, d) for a in range(model.n_actions)
                   for d in itertools.product(words, repeat=model.in_size)]
    for lanes in itertools.product(lane_values, repeat=model.batch_size):
        yield InputBatch(tuple(lanes))


def initial_memories(model: AcceleratorModel, cap: int = 1 << 20) -> list:
    """All memories in the allowed-initial set (input cells left at zero)."""
    pred = model.initial
    fixed_cells = set(pred.cells) if pred else set()
    inputs = set(model.layout.input_cells)
    free = [c for c in range(model.layout.n_cells) if c not in fixed_cells and c not in inputs]
    rows = sorted(pred.rows) if pred else [()]
    total = len(rows) * (1 << (model.data_width * len(free)))
    if total > cap:
        raise ExplosionCap(f"{total} initial memories exceed cap {cap}")
    result = []
    for row in rows:
        for vals in itertools.product(range(1 << model.data_width), repeat=len(free)):
            mem = [0] * model.layout.n_cells
            if pred:
                for c, v in zip(pred.cells, row):
                    mem[c] = v
            for c, v in zip(free, vals):
                mem[c] = v
            result.append(tuple(mem))
    return result


def enumerate_reachable(model: AcceleratorModel, depth: int, cap: int = 1 << 20) -> set:
    batches = list(all_batches(model))
    inputs = model.layout.input_cells
    n_in = 1 << (model.data_width * len(inputs))
    starts = initial_memories(model, cap)
    if len(starts) * n_in > cap:
        raise ExplosionCap(f"initial control states exceed cap {cap}")
    states: set = set()
    # S_CI itself includes every input value
    for mem in starts:
        for batch in batches:
            states.add(MachineState(0, model.with_inputs(mem, batch)))
    frontier = set(starts)
    seen_starts = set(frontier)
    for _ in range(depth):
        nxt = set()
        for mem in frontier:
            for batch in batches:
                seg = _run_segment(model, list(model.with_inputs(mem, batch)), None, True, False)
                for s in seg.states():
                    states.add(s)
                if len(states) > cap:
                    raise ExplosionCap(f"more than {cap} reachable states")
                cleared = list(seg.final.memory)
                for c in inputs:
                    cleared[c] = 0
                nxt.add(tuple(cleared))
        frontier = nxt - seen_starts
        seen_starts |= nxt
        if not frontier:
            break
    return states


def reachable_initial_memories(model: AcceleratorModel, depth: int, cap: int = 1 << 20) -> set:
    """Memories (input cells zeroed) from which a batch may start within `depth` batches."""
    inputs = model.layout.input_cells
    out = set()
    for s in enumerate_reachable(model, depth, cap):
        if s.control == 0:
            mem = list(s.memory)
            for c in inputs:
                mem[c] = 0
            out.add(tuple(mem))
    return out


def reachable_relevant(model: AcceleratorModel, depth: int, cap: int = 1 << 20) -> set:
    return {model.rel(m) for m in reachable_initial_memories(model, depth, cap)}


def written_cells(program: Iterable[Instr]) -> set:
    acc: set = set()
    for ins in program:
        acc.update(instr_writes(ins))
    return acc
