"""Greedy shrinking of counterexamples with the concrete interpreter."""
from __future__ import annotations

from ..model import InputBatch
from ..obligations import CheckObligation, CounterexampleTrace, Witness, evaluate, replay


def _candidates(v: int) -> list:
    """Smaller values to try for one word, most aggressive first."""
    out = [0]
    for bit in range(v.bit_length() - 1, -1, -1):
        if v >> bit & 1:
            out.append(v & ~(1 << bit))
    return [c for c in out if c < v]


def _with_memory(w: Witness, copy: int, cell: int, value: int) -> Witness:
    mems = list(w.memories)
    mem = list(mems[copy])
    mem[cell] = value
    mems[copy] = tuple(mem)
    return Witness(tuple(mems), w.batches, w.lanes)


def _with_input(w: Witness, copy: int, batch: int, lane: int, pos: int, value: int) -> Witness:
    allb = [list(bs) for bs in w.batches]
    lanes = list(allb[copy][batch].lanes)
    action, data = lanes[lane]
    if pos < 0:
        action = value
    else:
        data = data[:pos] + (value,) + data[pos + 1:]
    lanes[lane] = (action, data)
    allb[copy][batch] = InputBatch(tuple(lanes))
    return Witness(w.memories, tuple(tuple(bs) for bs in allb), w.lanes)


def _try_input(w: Witness, c, k, x, p, value, still):
    """Shrink one input word, alone or together with lanes that carry equal inputs."""
    nw = _with_input(w, c, k, x, p, value)
    if still(nw):
        return nw
    lane = w.batches[c][k].lanes[x]
    for c2, bs in enumerate(w.batches):
        for k2, batch in enumerate(bs):
            for x2, other in enumerate(batch.lanes):
                if (c2, k2, x2) != (c, k, x) and other == lane:
                    nw2 = _with_input(nw, c2, k2, x2, p, value)
                    if still(nw2):
                        return nw2
    return None


def minimize(trace: CounterexampleTrace, obl: CheckObligation) -> CounterexampleTrace:
    """Zero and shrink witness words while the violation persists (a fixpoint)."""
    m = obl.model
    w = trace.witness
    inputs = set(m.layout.input_cells)

    def still(cand: Witness) -> bool:
        return evaluate(obl, cand).violated

    def input_sites(w):
        for c, bs in enumerate(w.batches):
            for k, batch in enumerate(bs):
                for x, (action, data) in enumerate(batch.lanes):
                    if m.layout.has_action:
                        yield c, k, x, -1, action
                    for p, v in enumerate(data):
                        yield c, k, x, p, v

    changed = True
    while changed:
        changed = False
        for c, mem in enumerate(w.memories):
            for cell, v in enumerate(mem):
                if cell in inputs or v == 0:
                    continue
                for cand in _candidates(v):
                    nw = _with_memory(w, c, cell, cand)
                    if still(nw):
                        w, changed = nw, True
                        break
        for c, k, x, p, _ in list(input_sites(w)):
            action, data = w.batches[c][k].lanes[x]
            v = action if p < 0 else data[p]
            for cand in _candidates(v):
                nw = _try_input(w, c, k, x, p, cand, still)
                if nw is not None:
                    w, changed = nw, True
                    break
    if w == trace.witness:
        return trace
    return replay(obl, w)
