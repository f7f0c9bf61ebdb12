"""Concrete replay harness modelled on the generic dFC monitor module.

The monitor sees the serialized input stream (one entry per lane, laid out
by the alloc rules), labels one `orig` and one `dup` lane whose inputs match,
captures the orig output and compares it with the dup output.  It is used to
confirm every FC-family counterexample independently of the encoders.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from .model import AcceleratorModel, MachineState, run_batch


@dataclass
class MonitorVerdict:
    dup_done: int
    fc_check: int
    log: list = field(default_factory=list)


@dataclass
class Monitor:
    in_size: int
    out_size: int
    orig_val: list = field(default_factory=list)
    orig_out: list = field(default_factory=list)
    orig_labeled: int = 0
    dup_labeled: int = 0
    in_ct: int = 0
    out_ct: int = 0
    orig_idx: int = 0
    dup_idx: int = 0
    dup_done: int = 0
    fc_check: int = 0
    log: list = field(default_factory=list)

    def __post_init__(self):
        self.orig_val = [0] * self.in_size
        self.orig_out = [0] * self.out_size

    def aqed_in(self, word: Sequence[int], orig: int, dup: int) -> None:
        label_orig = orig and not self.orig_labeled
        match = all(a == b for a, b in zip(word, self.orig_val))
        label_dup = dup and not self.dup_labeled and self.orig_labeled and match
        if label_orig:
            self.orig_labeled = 1
            self.orig_idx = self.in_ct
            self.orig_val = list(word)
            self.log.append(f"in {self.in_ct}: orig labeled {list(word)}")
        if label_dup:
            self.dup_labeled = 1
            self.dup_idx = self.in_ct
            self.log.append(f"in {self.in_ct}: dup labeled {list(word)}")
        self.in_ct += 1

    def aqed_out(self, word: Sequence[int]) -> tuple:
        if self.orig_labeled and self.out_ct == self.orig_idx and not self.dup_done:
            self.orig_out = list(word)
            self.log.append(f"out {self.out_ct}: orig output {list(word)}")
        if self.orig_labeled and self.dup_labeled and self.out_ct == self.dup_idx \
                and not self.dup_done:
            self.dup_done = 1
            # any differing word flags the violation
            self.fc_check = int(any(a != b for a, b in zip(self.orig_out, word)))
            self.log.append(f"out {self.out_ct}: dup output {list(word)} fc_check={self.fc_check}")
        if self.out_ct > self.dup_idx and not self.dup_done:
            self.dup_done = 1
            self.log.append(f"out {self.out_ct}: passed dup index {self.dup_idx}, done")
        self.out_ct += 1
        return self.dup_done, self.fc_check


def run_monitor(in_seq: Sequence, out_seq: Sequence, orig_pos: int, dup_pos: int) -> MonitorVerdict:
    """Feed a serialized run through the monitor with the given orig/dup stream positions."""
    in_size = len(in_seq[0]) if in_seq else 0
    out_size = len(out_seq[0]) if out_seq else 0
    mon = Monitor(in_size, out_size)
    for k, word in enumerate(in_seq):
        mon.aqed_in(word, int(k == orig_pos), int(k == dup_pos))
    for word in out_seq:
        mon.aqed_out(word)
    return MonitorVerdict(mon.dup_done, mon.fc_check, mon.log)


def serialize_inputs(model: AcceleratorModel, memory) -> list:
    """Parallel-to-serial conversion of the input region, one entry per lane."""
    return [((a,) if model.layout.has_action else ()) + tuple(d) for a, d in model.inp(memory)]


def serialize_outputs(model: AcceleratorModel, memory, extra: tuple = ()) -> list:
    return [tuple(o) + tuple(extra) for o in model.out(memory)]


def replay_monitor(trace, model: AcceleratorModel) -> MonitorVerdict:
    """Run the monitor on an FC-family counterexample trace."""
    from .obligations import Mode

    b = model.batch_size
    in_seq: list = []
    out_seq: list = []
    fcd = trace.mode == Mode.STRONG_FCD
    for run in trace.traces:
        for seg in run.segments:
            in_seq.extend(serialize_inputs(model, seg.initial.memory))
            extra = model.rel(seg.final.memory) if fcd else ()
            out_seq.extend(serialize_outputs(model, seg.final.memory, extra))
    lanes = trace.witness.lanes
    if trace.mode == Mode.FC:
        i, j, j2 = lanes
        n = len(trace.traces[0].segments) - 1
        a, c = i * b + j, n * b + j2
    elif trace.mode in (Mode.STRONG_FC, Mode.STRONG_FCD):
        j, j2 = lanes
        a, c = j, b + j2
    elif trace.mode == Mode.INTRA_FC:
        a, c = lanes
    else:
        raise ValueError(f"the monitor replays FC-family traces, not {trace.mode.value}")
    return run_monitor(in_seq, out_seq, min(a, c), max(a, c))


def monitor_batch(model: AcceleratorModel, memory, batch, orig: int, dup: int) -> MonitorVerdict:
    """Run one batch and monitor lanes `orig` < `dup`."""
    run = run_batch(model, MachineState(0, tuple(memory)), batch)
    seg = run.segments[0]
    return run_monitor(serialize_inputs(model, seg.initial.memory),
                       serialize_outputs(model, seg.final.memory), orig, dup)
