"""Generated ABK kernels with injected bugs and oracle-computed ground truth.

Every case is a one- or two-stage lane-wise kernel.  The base kernel depends
only on the seed; the bug class then edits one stage.  Expected verdicts are
never written by hand: `label` runs the exhaustive backend on every
obligation at the case's (small) width.
"""
from __future__ import annotations

import json
import random
import re
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from pathlib import Path

from .abk import parse
from .abk.ast import AbkProgram
from .abk.ssa import unroll_and_ssa
from .decompose import plan
from .drb import slide
from .engine.check import Budget
from .engine.exhaustive import Caps
from .suite import MODES, checks_for, run_check


class BugClass(Enum):
    NONE = "none"
    INDEXING = "indexing"
    INIT = "init"
    CROSS_LANE = "cross-lane"
    REL_MUTATION = "rel-mutation"
    CONSISTENT_WRONG = "consistent-wrong"
    UNRESPONSIVE = "unresponsive"


# lane functions: body template over {d} (the lane's data) and {k} (its key)
OPS = (
    "{d} ^ {k}",
    "{d} + {k}",
    "({d} ^ {k}) + 1",
    "{d} - {k}",
    "({d} + {k}) ^ ({d} >> 1)",
    "({d} & {k}) | ({d} ^ 1)",
)


@dataclass
class CorpusCase:
    name: str
    seed: int
    bug: BugClass
    batch: int
    width: int
    source: str
    edit: dict = field(default_factory=dict)
    expected: dict = field(default_factory=dict)  # "BLOCK/mode[@lane]" or "rb" -> verdict
    rb_bound: int = 0

    def program(self) -> AbkProgram:
        return parse(self.source, rb_mode=self.bug == BugClass.UNRESPONSIVE)

    def to_dict(self, source_file: str | None = None) -> dict:
        out = {"name": self.name, "seed": self.seed, "class": self.bug.value,
               "batch": self.batch, "width": self.width, "edit": self.edit,
               "rb_bound": self.rb_bound, "expected": self.expected}
        if source_file is None:
            out["source"] = self.source
        else:
            out["source_file"] = source_file
        return out

    @classmethod
    def from_dict(cls, d: dict, base: Path | None = None) -> "CorpusCase":
        if "source" in d:
            source = d["source"]
        else:
            source = ((base or Path(".")) / d["source_file"]).read_text()
        return cls(d["name"], d["seed"], BugClass(d["class"]), d["batch"], d["width"], source,
                   d.get("edit", {}), d.get("expected", {}), d.get("rb_bound", 0))


def _stage(name: str, src: str, dst: str, b: int, size: int, body: list, spec: str,
           rel: str) -> str:
    lines = [
        f"%IN_SIZE {size}",
        f"%IN_BATCH_SIZE {b}",
        f"%BATCH_MEM_IN {src}",
        f"%IN_ALLOC_RULE in(x) addr range = [x*{size} : x*{size} + {size}]",
        f"%REL {rel}",
        f"%SPEC {spec}",
        f"// ===ACC{name} START===",
        *body,
        f"// ===ACC{name} END===",
        "%OUT_SIZE 1",
        f"%OUT_BATCH_SIZE {b}",
        f"%BATCH_MEM_OUT {dst}",
        "%OUT_ALLOC_RULE out(x) addr range = [x : x + 1]",
    ]
    return "\n".join(lines)


def generate(seed: int, bug: BugClass | str, batch: int = 4, width: int = 2,
             in_size: int = 1) -> CorpusCase:
    """Deterministic kernel for `seed` with one bug of class `bug` injected."""
    bug = BugClass(bug)
    base = random.Random(seed)
    stages = base.choice((1, 2))
    ops = [base.choice(OPS) for _ in range(stages)]
    keys = [base.randrange(1 << width) for _ in range(stages)]
    in_place = base.random() < 0.5
    rng = random.Random(f"{seed}/{bug.value}")
    target = rng.randrange(stages)
    b, s = batch, in_size
    if bug in (BugClass.INDEXING, BugClass.INIT, BugClass.CROSS_LANE, BugClass.REL_MUTATION) \
            and b < 2:
        raise ValueError(f"{bug.value} bugs need at least two lanes")

    mid = "buf" if stages == 2 else "out"
    decls = [f"width {width};", f"var data[{b * s}];"]
    if stages == 2:
        decls.append(f"var buf[{b}];")
    if stages == 1 or not in_place:
        decls.append(f"var out[{b}];")
    for k, v in enumerate(keys):
        decls.append(f"var key{k + 1} = {v};")
    decls.append("var t;")

    blocks = []
    edit: dict = {"stage": f"ACC{target + 1}"}
    for k in range(stages):
        size = s if k == 0 else 1
        src = "data" if k == 0 else "buf"
        dst = mid if k == 0 else ("buf" if in_place else "out")
        key = f"key{k + 1}"
        if size == 1:
            lane = f"{src}[j]"
            spec_d = "d"
        else:
            lane = "(" + " ^ ".join(f"{src}[j*{size} + {w}]" for w in range(size)) + ")"
            spec_d = "(" + " ^ ".join(f"d[{w}]" for w in range(size)) + ")"
        op = ops[k]
        value = op.format(d=lane, k=key)
        spec = op.format(d=spec_d, k=key)
        lo, hi, store = "0", str(b), f"{dst}[j]"
        pre, post, extra, tail = [], [], [], []
        if k == target:
            if bug == BugClass.INDEXING:
                store = f"{dst}[(j + 1) % {b}]"
                edit["change"] = f"stores lane j into slot (j + 1) mod {b}"
            elif bug == BugClass.INIT:
                if rng.random() < 0.5:
                    lo = "1"
                    edit["change"] = "loop skips the first lane"
                else:
                    hi = str(b - 1)
                    edit["change"] = "loop skips the last lane"
            elif bug == BugClass.CROSS_LANE:
                if rng.random() < 0.5:
                    value = f"({value}) + ({src}[((j + 1) % {b})*{size}] & 1)"
                    edit["change"] = "adds the low bit of the next lane's data"
                else:
                    pre = ["t = 0;"]
                    extra = [f"t = t ^ {src}[j*{size}];"]
                    value = f"({value}) ^ (t & 1)"
                    edit["change"] = "mixes in a running xor shared by all lanes"
            elif bug == BugClass.REL_MUTATION:
                at = rng.randrange(b - 1)
                post = [f"{key} = {key} + (j == {at});"]
                edit["change"] = f"bumps {key} after lane {at}"
            elif bug == BugClass.CONSISTENT_WRONG:
                value = op.format(d=lane, k=f"({key} ^ 1)")
                edit["change"] = f"uses {key} ^ 1 instead of {key}"
            elif bug == BugClass.UNRESPONSIVE:
                magic = rng.randrange(1 << width)
                edit["change"] = f"spins while the first data word equals {magic}"
                tail = [f"while ({src}[0] == {magic}) {{ t = t + 1; }}"]
        body = list(pre)
        body.append(f"for j in {lo}..{hi} {{")
        body += ["    " + e for e in extra]
        body.append(f"    {store} = {value};")
        body += ["    " + p for p in post]
        body.append("}")
        body += tail
        blocks.append(_stage(str(k + 1), src, dst, b, size, body, spec, key))
    if bug == BugClass.NONE:
        edit = {}
    source = "\n".join(decls) + "\n\n" + "\n\n".join(blocks) + "\n"
    name = f"{bug.value}-s{seed}-b{b}-w{width}" + (f"-i{s}" if s != 1 else "")
    case = CorpusCase(name, seed, bug, b, width, source, edit)
    case.rb_bound = default_rb_bound(case.program())
    return case


def zero_initialized(source: str) -> str:
    """Give every declaration without an initializer the value 0.

    Leaves exactly one allowed initial memory, which keeps reachable-state
    enumeration small.
    """
    return re.sub(r"^(var [A-Za-z_]\w*(?:\[\d+\])*);", r"\1 = 0;", source, flags=re.M)


def default_rb_bound(prog: AbkProgram) -> int:
    """A bound every responsive straight-line program meets: twice its SSA length."""
    return 2 * len(unroll_and_ssa(prog)) + 8


def at_width(case: CorpusCase, width: int, batch: int | None = None) -> CorpusCase:
    """The same seed and bug class re-generated at another size (labels dropped)."""
    in_size = 2 if case.name.endswith("-i2") else 1
    return generate(case.seed, case.bug, case.batch if batch is None else batch, width, in_size)


def label(case: CorpusCase, caps: Caps | None = None, fc_bound: int = 2) -> dict:
    """Expected verdicts from the exhaustive backend."""
    prog = case.program()
    p = plan(prog)
    expected = {}
    for m in p.members:
        for pc in checks_for(prog, m, MODES, fc_bound=fc_bound):
            expected[pc.key] = run_check(pc, "oracle", caps=caps).verdict
    campaign = slide(unroll_and_ssa(prog), case.rb_bound, backend="oracle")
    expected["rb"] = "sat" if campaign.failed else "unsat"
    case.expected = expected
    return expected


# shipped corpus ------------------------------------------------------------------
def default_corpus() -> list:
    """Seeds and sizes of the shipped corpus (unlabelled)."""
    cases = []
    for bug in BugClass:
        for seed in (1, 2, 3):
            cases.append(generate(seed, bug, 4, 2))
        cases.append(generate(4, bug, 2, 3))
        cases.append(generate(5, bug, 2, 2, in_size=2))
    return cases


def write_manifest(cases, directory: str | Path) -> Path:
    directory = Path(directory)
    (directory / "kernels").mkdir(parents=True, exist_ok=True)
    entries = []
    for c in cases:
        rel = f"kernels/{c.name}.abk"
        (directory / rel).write_text(c.source)
        entries.append(c.to_dict(rel))
    path = directory / "manifest.json"
    path.write_text(json.dumps({"version": 1, "cases": entries}, indent=1, sort_keys=True) + "\n")
    return path


def load_manifest(path: str | Path) -> list:
    path = Path(path)
    data = json.loads(path.read_text())
    return [CorpusCase.from_dict(d, path.parent) for d in data["cases"]]


def shipped_manifest() -> Path:
    return Path(str(resources.files("aqed2") / "data" / "corpus" / "manifest.json"))


def aes_style_source() -> str:
    return (resources.files("aqed2") / "data" / "aes_style.abk").read_text()


@dataclass
class CaseRun:
    case: CorpusCase
    outcomes: list
    rb: str
    mismatches: list

    @property
    def ok(self) -> bool:
        return not self.mismatches


def run_case(case: CorpusCase, backend: str = "sat", budget: Budget | None = None,
             caps: Caps | None = None, width: int | None = None) -> CaseRun:
    """Re-check a case and compare with its expected verdicts.

    Only sat/unsat expectations are compared; a different `width` re-generates
    the kernel and compares verdict classes (the bug does not depend on width).
    """
    target = case if width is None or width == case.width else at_width(case, width)
    prog = target.program()
    p = plan(prog)
    outcomes = []
    for m in p.members:
        for pc in checks_for(prog, m, MODES):
            if case.expected.get(pc.key) in ("sat", "unsat"):
                outcomes.append(run_check(pc, backend, budget, caps))
    campaign = slide(unroll_and_ssa(prog), target.rb_bound, budget=budget, backend=backend)
    rb = "sat" if campaign.failed else "unsat"
    mismatches = [(o.check.key, case.expected[o.check.key], o.verdict) for o in outcomes
                  if o.verdict != case.expected[o.check.key]]
    if case.expected.get("rb") in ("sat", "unsat") and rb != case.expected["rb"]:
        mismatches.append(("rb", case.expected["rb"], rb))
    return CaseRun(target, outcomes, rb, mismatches)
