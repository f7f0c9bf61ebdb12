from __future__ import annotations

import random

import pytest

from aqed2.abk import interpret, interpret_ssa, lower, parse, program_layout, unroll_and_ssa
from aqed2.corpus import aes_style_source, generate
from aqed2.errors import AbkSyntaxError, AnnotationError, BoundError, RegionError
from aqed2.model import InputBatch, execute
from aqed2.program import Copy, is_straight_line

KERNEL = """\
width 4;
var data[4];
var out[4];
var key = 3;

%IN_SIZE 1
%IN_BATCH_SIZE 4
%BATCH_MEM_IN data
%IN_ALLOC_RULE in(x) addr range = [x : x + 1]
%REL key
%SPEC d ^ key
// ===ACC1 START===
for j in 0..4 {
    out[j] = data[j] ^ key;
}
// ===ACC1 END===
%OUT_SIZE 1
%OUT_BATCH_SIZE 4
%BATCH_MEM_OUT out
%OUT_ALLOC_RULE out(x) addr range = [x : x + 1]
"""


def test_annotations_parse():
    prog = parse(KERNEL)
    (block,) = prog.blocks
    ann = block.annotation
    assert block.name == "ACC1"
    assert (ann.in_size, ann.in_batch_size, ann.batch_mem_in) == (1, 4, "data")
    assert (ann.out_size, ann.out_batch_size, ann.batch_mem_out) == (1, 4, "out")
    assert ann.in_alloc_rule.lanes == ((0,), (1,), (2,), (3,))
    assert ann.missing() == []


def test_lowered_model_regions():
    prog = parse(KERNEL)
    m = lower(prog, "ACC1")
    names = m.layout.cell_names
    assert m.batch_size == 4 and m.data_width == 4
    assert [names[c] for c in m.layout.input_cells] == ["data[0]", "data[1]", "data[2]", "data[3]"]
    assert [names[c] for c in m.layout.output_cells] == ["out[0]", "out[1]", "out[2]", "out[3]"]
    assert [names[c] for c in m.layout.relevant] == ["key"]
    assert is_straight_line(m.program)


def test_lowering_agrees_with_interpreter():
    rng = random.Random(0)
    for seed in range(1, 6):
        case = generate(seed, "none", 4, 3)
        prog = case.program()
        layout = program_layout(prog)
        for block in prog.leaf_blocks:
            m = lower(prog, block)
            for _ in range(20):
                mem = [rng.randrange(8) for _ in range(layout.n_cells)]
                batch = InputBatch.of([[rng.randrange(8) for _ in range(m.in_size)]
                                       for _ in range(m.batch_size)])
                final, _ = execute(m, mem, batch)
                start = list(m.with_inputs(mem, batch))
                if isinstance(m.program[0], Copy):  # staged input: interpreter sees the buffer
                    for d, s in zip(m.program[0].dsts, m.program[0].srcs):
                        start[d] = start[s]
                env = {n: [start[layout.base[n] + k] for k in range(layout.sizes[n])]
                       for n in prog.decls}
                interpret(prog, env, block.body)
                for n in prog.decls:
                    for k, v in enumerate(env[n]):
                        assert final[layout.base[n] + k] == v, (case.name, n, k)


def test_ssa_single_assignment_and_semantics():
    case = generate(2, "none", 4, 3)
    prog = case.program()
    ssa = unroll_and_ssa(prog)
    defs = ssa.defs()
    assert all(len(lines) == 1 for lines in defs.values())
    rng = random.Random(1)
    for _ in range(20):
        env = {n: [rng.randrange(8) for _ in range(d.size)] for n, d in prog.decls.items()}
        flat = {}
        for n, vals in env.items():
            if prog.decls[n].dims:
                for k, v in enumerate(vals):
                    flat[f"{n}[{k}]"] = v
            else:
                flat[n] = vals[0]
        got = interpret_ssa(ssa, flat)
        interpret(prog, env)
        for n, vals in env.items():
            for k, v in enumerate(vals):
                key = f"{n}[{k}]" if prog.decls[n].dims else n
                assert got[key] == v


def test_while_needs_rb_mode():
    src = "width 2;\nvar x;\nwhile (x == 1) { x = x + 1; }\n"
    with pytest.raises(BoundError, match="RB mode"):
        parse(src)
    ssa = unroll_and_ssa(parse(src, rb_mode=True))
    assert len(ssa.loops) == 1


def test_syntax_error_reports_position():
    with pytest.raises(AbkSyntaxError) as exc:
        parse("width 2;\nvar x;\nx = (x + ;\n")
    assert exc.value.line == 3


def test_missing_annotation_is_reported():
    src = KERNEL.replace("%OUT_ALLOC_RULE out(x) addr range = [x : x + 1]\n", "")
    with pytest.raises(AnnotationError, match="OUT_ALLOC_RULE"):
        lower(parse(src), "ACC1")


def test_relevant_state_may_not_alias_outputs():
    src = KERNEL.replace("%REL key", "%REL out[0]")
    with pytest.raises(RegionError):
        lower(parse(src), "ACC1")


def test_width_and_constant_overrides():
    assert parse(KERNEL, width=8).width == 8
    with pytest.raises(BoundError):
        parse(KERNEL, width=0)
    prog = parse(aes_style_source(), defines={"BS": 64})
    assert prog.consts["BS"] == 64 and prog.consts["US"] == 32
    with pytest.raises(AnnotationError):
        parse(KERNEL, defines={"NOPE": 1})


def test_aes_style_lanes():
    prog = parse(aes_style_source())
    acc1 = prog.block("ACC1").annotation
    assert acc1.in_batch_size == 256 and acc1.in_size == 16
    lanes = acc1.in_alloc_rule.lanes
    assert lanes[0] == tuple(range(16)) and lanes[255][-1] == 4095
    assert len({c for lane in lanes for c in lane}) == 4096


def test_directive_value_may_continue_on_next_line():
    src = KERNEL.replace("%IN_ALLOC_RULE in(x) addr range = [x : x + 1]",
                         "%IN_ALLOC_RULE in(x) addr range =\n    [x :\n     x + 1]")
    assert parse(src).blocks[0].annotation.in_alloc_rule.lanes[3] == (3,)
