"""Tour of the checker on a shipped kernel, an injected bug and a spin loop.

Run with `python demos/walkthrough.py`.
"""
from __future__ import annotations

from aqed2.abk import parse, unroll_and_ssa
from aqed2.corpus import aes_style_source, generate
from aqed2.decompose import compose, plan
from aqed2.drb import slide
from aqed2.suite import checks_for, run_check, summarize


def show_plan(title: str, prog) -> None:
    p = plan(prog)
    print(f"== {title}")
    for stage, names in zip(p.models, p.parallel_groups):
        print(f"  stage {stage.name}: lanes={stage.batch_size} words in={stage.in_size} "
              f"out={stage.out_size} blocks={','.join(names)}")
    for w in p.wiring:
        kind = "identity" if w.alpha.is_identity else "staging swap"
        print(f"  {w.producer} -> {w.consumer} via {w.buffer} ({kind} alpha)")


def run_all(prog) -> None:
    p = plan(prog)
    outcomes = []
    for m in p.members:
        for pc in checks_for(prog, m):
            o = run_check(pc)
            outcomes.append(o)
            print(f"  {pc.key:<22} {o.verdict}")
            if o.verdict == "sat" and pc.mode == "intra-fc":
                print("    " + o.result.trace.format(m).rstrip().replace("\n", "\n    "))
    s = summarize(p.members, outcomes)
    print(f"  T={s.total} P={s.parallel} C={s.completed} B={s.buggy}")


def main() -> None:
    aes = parse(aes_style_source(), defines={"BS": 64})
    show_plan("AES-style pipeline (buffer shrunk to 64 words)", aes)
    print(f"  composed program: {len(compose(plan(aes)).program)} steps")

    case = generate(1, "cross-lane", 4, 2)
    print(f"\n== {case.name}: {case.edit['change']}")
    run_all(case.program())

    spin = generate(1, "unresponsive", 4, 2)
    print(f"\n== {spin.name}: {spin.edit['change']}")
    campaign = slide(unroll_and_ssa(spin.program()), spin.rb_bound)
    for r in campaign.history:
        print(f"  window {r.checked}: {r.verdict}")
    print(f"  stopped: {campaign.stop}")


if __name__ == "__main__":
    main()
