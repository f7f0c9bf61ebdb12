"""Command-line entry point: `aqed2 check|rb|plan|replay|corpus ...`.

Exit status: 0 when every decided obligation is UNSAT, 1 when any is SAT,
2 on a tool error (bad input, bad configuration), 3 when nothing is SAT but
some obligation ran out of budget.
"""
from __future__ import annotations

import argparse
import json
import logging
import re
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .abk import parse
from .abk.ssa import unroll_and_ssa
from .corpus import BugClass, default_corpus, generate, label, load_manifest, run_case, \
    shipped_manifest, write_manifest
from .decompose import compose, plan
from .drb import DEFAULT_DELTA, DEFAULT_WINDOW, WindowState, slide, window_to_submodel
from .engine.check import Budget
from .errors import AqedError, ConfigError, ReplayMismatch
from .model import MemoryPredicate
from .monitor import replay_monitor
from .obligations import (CounterexampleTrace, Mode, Policy, build_fc, build_intra_fc, build_rb,
                          build_sac, build_strong_fc, replay, spec_from_block)
from .report import check_report, corpus_report, error_report, rb_report, write_report
from .suite import DEFAULT_FC_BOUND, MODES, CheckOutcome, checks_for, run_check, summarize

log = logging.getLogger("aqed2")

EXIT_UNSAT, EXIT_SAT, EXIT_ERROR, EXIT_UNKNOWN = 0, 1, 2, 3


@dataclass
class RunConfig:
    inputs: list
    modes: tuple = MODES
    backend: str = "sat"
    policy: Policy = Policy.SYMBOLIC
    width: int | None = None
    defines: dict = field(default_factory=dict)
    assume: dict = field(default_factory=dict)
    fc_bound: int = DEFAULT_FC_BOUND
    sac_lanes: list | None = None
    composed: bool = False
    rb_mode: bool = False
    bound: int = 0
    delta: int = DEFAULT_DELTA
    window: int = DEFAULT_WINDOW
    budget: Budget = field(default_factory=Budget)
    jobs: int = 1
    report: str | None = None
    trace_dir: str | None = None
    dimacs_dir: str | None = None
    quiet: bool = False

    def __post_init__(self):
        if self.backend not in ("sat", "oracle"):
            raise ConfigError(f"unknown backend {self.backend!r}")
        if self.jobs < 1:
            raise ConfigError("--jobs must be at least 1")
        if self.fc_bound < 1:
            raise ConfigError("--fc-bound must be at least 1")
        if self.policy == Policy.CONSTRAINED and not self.assume:
            raise ConfigError("the constrained policy needs at least one --assume NAME=VALUE")

    def to_dict(self) -> dict:
        return {"modes": list(self.modes), "backend": self.backend, "policy": self.policy.value,
                "width": self.width, "defines": self.defines, "assume": self.assume,
                "fc_bound": self.fc_bound, "bound": self.bound, "delta": self.delta,
                "window": self.window, "jobs": self.jobs,
                "budget": {"seconds": self.budget.seconds, "conflicts": self.budget.conflicts}}


def _pairs(items, what: str) -> dict:
    out = {}
    for item in items or ():
        m = re.fullmatch(r"\s*([A-Za-z_][\w\[\]]*)\s*=\s*(-?\w+)\s*", item)
        if not m:
            raise ConfigError(f"malformed {what} {item!r}; expected NAME=VALUE")
        out[m.group(1)] = int(m.group(2), 0)
    return out


def load_program(path: str, cfg: RunConfig):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    return parse(text, rb_mode=cfg.rb_mode, width=cfg.width, defines=cfg.defines)


def constraint_for(model, assume: dict) -> MemoryPredicate | None:
    if not assume:
        return None
    names = {model.layout.name(c): c for c in range(model.layout.n_cells)}
    cells = {}
    for name, value in assume.items():
        if name not in names:
            raise ConfigError(f"--assume names unknown cell {name!r}")
        cells[names[name]] = value % (1 << model.data_width)
    return MemoryPredicate.fixed(cells)


def _slug(key: str) -> str:
    return re.sub(r"[^\w.-]+", "_", key)


def _run_one(args):
    return run_check(*args)


def run_checks(planned: list, cfg: RunConfig) -> list:
    jobs = []
    for pc in planned:
        dimacs = None
        if cfg.dimacs_dir and cfg.backend == "sat" and pc.obligation is not None:
            Path(cfg.dimacs_dir).mkdir(parents=True, exist_ok=True)
            dimacs = str(Path(cfg.dimacs_dir) / f"{_slug(pc.key)}.cnf")
        jobs.append((pc, cfg.backend, cfg.budget, None, dimacs))
    if cfg.jobs == 1 or len(jobs) < 2:
        return [_run_one(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
        return list(pool.map(_run_one, jobs))


def exit_status(verdicts) -> int:
    verdicts = set(verdicts)
    if "sat" in verdicts:
        return EXIT_SAT
    if "error" in verdicts:
        return EXIT_ERROR
    if verdicts & {"unknown", "cap"}:
        return EXIT_UNKNOWN
    return EXIT_UNSAT


def _say(cfg: RunConfig, text: str = "") -> None:
    if not cfg.quiet:
        print(text)


# check ---------------------------------------------------------------------------
def cmd_check(cfg: RunConfig) -> int:
    path = cfg.inputs[0]
    try:
        prog = load_program(path, cfg)
        p = plan(prog)
        targets = list(p.members)
        if cfg.composed and len(p.models) > 1:
            targets.append(compose(p))
        planned = []
        for m in targets:
            constraint = constraint_for(m, cfg.assume) if cfg.policy == Policy.CONSTRAINED else None
            planned += checks_for(prog, m, cfg.modes, cfg.policy, constraint, cfg.fc_bound,
                                  cfg.sac_lanes)
    except AqedError as exc:
        return _fail(cfg, "check", path, exc)
    _say(cfg, p.report().rstrip())
    outcomes = run_checks(planned, cfg)
    models = {m.name: m for m in targets}
    traces = _trace_files(cfg, path, outcomes)
    for o in outcomes:
        line = f"{o.check.key:<24} {o.verdict:<8} {o.seconds:8.3f}s"
        if o.detail:
            line += f"  ({o.detail})"
        elif o.result is not None and o.result.cause:
            line += f"  ({o.result.cause})"
        _say(cfg, line)
        if o.result is not None and o.result.trace is not None:
            _say(cfg, o.result.trace.format(models[o.check.model]).rstrip())
            if id(o) in traces:
                _say(cfg, f"  trace written to {traces[id(o)]}")
    summary = summarize(p.members, [o for o in outcomes if o.check.model in
                                    {m.name for m in p.members}])
    c = summary.to_dict()
    _say(cfg, f"T={c['T']} P={c['P']} C={c['C']} B={c['B']}")
    code = exit_status(o.verdict for o in outcomes)
    if cfg.report:
        rep = check_report(path, cfg.to_dict(), p, outcomes, code)
        for o, r in zip(outcomes, rep["results"]):
            if id(o) in traces:
                r["trace_file"] = traces[id(o)]
            if cfg.dimacs_dir and cfg.backend == "sat" and o.result is not None:
                r["dimacs_file"] = str(Path(cfg.dimacs_dir) / f"{_slug(o.check.key)}.cnf")
        write_report(rep, cfg.report)
    return code


def _trace_dir(cfg: RunConfig) -> Path | None:
    if cfg.trace_dir:
        return Path(cfg.trace_dir)
    if cfg.report:
        return Path(cfg.report).resolve().parent
    return None


def _trace_files(cfg: RunConfig, path: str, outcomes: list) -> dict:
    """Standalone replay files for every counterexample; {id(outcome): file}."""
    directory = _trace_dir(cfg)
    written = {}
    if directory is None:
        return written
    for o in outcomes:
        if o.result is None or o.result.trace is None:
            continue
        directory.mkdir(parents=True, exist_ok=True)
        target = directory / f"{Path(path).stem}-{_slug(o.check.key)}.trace.json"
        doc = {"source": str(Path(path).resolve()), "width": cfg.width, "defines": cfg.defines,
               "rb_mode": cfg.rb_mode, "model": o.check.model, "mode": o.check.mode,
               "lane": o.check.lane, "fc_bound": cfg.fc_bound,
               "trace": o.result.trace.to_dict()}
        target.write_text(json.dumps(doc, indent=1) + "\n")
        written[id(o)] = str(target)
    return written


def _fail(cfg: RunConfig, command: str, source: str, exc: AqedError) -> int:
    print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
    if cfg.report:
        write_report(error_report(command, source, exc), cfg.report)
    return EXIT_ERROR


# rb ------------------------------------------------------------------------------
def cmd_rb(cfg: RunConfig) -> int:
    path = cfg.inputs[0]
    try:
        if cfg.bound < 1:
            raise ConfigError("the RB bound --bound must be at least 1")
        ssa = unroll_and_ssa(load_program(path, cfg))

        def show(rec):
            _say(cfg, f"window {rec.checked[0]}-{rec.checked[1]} ({rec.phase.value}): "
                      f"{rec.verdict} {rec.seconds:.3f}s" + (f" ({rec.cause})" if rec.cause else ""))

        campaign = slide(ssa, cfg.bound, cfg.delta, cfg.window, cfg.budget, cfg.backend, show)
    except AqedError as exc:
        return _fail(cfg, "rb", path, exc)
    code = EXIT_SAT if campaign.failed else EXIT_UNSAT
    _say(cfg, f"{campaign.stop}: {len(campaign.covered())}/{campaign.lines} SSA lines covered")
    if campaign.failed:
        _say(cfg, campaign.failing.trace.format(campaign.window_model).rstrip())
        directory = _trace_dir(cfg)
        if directory is not None:
            directory.mkdir(parents=True, exist_ok=True)
            top, bottom = campaign.window_model.source
            target = directory / f"{Path(path).stem}-rb.trace.json"
            doc = {"source": str(Path(path).resolve()), "width": cfg.width,
                   "defines": cfg.defines, "rb_mode": cfg.rb_mode,
                   "model": campaign.window_model.name, "mode": "rb", "window": [top, bottom],
                   "bound": cfg.bound, "trace": campaign.failing.trace.to_dict()}
            target.write_text(json.dumps(doc, indent=1) + "\n")
            _say(cfg, f"  trace written to {target}")
    if cfg.report:
        write_report(rb_report(path, cfg.to_dict(), campaign, code), cfg.report)
    return code


# plan ----------------------------------------------------------------------------
def cmd_plan(cfg: RunConfig) -> int:
    path = cfg.inputs[0]
    try:
        p = plan(load_program(path, cfg))
    except AqedError as exc:
        return _fail(cfg, "plan", path, exc)
    print(p.report().rstrip())
    return EXIT_UNSAT


# replay --------------------------------------------------------------------------
def cmd_replay(trace_path: str) -> int:
    """Re-execute a trace file and, for FC-family traces, run the monitor on it."""
    try:
        doc = json.loads(Path(trace_path).read_text())
        cfg = RunConfig([doc["source"]], width=doc.get("width"), defines=doc.get("defines") or {},
                        rb_mode=doc.get("rb_mode", False))
        prog = load_program(doc["source"], cfg)
        stored = CounterexampleTrace.from_dict(doc["trace"])
        obl, model = _rebuild(prog, doc)
        trace = replay(obl, stored.witness)
    except ReplayMismatch as exc:
        print(f"replay mismatch: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (AqedError, OSError, KeyError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR
    print(trace.format(model).rstrip())
    if trace.mode.fc_family:
        verdict = replay_monitor(trace, model)
        print(f"monitor: fc_check={verdict.fc_check} dup_done={verdict.dup_done}")
    return EXIT_SAT


def _rebuild(prog, doc: dict):
    mode = Mode(doc["mode"])
    if mode == Mode.RB:
        top, bottom = doc["window"]
        model = window_to_submodel(unroll_and_ssa(prog), WindowState(top, bottom))
        return build_rb(model, doc["bound"]), model
    p = plan(prog)
    candidates = list(p.members) + ([compose(p)] if len(p.models) > 1 else [])
    model = next((m for m in candidates if m.name == doc["model"]), None)
    if model is None:
        raise ConfigError(f"no sub-model named {doc['model']!r} in {doc['source']}")
    if mode == Mode.FC:
        return build_fc(model, len(doc["trace"]["batches"][0]) - 1), model
    if mode == Mode.STRONG_FC:
        return build_strong_fc(model), model
    if mode == Mode.STRONG_FCD:
        return build_strong_fc(model, fcd=True), model
    if mode == Mode.INTRA_FC:
        return build_intra_fc(model), model
    spec = spec_from_block(prog, model.source.name, model)
    rows = getattr(model.source.annotation, "sac_rel", None) or None
    return build_sac(model, spec, doc["lane"], rows), model


# corpus --------------------------------------------------------------------------
def cmd_corpus_run(cfg: RunConfig, manifest: str | None) -> int:
    source = manifest or str(shipped_manifest())
    try:
        cases = load_manifest(source)
    except (OSError, KeyError, ValueError) as exc:
        return _fail(cfg, "corpus-run", source, ConfigError(f"bad manifest {source}: {exc}"))
    runs = []
    for case in cases:
        try:
            run = run_case(case, cfg.backend, cfg.budget, width=cfg.width)
        except AqedError as exc:
            return _fail(cfg, "corpus-run", source, exc)
        runs.append(run)
        status = "ok" if run.ok else "MISMATCH " + ", ".join(
            f"{k}: expected {e} got {g}" for k, e, g in run.mismatches)
        _say(cfg, f"{case.name:<32} {len(run.outcomes):3d} checks  rb={run.rb:<5}  {status}")
    bad = sum(1 for r in runs if not r.ok)
    _say(cfg, f"{len(runs) - bad}/{len(runs)} cases match their expected verdicts")
    code = EXIT_SAT if bad else EXIT_UNSAT
    if cfg.report:
        write_report(corpus_report(source, cfg.to_dict(), runs, code), cfg.report)
    return code


def cmd_corpus_generate(out: str, seeds, classes, batch: int, width: int) -> int:
    if seeds:
        cases = [generate(s, BugClass(c), batch, width) for c in classes for s in seeds]
    else:
        cases = default_corpus()
    for case in cases:
        label(case)
        sat = sorted(k for k, v in case.expected.items() if v == "sat")
        print(f"{case.name:<32} {len(sat)} violated: {', '.join(sat) or '-'}")
    path = write_manifest(cases, out)
    print(f"wrote {path}")
    return EXIT_UNSAT


# argument parsing ----------------------------------------------------------------
def _budget(args) -> Budget:
    env = Budget.from_env()
    return Budget(args.timeout if args.timeout is not None else env.seconds,
                  args.conflicts if args.conflicts is not None else env.conflicts)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="aqed2", description="Self-consistency checks for "
                                 "batch-mode accelerator kernels written in ABK.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--backend", choices=("sat", "oracle"), default="sat")
    common.add_argument("--width", type=int, help="override the data width")
    common.add_argument("--define", action="append", metavar="NAME=VALUE",
                        help="override a named constant, e.g. a batch size")
    common.add_argument("--timeout", type=float, help="seconds per obligation "
                        "(default: $AQED2_BUDGET_SECONDS)")
    common.add_argument("--conflicts", type=int, help="solver conflicts per obligation "
                        "(default: $AQED2_BUDGET_CONFLICTS)")
    common.add_argument("--report", help="write a JSON report here")
    common.add_argument("-q", "--quiet", action="store_true")

    c = sub.add_parser("check", parents=[common], help="run FC/SAC checks on every sub-model")
    c.add_argument("file")
    c.add_argument("--mode", action="append", choices=MODES,
                   help="repeatable; default is every mode")
    c.add_argument("--policy", choices=[p.value for p in Policy], default="symbolic")
    c.add_argument("--assume", action="append", metavar="NAME=VALUE",
                   help="pin a cell's initial value (constrained policy)")
    c.add_argument("--fc-bound", type=int, default=DEFAULT_FC_BOUND,
                   help="batches per run for the fc mode")
    c.add_argument("--lane", type=int, action="append", help="SAC lanes (default: all)")
    c.add_argument("--composed", action="store_true",
                   help="also check the composition of all stages")
    c.add_argument("--rb-mode", action="store_true", help="allow input-dependent loops")
    c.add_argument("--jobs", type=int, default=1, help="worker processes")
    c.add_argument("--trace-dir", help="directory for counterexample replay files "
                   "(default: next to --report)")
    c.add_argument("--dimacs", metavar="DIR", help="write each obligation's CNF here")

    r = sub.add_parser("rb", parents=[common], help="sliding-window responsiveness campaign")
    r.add_argument("file")
    r.add_argument("--bound", type=int, required=True, help="step bound n")
    r.add_argument("--delta", type=int, default=DEFAULT_DELTA)
    r.add_argument("--window", type=int, default=DEFAULT_WINDOW, help="initial window size")
    r.add_argument("--trace-dir")

    p = sub.add_parser("plan", parents=[common], help="show the sub-model decomposition")
    p.add_argument("file")
    p.add_argument("--rb-mode", action="store_true")

    rp = sub.add_parser("replay", help="re-execute a counterexample trace file")
    rp.add_argument("trace")

    co = sub.add_parser("corpus", help="labelled bug corpus")
    csub = co.add_subparsers(dest="corpus_command", required=True)
    cr = csub.add_parser("run", parents=[common], help="re-check every case of a manifest")
    cr.add_argument("--manifest", help="default: the shipped corpus")
    cg = csub.add_parser("generate", help="generate and label kernels with the oracle")
    cg.add_argument("--out", required=True)
    cg.add_argument("--seed", type=int, action="append")
    cg.add_argument("--class", dest="classes", action="append",
                    choices=[b.value for b in BugClass])
    cg.add_argument("--batch", type=int, default=4)
    cg.add_argument("--width", type=int, default=2)
    return ap


def config_from_args(args) -> RunConfig:
    policy = Policy(getattr(args, "policy", "symbolic"))
    assume = _pairs(getattr(args, "assume", None), "--assume")
    if assume and policy == Policy.SYMBOLIC:
        policy = Policy.CONSTRAINED
    return RunConfig(
        inputs=[getattr(args, "file", "")],
        modes=tuple(getattr(args, "mode", None) or MODES),
        backend=args.backend, policy=policy, width=args.width,
        defines=_pairs(args.define, "--define"), assume=assume,
        fc_bound=getattr(args, "fc_bound", DEFAULT_FC_BOUND),
        sac_lanes=getattr(args, "lane", None), composed=getattr(args, "composed", False),
        rb_mode=getattr(args, "rb_mode", False) or args.command == "rb",
        bound=getattr(args, "bound", 0), delta=getattr(args, "delta", DEFAULT_DELTA),
        window=getattr(args, "window", DEFAULT_WINDOW), budget=_budget(args),
        jobs=getattr(args, "jobs", 1), report=args.report,
        trace_dir=getattr(args, "trace_dir", None), dimacs_dir=getattr(args, "dimacs", None),
        quiet=args.quiet)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "replay":
        return cmd_replay(args.trace)
    if args.command == "corpus" and args.corpus_command == "generate":
        return cmd_corpus_generate(args.out, args.seed, args.classes or [b.value for b in BugClass],
                                   args.batch, args.width)
    try:
        cfg = config_from_args(args)
    except AqedError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR
    if args.command == "check":
        return cmd_check(cfg)
    if args.command == "rb":
        return cmd_rb(cfg)
    if args.command == "plan":
        return cmd_plan(cfg)
    return cmd_corpus_run(cfg, args.manifest)


if __name__ == "__main__":
    sys.exit(main())
