"""Command-line experiment runner: simulate, sweep, optimize."""

from __future__ import annotations

import argparse
import csv
import io
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from .analyzer import AGGREGATE_FIELDS, aggregate_replications, aggregate_row, compute_objectives, packets_csv
from .engine import make_sources, run
from .model import ConfigError, DensityClass, KnowledgeBase, Priority, Scenario
from .optimizer import GAConfig, build_knowledge_base, front_csv
from .protocols import BEHAVIORS, make_behavior
from .scenarios import PRESETS, load_bundled_kb, load_scenario, preset_scenario

log = logging.getLogger("adm_broadcast")

MIXES = ("equal", "hl-only", "ml-only", "ll-only")
RESULT_FIELDS = ["preset", "behavior", "priority", "sources"] + AGGREGATE_FIELDS


def max_workers() -> int:
    try:
        return max(1, int(os.environ.get("ADM_THREADS", "1")))
    except ValueError:
        return 1


def replication_seed(seed: int, k: int) -> int:
    return int(np.random.SeedSequence([seed, k]).generate_state(1)[0])


def check_kb(kb: KnowledgeBase, behavior: str) -> None:
    """Fail early, naming the first (density, priority) the behavior could need."""
    if behavior == "simple":
        return
    needed = Priority if behavior == "adm" else (Priority.HL,)
    for d in sorted(DensityClass, reverse=True):
        for pr in sorted(needed, reverse=True):
            if (d, pr) not in kb.entries:
                raise ConfigError(f"knowledge base has no entry for {d.name} {pr.name}")


def base_scenario(preset: str | None, scenario_file: str | None) -> Scenario:
    if scenario_file:
        return load_scenario(scenario_file)
    return preset_scenario(preset or "suburban")


def with_sources(sc: Scenario, sources: int | None, mix: str, seed: int) -> Scenario:
    if sources is None and sc.source_schedule:
        return sc
    return replace(sc, source_schedule=make_sources(sources or 1, sc.node_count, mix, seed=seed))


def _one_replication(args):
    scenario, behavior, kb, want_trace = args
    trace = run(scenario, make_behavior(behavior, kb, scenario.relay_jitter))
    result = compute_objectives(trace, scenario)
    return result, (trace.to_csv() if want_trace else None)


def run_cell(scenario: Scenario, behavior: str, kb: KnowledgeBase | None, sources: int | None,
             mix: str, seed: int, replications: int, want_trace: bool = False):
    """All replications of one (scenario, behavior, sources) cell, in replication order."""
    jobs = []
    for k in range(replications):
        s = replication_seed(seed, k)
        sc = with_sources(replace(scenario, seed=s), sources, mix, s)
        jobs.append((sc, behavior, kb, want_trace))
    workers = min(max_workers(), len(jobs))
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            return list(pool.map(_one_replication, jobs))
    return [_one_replication(j) for j in jobs]


def result_rows(preset: str, behavior: str, n_sources: int, results) -> list[list[str]]:
    rows = []
    if behavior == "adm":
        for pr in sorted(Priority, reverse=True):
            vecs = [r.by_priority[pr] for r in results if pr in r.by_priority]
            if vecs:
                rows.append([preset, behavior, pr.name, str(n_sources),
                             *aggregate_row(*aggregate_replications(vecs))])
    mean, err = aggregate_replications([r.aggregate for r in results])
    rows.append([preset, behavior, "all", str(n_sources), *aggregate_row(mean, err)])
    return rows


def write_csv(path: Path | None, header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    text = buf.getvalue()
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    return text


def load_kb(path: str | None, behavior: str) -> KnowledgeBase | None:
    if behavior == "simple" and path is None:
        return None
    kb = KnowledgeBase.load(path) if path else load_bundled_kb()
    check_kb(kb, behavior)
    return kb


def cmd_simulate(args) -> int:
    sc = base_scenario(args.preset, args.scenario)
    kb = load_kb(args.kb, args.behavior)
    results = run_cell(sc, args.behavior, kb, args.sources, args.mix, args.seed,
                       args.replications, args.trace)
    n_sources = len(results[0][0].packets)
    label = args.preset or sc.name
    rows = result_rows(label, args.behavior, n_sources, [r for r, _ in results])
    out = Path(args.out) if args.out else None
    text = write_csv(out / "aggregate.csv" if out else None, RESULT_FIELDS, rows)
    if out is None:
        sys.stdout.write(text)
        return 0
    for k, (res, trace) in enumerate(results):
        (out / f"packets_rep{k}.csv").write_text(packets_csv(res))
        if trace is not None:
            (out / f"trace_rep{k}.csv").write_text(trace)
    return 0


def _int_list(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x]


def cmd_sweep(args) -> int:
    rows = []
    kb_cache = {}
    for preset in args.presets.split(","):
        sc = preset_scenario(preset)
        for behavior in args.behaviors.split(","):
            if behavior not in BEHAVIORS:
                raise ConfigError(f"unknown behavior {behavior!r}")
            if behavior not in kb_cache:
                kb_cache[behavior] = load_kb(args.kb, behavior)
            for n in _int_list(args.sources):
                results = run_cell(sc, behavior, kb_cache[behavior], n, args.mix, args.seed,
                                   args.replications)
                rows.extend(result_rows(preset, behavior, n, [r for r, _ in results]))
                log.info("done %s %s %d", preset, behavior, n)
    text = write_csv(Path(args.out) if args.out else None, RESULT_FIELDS, rows)
    if not args.out:
        sys.stdout.write(text)
    return 0


def cmd_optimize(args) -> int:
    config = GAConfig.load(args.ga_config) if args.ga_config else GAConfig()
    if args.seed is not None:
        config.seed = args.seed
    if args.replications is not None:
        config.replications = args.replications
    config.workers = max_workers()
    scenarios = {}
    for p in args.preset.split(","):
        if p not in PRESETS:
            raise ConfigError(f"unknown preset {p!r}")
        scenarios[PRESETS[p].density] = preset_scenario(p)
    kb, fronts = build_knowledge_base(scenarios, config)
    out = Path(args.out)
    existing = KnowledgeBase.load(out) if out.exists() else KnowledgeBase()
    existing.entries.update(kb.entries)
    out.parent.mkdir(parents=True, exist_ok=True)
    existing.save(out)
    front_dir = Path(args.front_dir) if args.front_dir else out.parent
    for density, front in fronts.items():
        name = next(p for p, v in PRESETS.items() if v.density == density)
        (front_dir / f"front-{name}.csv").write_text(front_csv(front))
    if not existing.complete:
        log.info("knowledge base %s is partial (%d of 12 entries)", out, len(existing))
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="adm-broadcast", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run replications of one scenario")
    src = sim.add_mutually_exclusive_group()
    src.add_argument("--preset", choices=sorted(PRESETS))
    src.add_argument("--scenario", metavar="FILE")
    sim.add_argument("--behavior", choices=BEHAVIORS, default="adm")
    sim.add_argument("--kb", metavar="FILE", help="knowledge base (default: bundled tables)")
    sim.add_argument("--sources", type=int)
    sim.add_argument("--mix", choices=MIXES, default="equal")
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--replications", type=int, default=1)
    sim.add_argument("--out", metavar="DIR")
    sim.add_argument("--trace", action="store_true", help="also dump per-replication traces")
    sim.set_defaults(func=cmd_simulate)

    sw = sub.add_parser("sweep", help="cross product of presets, behaviors and source counts")
    sw.add_argument("--presets", default="suburban")
    sw.add_argument("--behaviors", default="adm,smart,simple")
    sw.add_argument("--sources", default="3,10,20,30")
    sw.add_argument("--kb", metavar="FILE")
    sw.add_argument("--mix", choices=MIXES, default="equal")
    sw.add_argument("--seed", type=int, default=0)
    sw.add_argument("--replications", type=int, default=10)
    sw.add_argument("--out", metavar="FILE")
    sw.set_defaults(func=cmd_sweep)

    opt = sub.add_parser("optimize", help="evolve strategies and write knowledge-base rows")
    opt.add_argument("--preset", required=True, help="preset name(s), comma separated")
    opt.add_argument("--ga-config", metavar="FILE")
    opt.add_argument("--seed", type=int)
    opt.add_argument("--replications", type=int)
    opt.add_argument("--out", required=True, metavar="FILE")
    opt.add_argument("--front-dir", metavar="DIR")
    opt.set_defaults(func=cmd_optimize)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
