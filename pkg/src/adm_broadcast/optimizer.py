"""Offline strategy search: NSGA-II with an elite archive, simulation in the loop.

The archive keeps every non-dominated genome ever evaluated, so the returned
front can only improve as generations are added.
"""

from __future__ import annotations

import logging
import math
import os
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .analyzer import aggregate_replications, compute_objectives
from .engine import run as run_simulation
from .model import (
    ConfigError, DensityClass, KnowledgeBase, ObjectiveVector, Priority, Scenario,
    SourceEmission, Strategy,
)
from .protocols import AdmBehavior

log = logging.getLogger(__name__)

# (low, high) per gene, in Strategy field order; nr and ttl are integers.
GENE_BOUNDS = ((0.0, 1.0), (1, 30), (0.0, 2.0), (1, 40))
_INTEGER_GENES = (1, 3)


@dataclass(frozen=True)
class EvaluatedGenome:
    strategy: Strategy
    objectives: ObjectiveVector


def dominates(a: ObjectiveVector, b: ObjectiveVector) -> bool:
    """Pareto dominance with NC, PT, R minimised and FR maximised."""
    return _dominates(a.oriented(), b.oriented())


def _dominates(x: Sequence[float], y: Sequence[float]) -> bool:
    strictly = False
    for xi, yi in zip(x, y):
        if xi > yi:
            return False
        if xi < yi:
            strictly = True
    return strictly


def non_dominated(points: Sequence[Sequence[float]]) -> list[int]:
    """Indices of the points (minimisation) not dominated by any other."""
    pts = [tuple(p) for p in points]
    order = sorted(range(len(pts)), key=lambda i: pts[i])
    kept: list[int] = []
    for i in order:
        # Lexicographic order means later points can never dominate earlier ones.
        if not any(_dominates(pts[j], pts[i]) for j in kept):
            kept.append(i)
    return sorted(kept)


def pareto_front(genomes: Iterable[EvaluatedGenome]) -> list[EvaluatedGenome]:
    genomes = list(genomes)
    return [genomes[i] for i in non_dominated([g.objectives.oriented() for g in genomes])]


def fast_non_dominated_sort(points: Sequence[Sequence[float]]) -> list[list[int]]:
    n = len(points)
    dominated_by = [[] for _ in range(n)]
    counts = [0] * n
    fronts: list[list[int]] = [[]]
    for i in range(n):
        for j in range(i + 1, n):
            if _dominates(points[i], points[j]):
                dominated_by[i].append(j)
                counts[j] += 1
            elif _dominates(points[j], points[i]):
                dominated_by[j].append(i)
                counts[i] += 1
    fronts[0] = [i for i in range(n) if counts[i] == 0]
    while fronts[-1]:
        nxt = []
        for i in fronts[-1]:
            for j in dominated_by[i]:
                counts[j] -= 1
                if counts[j] == 0:
                    nxt.append(j)
        fronts.append(sorted(nxt))
    return fronts[:-1]


def crowding_distance(points: Sequence[Sequence[float]], front: Sequence[int]) -> dict[int, float]:
    dist = {i: 0.0 for i in front}
    if len(front) <= 2:
        return {i: math.inf for i in front}
    for m in range(len(points[front[0]])):
        ordered = sorted(front, key=lambda i: (points[i][m], i))
        lo, hi = points[ordered[0]][m], points[ordered[-1]][m]
        dist[ordered[0]] = dist[ordered[-1]] = math.inf
        if hi == lo:
            continue
        for k in range(1, len(ordered) - 1):
            dist[ordered[k]] += (points[ordered[k + 1]][m] - points[ordered[k - 1]][m]) / (hi - lo)
    return dist


def hypervolume(points: Iterable[Sequence[float]], ref: Sequence[float]) -> float:
    """Exact dominated hypervolume (minimisation) w.r.t. ``ref``, by slicing."""
    pts = [tuple(p) for p in points if all(pi < ri for pi, ri in zip(p, ref))]
    if not pts:
        return 0.0
    return _hv(pts, tuple(ref))


def _hv(pts: list[tuple], ref: tuple) -> float:
    d = len(ref)
    if d == 1:
        return ref[0] - min(p[0] for p in pts)
    if d == 2:
        area, best = 0.0, ref[1]
        for x, y in sorted(pts):
            if y < best:
                area += (ref[0] - x) * (best - y)
                best = y
        return area
    # Slice along the last objective.
    pts = sorted(pts, key=lambda p: p[-1])
    total = 0.0
    for k, p in enumerate(pts):
        upper = pts[k + 1][-1] if k + 1 < len(pts) else ref[-1]
        depth = upper - p[-1]
        if depth <= 0:
            continue
        slab = [q[:-1] for q in pts[: k + 1]]
        slab = [slab[i] for i in non_dominated(slab)]
        total += depth * _hv(slab, ref[:-1])
    return total


# -- variation -------------------------------------------------------------

def clip_genes(genes: Sequence[float]) -> list:
    out = []
    for k, (x, (lo, hi)) in enumerate(zip(genes, GENE_BOUNDS)):
        x = min(max(float(x), lo), hi)
        out.append(int(round(x)) if k in _INTEGER_GENES else x)
    return out


def to_strategy(genes: Sequence[float]) -> Strategy:
    p, nr, dr, ttl = clip_genes(genes)
    return Strategy(p, nr, dr, ttl)


def random_genes(rng: random.Random) -> list:
    return clip_genes([rng.uniform(lo, hi) for lo, hi in GENE_BOUNDS])


def sbx_crossover(a: Sequence[float], b: Sequence[float], rng: random.Random,
                  eta: float = 15.0) -> tuple[list, list]:
    """Bounded simulated binary crossover, each gene swapped with probability 1/2."""
    c1, c2 = list(a), list(b)
    for k, (lo, hi) in enumerate(GENE_BOUNDS):
        if rng.random() > 0.5 or abs(a[k] - b[k]) < 1e-12:
            continue
        y1, y2 = sorted((float(a[k]), float(b[k])))
        u = rng.random()
        span = y2 - y1
        children = []
        for bound_gap in (y1 - lo, hi - y2):
            beta = 1.0 + 2.0 * bound_gap / span
            alpha = 2.0 - beta ** -(eta + 1.0)
            if u <= 1.0 / alpha:
                betaq = (u * alpha) ** (1.0 / (eta + 1.0))
            else:
                betaq = (1.0 / (2.0 - u * alpha)) ** (1.0 / (eta + 1.0))
            children.append(betaq)
        x1 = 0.5 * ((y1 + y2) - children[0] * span)
        x2 = 0.5 * ((y1 + y2) + children[1] * span)
        if rng.random() < 0.5:
            x1, x2 = x2, x1
        c1[k], c2[k] = x1, x2
    return clip_genes(c1), clip_genes(c2)


def polynomial_mutation(genes: Sequence[float], rng: random.Random, rate: float,
                        eta: float = 20.0) -> list:
    out = list(genes)
    for k, (lo, hi) in enumerate(GENE_BOUNDS):
        if rng.random() >= rate:
            continue
        x, span = float(out[k]), hi - lo
        d1, d2 = (x - lo) / span, (hi - x) / span
        u = rng.random()
        if u < 0.5:
            xy = 1.0 - d1
            deltaq = (2.0 * u + (1.0 - 2.0 * u) * xy ** (eta + 1.0)) ** (1.0 / (eta + 1.0)) - 1.0
        else:
            xy = 1.0 - d2
            deltaq = 1.0 - (2.0 * (1.0 - u) + 2.0 * (u - 0.5) * xy ** (eta + 1.0)) ** (1.0 / (eta + 1.0))
        out[k] = x + deltaq * span
    return clip_genes(out)


# -- evaluation ------------------------------------------------------------

def optimization_scenario(base: Scenario) -> Scenario:
    """One source at the head of the convoy, as used for strategy tuning."""
    return Scenario(**{f.name: getattr(base, f.name) for f in fields(base)
                       if f.name != "source_schedule"},
                    source_schedule=(SourceEmission(0, Priority.HL, 0.0),))


class SimulationEvaluator:
    """Averages the objectives of ``replications`` runs with the strategy used
    for every density and priority.  Replication seeds are shared by all
    genomes (common random numbers), so results are cached by genome.
    """

    def __init__(self, scenario: Scenario, replications: int = 5, seed: int = 0,
                 single_source: bool = True):
        self.scenario = optimization_scenario(scenario) if single_source else scenario
        self.seeds = [int(s) for s in np.random.SeedSequence(seed).generate_state(replications)]

    def __call__(self, strategy: Strategy) -> ObjectiveVector:
        kb = KnowledgeBase.uniform({pr: strategy for pr in Priority})
        vectors = []
        for s in self.seeds:
            sc = Scenario(**{f.name: getattr(self.scenario, f.name) for f in fields(self.scenario)
                             if f.name != "seed"}, seed=s)
            trace = run_simulation(sc, AdmBehavior(kb, sc.relay_jitter))
            vectors.append(compute_objectives(trace, sc).aggregate)
        mean, _ = aggregate_replications(vectors)
        if math.isnan(mean.pt):
            # Nothing fully delivered: charge the whole run as propagation time.
            mean = ObjectiveVector(mean.nc, self.scenario.duration, mean.r, mean.fr)
        return mean


def toy_evaluator(strategy: Strategy) -> ObjectiveVector:
    """Two-objective ZDT1-style toy: NC = p, PT = g(1 - sqrt(p/g)), g = 1 + dr.

    Its Pareto front is PT = 1 - sqrt(NC) at dr = 0.
    """
    g = 1.0 + strategy.dr
    return ObjectiveVector(strategy.p, g * (1.0 - math.sqrt(strategy.p / g)), 0.0, 1.0)


@dataclass
class GAConfig:
    population: int = 40
    generations: int = 50
    crossover_rate: float = 0.9
    mutation_rate: float = 0.25
    replications: int = 5
    seed: int = 0
    eta_crossover: float = 15.0
    eta_mutation: float = 20.0
    workers: int = field(default_factory=lambda: int(os.environ.get("ADM_THREADS", "1")))

    def __post_init__(self):
        if self.population < 2 or self.population % 2:
            raise ConfigError("population must be an even number >= 2")
        if self.generations < 0 or self.replications < 1:
            raise ConfigError("generations must be >= 0 and replications >= 1")
        if not (0 <= self.crossover_rate <= 1 and 0 <= self.mutation_rate <= 1):
            raise ConfigError("crossover and mutation rates must be in [0, 1]")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    @classmethod
    def parse(cls, text: str) -> "GAConfig":
        kinds = {f.name: (float if f.type in ("float", float) else int) for f in fields(cls)}
        values = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, *rest = line.split()
            if key not in kinds or len(rest) != 1:
                raise ConfigError(f"ga config line {lineno}: bad entry {line!r}")
            try:
                values[key] = kinds[key](rest[0])
            except ValueError:
                raise ConfigError(f"ga config line {lineno}: bad value {rest[0]!r}") from None
        return cls(**values)

    @classmethod
    def load(cls, path) -> "GAConfig":
        return cls.parse(Path(path).read_text())


def _evaluate_all(evaluator, strategies: list[Strategy], workers: int) -> list[ObjectiveVector | None]:
    def safe(fn, s):
        try:
            return fn(s)
        except Exception as exc:  # noqa: BLE001 - a bad genome must not stop the run
            log.warning("evaluation of %s failed: %s", s, exc)
            return None

    if workers > 1 and len(strategies) > 1:
        with ProcessPoolExecutor(workers) as pool:
            futures = [pool.submit(evaluator, s) for s in strategies]
            out = []
            for s, fut in zip(strategies, futures):
                try:
                    out.append(fut.result())
                except Exception as exc:  # noqa: BLE001
                    log.warning("evaluation of %s failed: %s", s, exc)
                    out.append(None)
            return out
    return [safe(evaluator, s) for s in strategies]


class _Population:
    def __init__(self):
        self.genes: list[list] = []
        self.objs: list[ObjectiveVector] = []

    def points(self):
        return [o.oriented() for o in self.objs]


def run_ga(problem, config: GAConfig | None = None,
           on_generation: Callable[[int, list[EvaluatedGenome]], None] | None = None
           ) -> list[EvaluatedGenome]:
    """Evolve strategies and return the archive's non-dominated set.

    ``problem`` is a Scenario (evaluated by simulation) or any callable
    mapping a Strategy to an ObjectiveVector.
    """
    config = config or GAConfig()
    evaluator = problem
    if isinstance(problem, Scenario):
        evaluator = SimulationEvaluator(problem, config.replications, config.seed)
    rng = random.Random(config.seed)
    cache: dict[tuple, ObjectiveVector | None] = {}

    def evaluate(batch: list[list]) -> _Population:
        todo = []
        for g in batch:
            key = tuple(g)
            if key not in cache and key not in todo:
                todo.append(key)
        results = _evaluate_all(evaluator, [to_strategy(k) for k in todo], config.workers)
        cache.update(zip(todo, results))
        pop = _Population()
        for g in batch:
            obj = cache[tuple(g)]
            if obj is not None:
                pop.genes.append(g)
                pop.objs.append(obj)
        return pop

    archive: dict[tuple, ObjectiveVector] = {}

    def update_archive(pop: _Population):
        for g, o in zip(pop.genes, pop.objs):
            archive.setdefault(tuple(g), o)
        keys = list(archive)
        keep = non_dominated([archive[k].oriented() for k in keys])
        for i in set(range(len(keys))) - set(keep):
            del archive[keys[i]]

    def front() -> list[EvaluatedGenome]:
        return [EvaluatedGenome(to_strategy(k), archive[k]) for k in sorted(archive)]

    pop = evaluate([random_genes(rng) for _ in range(config.population)])
    update_archive(pop)
    for gen in range(config.generations):
        if not pop.genes:
            raise RuntimeError("every genome failed evaluation")
        rank, crowd = _rank_and_crowd(pop.points())

        def tournament():
            i, j = rng.randrange(len(pop.genes)), rng.randrange(len(pop.genes))
            if (rank[i], -crowd[i]) <= (rank[j], -crowd[j]):
                return pop.genes[i]
            return pop.genes[j]

        children = []
        while len(children) < config.population:
            a, b = tournament(), tournament()
            if rng.random() < config.crossover_rate:
                a, b = sbx_crossover(a, b, rng, config.eta_crossover)
            children.append(polynomial_mutation(a, rng, config.mutation_rate, config.eta_mutation))
            children.append(polynomial_mutation(b, rng, config.mutation_rate, config.eta_mutation))
        offspring = evaluate(children)
        update_archive(offspring)
        merged = _Population()
        merged.genes = pop.genes + offspring.genes
        merged.objs = pop.objs + offspring.objs
        pop = _survivors(merged, config.population)
        if on_generation:
            on_generation(gen, front())
    return front()


def _rank_and_crowd(points):
    rank, crowd = {}, {}
    for r, fr in enumerate(fast_non_dominated_sort(points)):
        crowd.update(crowding_distance(points, fr))
        for i in fr:
            rank[i] = r
    return rank, crowd


def _survivors(pop: _Population, n: int) -> _Population:
    points = pop.points()
    chosen: list[int] = []
    for fr in fast_non_dominated_sort(points):
        if len(chosen) + len(fr) <= n:
            chosen.extend(fr)
            continue
        crowd = crowding_distance(points, fr)
        chosen.extend(sorted(fr, key=lambda i: (-crowd[i], i))[: n - len(chosen)])
        break
    out = _Population()
    out.genes = [pop.genes[i] for i in chosen]
    out.objs = [pop.objs[i] for i in chosen]
    return out


# -- preference-based selection ---------------------------------------------

HL_MIN_FR = 0.99
ML_MIN_FR = 0.999


def preference_select(front: Sequence[EvaluatedGenome], priority: Priority,
                      hl_min_fr: float = HL_MIN_FR, ml_min_fr: float = ML_MIN_FR) -> Strategy:
    """Pick one strategy from a front according to the priority's policy.

    HL: fastest (PT) among genomes reaching nearly everyone, else best FR.
    ML: fewest collisions among genomes with FR almost 1, else best FR.
    LL: fewest collisions, then fewest retransmissions.
    Remaining ties go to the lexicographically smallest (p, nr, dr, ttl).
    """
    if not front:
        raise ValueError("cannot select from an empty front")

    def pick(cands, key):
        return min(cands, key=lambda g: (*key(g.objectives), g.strategy.as_tuple())).strategy

    def pt(o):
        return math.inf if math.isnan(o.pt) else o.pt

    if priority == Priority.HL:
        ok = [g for g in front if g.objectives.fr >= hl_min_fr]
        if ok:
            return pick(ok, lambda o: (pt(o),))
        return pick(front, lambda o: (-o.fr, pt(o)))
    if priority == Priority.ML:
        ok = [g for g in front if g.objectives.fr >= ml_min_fr]
        if ok:
            return pick(ok, lambda o: (o.nc,))
        return pick(front, lambda o: (-o.fr, o.nc))
    return pick(front, lambda o: (o.nc, o.r))


def build_knowledge_base(scenarios: dict[DensityClass, Scenario], config: GAConfig | None = None,
                         ga: Callable = run_ga) -> tuple[KnowledgeBase, dict[DensityClass, list]]:
    """Run the GA per density and select one strategy per priority.

    Fewer than four densities give a partial base (``kb.complete`` is False).
    """
    kb = KnowledgeBase()
    fronts = {}
    for density in sorted(scenarios, reverse=True):
        front = ga(scenarios[density], config)
        fronts[density] = front
        for pr in sorted(Priority, reverse=True):
            kb[density, pr] = preference_select(front, pr)
    return kb, fronts


FRONT_FIELDS = ["p", "nr", "dr", "ttl", "nc", "pt", "r", "fr"]


def front_csv(front: Sequence[EvaluatedGenome]) -> str:
    lines = [",".join(FRONT_FIELDS)]
    for g in front:
        s, o = g.strategy, g.objectives
        lines.append(f"{s.p!r},{s.nr},{s.dr!r},{s.ttl},{o.nc:.6f},{o.pt:.6f},{o.r:.6f},{o.fr:.6f}")
    return "\n".join(lines) + "\n"
