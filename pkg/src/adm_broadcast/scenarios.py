"""Convoy presets, reference strategy tables and the scenario file format.

All presets share one radio (1000 m disc); density comes only from vehicle
spacing.  ``neighbours`` is the nominal neighbour count of each density level,
kept for reference: a node hears roughly that many distinct relays per packet
once relay probability and collisions thin out its 2 x range / spacing
geometric neighbours.
"""

from __future__ import annotations

import dataclasses
from importlib import resources
from pathlib import Path
from typing import NamedTuple

from .model import (
    ConfigError, DensityClass, KnowledgeBase, ObjectiveVector, Priority, Scenario,
    SourceEmission, Strategy,
)

LINE_LENGTH = 10_000.0
COMM_RANGE = 1000.0


class Preset(NamedTuple):
    density: DensityClass
    node_count: int
    spacing: float
    neighbours: int
    duty_cycle: float
    comm_range: float = COMM_RANGE


PRESETS = {
    "urban": Preset(DensityClass.High, 400, 25.0, 26, 1.0),
    "suburban": Preset(DensityClass.Medium, 134, 75.0, 10, 1.0),
    "highway": Preset(DensityClass.Low, 50, 200.0, 5, 1.0),
    "rural": Preset(DensityClass.VeryLow, 10, 1000.0, 1, 0.2),
}

PRESET_FOR_DENSITY = {p.density: name for name, p in PRESETS.items()}


def preset_scenario(name: str, **overrides) -> Scenario:
    try:
        p = PRESETS[name]
    except KeyError:
        raise ConfigError(f"unknown preset {name!r} (choose from {', '.join(PRESETS)})") from None
    fields = dict(
        node_count=p.node_count,
        inter_vehicle_distance=p.spacing,
        line_length=LINE_LENGTH,
        comm_range=p.comm_range,
        duty_cycle=p.duty_cycle,
        duration=120.0,
        name=name,
    )
    fields.update(overrides)
    return Scenario(**fields)


class TableRow(NamedTuple):
    strategy: Strategy
    objectives: ObjectiveVector


def _row(p, nr, dr, ttl, nc, pt, r, fr):
    return TableRow(Strategy(p, nr, dr, ttl), ObjectiveVector(nc, pt, r, fr))


# Optimised strategies and their reference performance, one table per density.
# Darkened Dr cells (nr == 1) are stored as 0.0.
STRATEGY_TABLES: dict[DensityClass, dict[Priority, TableRow]] = {
    DensityClass.High: {
        Priority.HL: _row(0.329, 1, 0.0, 32, 497, 0.051, 131, 0.996),
        Priority.ML: _row(0.258, 2, 1.721, 15, 347, 0.1063, 207, 1.0),
        Priority.LL: _row(0.188, 1, 0.0, 39, 190, 0.048, 75, 0.868),
    },
    DensityClass.Medium: {
        Priority.HL: _row(0.776, 1, 0.0, 26, 166, 0.044, 104, 1.0),
        Priority.ML: _row(0.519, 2, 0.951, 16, 93, 0.121, 139, 1.0),
        Priority.LL: _row(0.291, 2, 0.276, 27, 35, 0.209, 82, 0.758),
    },
    DensityClass.Low: {
        Priority.HL: _row(0.999, 4, 1.147, 40, 31, 0.092, 199, 1.0),
        Priority.ML: _row(0.916, 2, 0.729, 28, 24, 0.124, 90, 1.0),
        Priority.LL: _row(0.649, 2, 1.933, 34, 10, 1.414, 66, 0.828),
    },
    DensityClass.VeryLow: {
        Priority.HL: _row(0.833, 28, 0.233, 28, 58, 13.09, 1167, 0.998),
        Priority.ML: _row(0.896, 25, 1.468, 34, 16, 28.295, 1124, 1.0),
        Priority.LL: _row(0.902, 8, 1.622, 19, 4, 30.957, 362, 0.926),
    },
}


def table_kb() -> KnowledgeBase:
    return KnowledgeBase({(d, pr): row.strategy
                          for d, rows in STRATEGY_TABLES.items() for pr, row in rows.items()})


def single_density_kb(density: DensityClass) -> KnowledgeBase:
    """The rows of one density table used for every density class."""
    return KnowledgeBase.uniform({pr: row.strategy for pr, row in STRATEGY_TABLES[density].items()})


def bundled_kb_path(name: str = "kb-tables.txt") -> Path:
    return Path(str(resources.files("adm_broadcast") / "data" / name))


def load_bundled_kb(name: str = "kb-tables.txt") -> KnowledgeBase:
    return KnowledgeBase.load(bundled_kb_path(name))


# Scenario file: "key value" lines, "#" comments, and any number of
# "source <node> <priority> <time>" lines.
_FLOAT_KEYS = {"inter_vehicle_distance", "line_length", "comm_range", "duty_cycle", "duration",
               "on_period_mean", "airtime", "relay_jitter"}
_INT_KEYS = {"node_count", "seed"}


def parse_scenario(text: str) -> Scenario:
    fields: dict = {}
    sources = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, *rest = line.split()
        try:
            if key == "source":
                node, pr, t = rest
                sources.append(SourceEmission(int(node), Priority.parse(pr), float(t)))
            elif key == "preset":
                (name,) = rest
                base = preset_scenario(name)
                for f in dataclasses.fields(base):
                    fields.setdefault(f.name, getattr(base, f.name))
            elif key in _FLOAT_KEYS and len(rest) == 1:
                fields[key] = float(rest[0])
            elif key in _INT_KEYS and len(rest) == 1:
                fields[key] = int(rest[0])
            elif key == "name" and len(rest) == 1:
                fields[key] = rest[0]
            else:
                raise ConfigError(f"unknown key or bad arity: {line!r}")
        except (ValueError, ConfigError) as exc:
            raise ConfigError(f"scenario line {lineno}: {exc}") from None
    if sources:
        fields["source_schedule"] = tuple(sources)
    missing = {"node_count", "inter_vehicle_distance", "comm_range"} - fields.keys()
    if missing:
        raise ConfigError(f"scenario file missing {', '.join(sorted(missing))}")
    fields.setdefault("line_length", (fields["node_count"] - 1) * fields["inter_vehicle_distance"])
    try:
        return Scenario(**fields)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def load_scenario(path) -> Scenario:
    return parse_scenario(Path(path).read_text())


def format_scenario(s: Scenario) -> str:
    lines = [f"name {s.name}", f"node_count {s.node_count}"]
    for key in ("inter_vehicle_distance", "line_length", "comm_range", "duty_cycle", "duration",
                "on_period_mean", "airtime", "relay_jitter"):
        lines.append(f"{key} {getattr(s, key)!r}")
    lines.append(f"seed {s.seed}")
    for em in s.source_schedule:
        lines.append(f"source {em.node} {em.priority.name} {em.time!r}")
    return "\n".join(lines) + "\n"
