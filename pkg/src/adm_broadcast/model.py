"""Domain types shared by the simulator, protocols, analyzer and optimizer."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, NamedTuple


class ConfigError(ValueError):
    """Raised for invalid strategies, scenarios or knowledge-base files."""


class Priority(enum.IntEnum):
    LL = 0
    ML = 1
    HL = 2

    @classmethod
    def parse(cls, text: str) -> "Priority":
        try:
            return cls[text.strip().upper()]
        except KeyError:
            raise ConfigError(f"unknown priority {text!r}") from None


class DensityClass(enum.IntEnum):
    VeryLow = 0
    Low = 1
    Medium = 2
    High = 3

    @classmethod
    def parse(cls, text: str) -> "DensityClass":
        for member in cls:
            if member.name.lower() == text.strip().lower():
                return member
        raise ConfigError(f"unknown density class {text!r}")


# Lower bounds of Low, Medium, High (midpoints between the preset neighbour counts 1, 5, 10, 26).
DENSITY_THRESHOLDS = (3.0, 8.0, 18.0)


def classify_density(mean_neighbours: float) -> DensityClass:
    if not mean_neighbours >= 0:
        raise ValueError(f"mean neighbour count must be >= 0, got {mean_neighbours}")
    low, medium, high = DENSITY_THRESHOLDS
    if mean_neighbours >= high:
        return DensityClass.High
    if mean_neighbours >= medium:
        return DensityClass.Medium
    if mean_neighbours >= low:
        return DensityClass.Low
    return DensityClass.VeryLow


@dataclass(frozen=True)
class Strategy:
    """Broadcast policy: relay probability, repetitions, repetition delay, hop limit.

    ``dr`` has no effect when ``nr == 1`` but is kept so genomes round-trip.
    """

    p: float
    nr: int
    dr: float
    ttl: int

    def __post_init__(self):
        problems = strategy_problems(self.p, self.nr, self.dr, self.ttl)
        if problems:
            raise ConfigError("invalid strategy: " + "; ".join(problems))

    def as_tuple(self) -> tuple[float, int, float, int]:
        return (self.p, self.nr, self.dr, self.ttl)


def strategy_problems(p, nr, dr, ttl) -> list[str]:
    out = []
    if not (isinstance(p, (int, float)) and 0.0 <= p <= 1.0):
        out.append(f"p={p!r} not in [0, 1]")
    if not (isinstance(nr, int) and not isinstance(nr, bool) and nr >= 1):
        out.append(f"nr={nr!r} not an integer >= 1")
    if not (isinstance(dr, (int, float)) and math.isfinite(dr) and dr >= 0.0):
        out.append(f"dr={dr!r} not a finite value >= 0")
    if not (isinstance(ttl, int) and not isinstance(ttl, bool) and ttl >= 1):
        out.append(f"ttl={ttl!r} not an integer >= 1")
    return out


@dataclass(frozen=True)
class ObjectiveVector:
    """NC, PT, R are minimised, FR is maximised.

    ``pt`` is NaN when no packet was fully delivered.
    """

    nc: float
    pt: float
    r: float
    fr: float

    def oriented(self) -> tuple[float, float, float, float]:
        """All-minimised view used for dominance checks."""
        return (self.nc, self.pt, self.r, -self.fr)


class PacketId(NamedTuple):
    source: int
    seq: int

    def __str__(self):
        return f"{self.source}:{self.seq}"

    @classmethod
    def parse(cls, text: str) -> "PacketId":
        src, seq = text.split(":")
        return cls(int(src), int(seq))


@dataclass(frozen=True)
class Packet:
    id: PacketId
    source: int
    priority: Priority
    ttl_remaining: int
    last_transmitter: int
    created_at: float

    def relayed_by(self, node: int) -> "Packet":
        return Packet(self.id, self.source, self.priority, self.ttl_remaining, node, self.created_at)

    def hop_consumed(self) -> "Packet":
        return Packet(self.id, self.source, self.priority, self.ttl_remaining - 1,
                      self.last_transmitter, self.created_at)


class SourceEmission(NamedTuple):
    node: int
    priority: Priority
    time: float


@dataclass(frozen=True)
class Scenario:
    node_count: int
    inter_vehicle_distance: float
    line_length: float
    comm_range: float
    duty_cycle: float = 1.0
    source_schedule: tuple[SourceEmission, ...] = ()
    duration: float = 60.0
    seed: int = 0
    on_period_mean: float = 1.0
    airtime: float = 0.0002
    relay_jitter: float = 0.100
    name: str = "custom"

    def __post_init__(self):
        object.__setattr__(self, "source_schedule", tuple(self.source_schedule))
        if self.node_count < 1:
            raise ConfigError("node_count must be >= 1")
        if (self.node_count - 1) * self.inter_vehicle_distance > self.line_length + 1e-9:
            raise ConfigError("convoy does not fit on line_length")
        if not 0.0 < self.duty_cycle <= 1.0:
            raise ConfigError("duty_cycle must be in (0, 1]")
        if self.comm_range <= 0 or self.airtime <= 0 or self.on_period_mean <= 0:
            raise ConfigError("comm_range, airtime and on_period_mean must be > 0")
        if self.relay_jitter < 0 or self.duration <= 0:
            raise ConfigError("relay_jitter must be >= 0 and duration > 0")
        for em in self.source_schedule:
            if not 0 <= em.node < self.node_count:
                raise ConfigError(f"source node {em.node} outside convoy")


KB_HEADER = "# density priority p nr dr ttl\n"


@dataclass
class KnowledgeBase:
    """(density class, priority) -> Strategy table consulted by the Plan step."""

    entries: dict[tuple[DensityClass, Priority], Strategy] = field(default_factory=dict)

    def __setitem__(self, key, strategy: Strategy):
        self.entries[key] = strategy

    def __len__(self):
        return len(self.entries)

    @property
    def complete(self) -> bool:
        return len(self.entries) == len(DensityClass) * len(Priority)

    @classmethod
    def uniform(cls, rows: dict[Priority, Strategy]) -> "KnowledgeBase":
        """Same per-priority rows for every density class."""
        return cls({(d, pr): rows[pr] for d in DensityClass for pr in Priority})

    def serialize(self) -> str:
        lines = [KB_HEADER]
        for d in sorted(DensityClass, reverse=True):
            for pr in sorted(Priority, reverse=True):
                s = self.entries.get((d, pr))
                if s is not None:
                    lines.append(f"{d.name} {pr.name} {s.p!r} {s.nr} {float(s.dr)!r} {s.ttl}\n")
        return "".join(lines)

    @classmethod
    def parse(cls, text: str) -> "KnowledgeBase":
        kb = cls()
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 6:
                raise ConfigError(f"line {lineno}: expected 6 fields, got {len(parts)}")
            try:
                d, pr = DensityClass.parse(parts[0]), Priority.parse(parts[1])
                s = Strategy(float(parts[2]), int(parts[3]), float(parts[4]), int(parts[5]))
            except (ValueError, ConfigError) as exc:
                raise ConfigError(f"line {lineno}: {exc}") from None
            if (d, pr) in kb.entries:
                raise ConfigError(f"line {lineno}: duplicate entry {d.name} {pr.name}")
            kb[d, pr] = s
        return kb

    @classmethod
    def load(cls, path) -> "KnowledgeBase":
        return cls.parse(Path(path).read_text())

    def save(self, path) -> None:
        Path(path).write_text(self.serialize())


def kb_lookup(kb: KnowledgeBase, d: DensityClass, pr: Priority) -> Strategy:
    try:
        return kb.entries[d, pr]
    except KeyError:
        raise ConfigError(f"knowledge base has no entry for {d.name} {pr.name}") from None


def union_kb(parts: Iterable[KnowledgeBase]) -> KnowledgeBase:
    kb = KnowledgeBase()
    for part in parts:
        kb.entries.update(part.entries)
    return kb
