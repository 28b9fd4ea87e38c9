"""Trace analyzer: NC, PT, R and FR per packet, per priority and per run."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .engine import Trace, scheduled_packets
from .model import ObjectiveVector, PacketId, Priority, Scenario


@dataclass
class PacketResult:
    packet: PacketId
    priority: Priority
    created_at: float
    delivered: bool
    pt: float  # NaN unless delivered
    r: int
    nc: int


@dataclass
class RunResult:
    packets: list[PacketResult]
    aggregate: ObjectiveVector
    by_priority: dict[Priority, ObjectiveVector] = field(default_factory=dict)
    no_traffic: bool = False
    truncated: bool = False


def _summarise(packets: Sequence[PacketResult]) -> ObjectiveVector:
    if not packets:
        return ObjectiveVector(0.0, 0.0, 0.0, 0.0)
    n = len(packets)
    delivered = [p.pt for p in packets if p.delivered]
    pt = sum(delivered) / len(delivered) if delivered else math.nan
    return ObjectiveVector(
        nc=sum(p.nc for p in packets) / n,
        pt=pt,
        r=sum(p.r for p in packets) / n,
        fr=len(delivered) / n,
    )


def compute_objectives(trace: Trace, scenario: Scenario) -> RunResult:
    """Objective values of one run.

    Collisions are charged to the packet of the first frame in the colliding
    group.  PT is averaged over fully delivered packets only, so it is NaN
    when nothing was fully delivered.
    """
    emitted = scheduled_packets(scenario)
    if not emitted:
        return RunResult([], ObjectiveVector(0.0, 0.0, 0.0, 0.0), no_traffic=True,
                         truncated=trace.truncated)
    first_rx: dict[PacketId, dict[int, float]] = {pid: {} for pid in emitted}
    relays = dict.fromkeys(emitted, 0)
    collisions = dict.fromkeys(emitted, 0)
    for rec in trace:
        pid = rec.packet
        if rec.kind == "SEND":
            if rec.node != pid.source:
                relays[pid] += 1
        elif rec.kind == "RECV":
            if rec.node != pid.source:
                first_rx[pid].setdefault(rec.node, rec.time)
        elif rec.kind == "COLLISION":
            collisions[pid] += 1
    others = scenario.node_count - 1
    packets = []
    for pid, em in emitted.items():
        got = first_rx[pid]
        delivered = len(got) == others
        pt = (max(got.values(), default=em.time) - em.time) if delivered else math.nan
        packets.append(PacketResult(pid, em.priority, em.time, delivered, pt,
                                    relays[pid], collisions[pid]))
    by_priority = {}
    for pr in sorted(Priority, reverse=True):
        subset = [p for p in packets if p.priority == pr]
        if subset:
            by_priority[pr] = _summarise(subset)
    return RunResult(packets, _summarise(packets), by_priority, truncated=trace.truncated)


def aggregate_replications(vectors: Iterable[ObjectiveVector]) -> tuple[ObjectiveVector, ObjectiveVector]:
    """Field-wise mean and standard error; undefined PT values are skipped."""
    arr = np.array([[v.nc, v.pt, v.r, v.fr] for v in vectors], dtype=float)
    if arr.size == 0:
        raise ValueError("need at least one objective vector")
    means, errs = [], []
    for col in arr.T:
        vals = col[~np.isnan(col)]
        if vals.size == 0:
            means.append(math.nan)
            errs.append(math.nan)
            continue
        means.append(float(vals.mean()))
        errs.append(float(vals.std(ddof=1) / math.sqrt(vals.size)) if vals.size > 1 else 0.0)
    return ObjectiveVector(*means), ObjectiveVector(*errs)


def fmt(x: float) -> str:
    return "nan" if math.isnan(x) else f"{x:.6f}"


def packets_csv(result: RunResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["packet", "delivered", "pt", "r"])
    for p in result.packets:
        w.writerow([str(p.packet), int(p.delivered), fmt(p.pt), p.r])
    return buf.getvalue()


AGGREGATE_FIELDS = ["nc", "pt", "r", "fr", "stderr_nc", "stderr_pt", "stderr_r", "stderr_fr"]


def aggregate_row(mean: ObjectiveVector, err: ObjectiveVector) -> list[str]:
    return [fmt(x) for x in (mean.nc, mean.pt, mean.r, mean.fr, err.nc, err.pt, err.r, err.fr)]


def aggregate_csv(mean: ObjectiveVector, err: ObjectiveVector) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(AGGREGATE_FIELDS)
    w.writerow(aggregate_row(mean, err))
    return buf.getvalue()
