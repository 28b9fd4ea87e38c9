"""Deterministic discrete-event simulator for a static 1-D convoy."""

from __future__ import annotations

import bisect
import csv
import enum
import heapq
import io
import random
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .model import Packet, PacketId, Priority, Scenario, SourceEmission
from .propagation import LinkModelParams, LinkStates

_NODE_TAG = 0x4E4F4445


class EventKind(enum.IntEnum):
    EmitNew = 0
    TransmitCopy = 1
    DeliveryResolution = 2
    RepetitionDue = 3


class Event(NamedTuple):
    time: float
    sequence: int
    kind: EventKind
    payload: tuple


class EventQueue:
    """Min-heap on (time, insertion sequence)."""

    def __init__(self):
        self._heap: list[Event] = []
        self._seq = 0
        self.now = 0.0

    def __len__(self):
        return len(self._heap)

    def push(self, time: float, kind: EventKind, payload: tuple) -> Event:
        if time < self.now:
            raise ValueError(f"event scheduled in the past ({time} < {self.now})")
        ev = Event(time, self._seq, kind, payload)
        self._seq += 1
        heapq.heappush(self._heap, ev)
        return ev

    def peek_time(self) -> float:
        return self._heap[0].time

    def pop(self) -> Event:
        ev = heapq.heappop(self._heap)
        self.now = ev.time
        return ev


class TraceRecord(NamedTuple):
    time: float
    node: int
    kind: str  # SEND, RECV, COLLISION, DUP_RECV, DROP_TTL
    packet: PacketId | None
    frm: int | None = None


TRACE_HEADER = ("time", "node", "kind", "packet", "from")


@dataclass
class Trace:
    records: list[TraceRecord] = field(default_factory=list)
    truncated: bool = False

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TRACE_HEADER)
        for r in self.records:
            w.writerow([f"{r.time:.6f}", r.node, r.kind,
                        "" if r.packet is None else str(r.packet),
                        "" if r.frm is None else r.frm])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "Trace":
        rows = csv.reader(io.StringIO(text))
        header = next(rows)
        if tuple(header) != TRACE_HEADER:
            raise ValueError(f"unexpected trace header {header}")
        recs = [
            TraceRecord(float(t), int(n), k, PacketId.parse(p) if p else None,
                        int(f) if f else None)
            for t, n, k, p, f in rows
        ]
        return cls(recs)


def build_line_topology(scenario: Scenario) -> list[float]:
    return [i * scenario.inter_vehicle_distance for i in range(scenario.node_count)]


def scheduled_packets(scenario: Scenario) -> dict[PacketId, SourceEmission]:
    """Packet ids for the source schedule: per-source sequence in emission-time order."""
    order = sorted(range(len(scenario.source_schedule)),
                   key=lambda i: (scenario.source_schedule[i].time, i))
    counters: dict[int, int] = {}
    out = {}
    for i in order:
        em = scenario.source_schedule[i]
        seq = counters.get(em.node, 0)
        counters[em.node] = seq + 1
        out[PacketId(em.node, seq)] = em
    return out


def node_rng(seed: int, node: int) -> random.Random:
    state = np.random.SeedSequence([seed & 0xFFFFFFFFFFFFFFFF, _NODE_TAG, node]).generate_state(2)
    return random.Random(int(state[0]) << 32 | int(state[1]))


class _Group:
    """Maximal chain of overlapping audible frames at one receiver."""

    __slots__ = ("end", "size", "first_packet", "counted")

    def __init__(self, end, packet):
        self.end = end
        self.size = 1
        self.first_packet = packet
        self.counted = False


class _Frame(NamedTuple):
    node: int
    start: float
    end: float
    packet: Packet
    hearers: list  # [(receiver, _Group)]


class Simulator:
    """One run of one scenario.  Use :func:`run` unless you need the internals."""

    def __init__(self, scenario: Scenario, behavior):
        self.scenario = scenario
        self.behavior = behavior
        self.positions = build_line_topology(scenario)
        self.params = LinkModelParams(scenario.comm_range, scenario.duty_cycle,
                                      scenario.on_period_mean)
        self.links = LinkStates(self.params, scenario.seed)
        self.neighbours = self._neighbours()
        n = scenario.node_count
        self.states = [behavior.new_state(i) for i in range(n)]
        self.rngs = [node_rng(scenario.seed, i) for i in range(n)]
        self.busy_until = [0.0] * n
        self.own_frames: list[list[tuple[float, float]]] = [[] for _ in range(n)]
        self.groups: list[_Group | None] = [None] * n
        self.queue = EventQueue()
        self.trace = Trace()

    def _neighbours(self) -> list[list[int]]:
        pos = self.positions
        r = self.scenario.comm_range
        out = []
        for i, x in enumerate(pos):
            lo = bisect.bisect_left(pos, x - r)
            hi = bisect.bisect_right(pos, x + r)
            out.append([j for j in range(lo, hi) if j != i and abs(pos[j] - x) <= r])
        return out

    def _log(self, time, node, kind, packet_id, frm=None):
        self.trace.records.append(TraceRecord(time, node, kind, packet_id, frm))

    def run(self) -> Trace:
        for pid, em in scheduled_packets(self.scenario).items():
            pkt = Packet(pid, em.node, em.priority, 0, em.node, em.time)
            self.queue.push(em.time, EventKind.EmitNew, (pkt,))
        duration = self.scenario.duration
        handlers = {
            EventKind.EmitNew: self._emit,
            EventKind.TransmitCopy: self._transmit,
            EventKind.RepetitionDue: self._transmit,
            EventKind.DeliveryResolution: self._resolve,
        }
        while self.queue:
            if self.queue.peek_time() > duration:
                self.trace.truncated = True
                break
            ev = self.queue.pop()
            handlers[ev.kind](ev.time, *ev.payload)
        return self.trace

    def _schedule_sends(self, node: int, sends):
        for k, (t, pkt) in enumerate(sends):
            kind = EventKind.TransmitCopy if k == 0 else EventKind.RepetitionDue
            self.queue.push(t, kind, (node, pkt))

    def _emit(self, time, pkt: Packet):
        node = pkt.source
        sends = self.behavior.source_emit(self.states[node], pkt, time, self.rngs[node])
        self._schedule_sends(node, sends)

    def _transmit(self, time, node, pkt: Packet):
        # One radio per node: frames queue behind the one on air.
        if time < self.busy_until[node]:
            self.queue.push(self.busy_until[node], EventKind.TransmitCopy, (node, pkt))
            return
        end = time + self.scenario.airtime
        self.busy_until[node] = end
        self.own_frames[node].append((time, end))
        self._log(time, node, "SEND", pkt.id)
        hearers = []
        usable = self.links.usable
        for rx in self.neighbours[node]:
            if not usable(node, rx, time):
                continue
            g = self.groups[rx]
            if g is not None and time < g.end:
                g.size += 1
                if end > g.end:
                    g.end = end
            else:
                g = _Group(end, pkt.id)
                self.groups[rx] = g
            hearers.append((rx, g))
        self.queue.push(end, EventKind.DeliveryResolution, (_Frame(node, time, end, pkt, hearers),))

    def _was_transmitting(self, node, start, end) -> bool:
        for s, e in reversed(self.own_frames[node]):
            if e <= start:
                return False
            if s < end:
                return True
        return False

    def _resolve(self, time, frame: _Frame):
        delivered = frame.packet.hop_consumed()
        for rx, g in frame.hearers:
            if g.size >= 2:
                if not g.counted and g.end <= time:
                    g.counted = True
                    self._log(time, rx, "COLLISION", g.first_packet)
                continue
            if self._was_transmitting(rx, frame.start, frame.end):
                continue
            reaction = self.behavior.on_receive(self.states[rx], delivered, frame.node,
                                                time, self.rngs[rx])
            self._log(time, rx, "DUP_RECV" if reaction.duplicate else "RECV",
                      delivered.id, frame.node)
            if reaction.dropped_ttl:
                self._log(time, rx, "DROP_TTL", delivered.id)
            self._schedule_sends(rx, reaction.sends)


def run(scenario: Scenario, behavior) -> Trace:
    return Simulator(scenario, behavior).run()


def make_sources(n_sources: int, node_count: int, mix: str = "equal", *, seed: int = 0,
                 spread: float = 0.010) -> tuple[SourceEmission, ...]:
    """Evenly spaced sources emitting almost simultaneously.

    Source k sits at the centre of the k-th of ``n_sources`` equal stretches
    of the convoy.  Emission times are uniform in ``[0, spread)``.
    ``mix`` is ``equal`` (HL, ML, LL round robin) or ``hl-only``/``ml-only``/``ll-only``.
    """
    if not 1 <= n_sources <= node_count:
        raise ValueError(f"need 1..{node_count} sources, got {n_sources}")
    if mix == "equal":
        cycle = (Priority.HL, Priority.ML, Priority.LL)
    elif mix in ("hl-only", "ml-only", "ll-only"):
        cycle = (Priority.parse(mix.split("-")[0]),)
    else:
        raise ValueError(f"unknown priority mix {mix!r}")
    rng = node_rng(seed, -1 & 0xFFFFFFFF)
    out = []
    for k in range(n_sources):
        node = min(node_count - 1, int((k + 0.5) * node_count / n_sources))
        out.append(SourceEmission(node, cycle[k % len(cycle)], rng.uniform(0.0, spread)))
    return tuple(out)
