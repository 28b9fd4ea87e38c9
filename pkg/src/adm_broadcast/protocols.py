"""Node behaviours: ADM (MAPE-K loop over a local view table) and the two flooding baselines.

Behaviours never touch the event queue.  They return the transmissions they
want, as ``(time, packet)`` pairs, and the engine schedules them.  A packet's
``ttl_remaining`` is the number of hops it may still make; the engine takes one
off on every delivery, so a relay forwards the value it received.
"""

from __future__ import annotations

import random
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import NamedTuple

from .model import (
    KnowledgeBase, Packet, PacketId, Priority, Strategy, classify_density, kb_lookup,
)

LOCAL_VIEW_CAPACITY = 64
RELAY_JITTER = 0.100
FLOODING_TTL = 1000


class LocalViewTable:
    """packet id -> transmitters heard for it, oldest packet evicted first."""

    def __init__(self, capacity: int = LOCAL_VIEW_CAPACITY):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self._entries: OrderedDict[PacketId, dict[int, None]] = OrderedDict()

    def __len__(self):
        return len(self._entries)

    def __contains__(self, packet_id):
        return packet_id in self._entries

    def transmitters(self, packet_id) -> tuple[int, ...]:
        return tuple(self._entries.get(packet_id, ()))

    def as_dict(self) -> dict:
        return {pid: set(tx) for pid, tx in self._entries.items()}

    def record(self, packet_id, transmitter: int) -> None:
        senders = self._entries.get(packet_id)
        if senders is None:
            if len(self._entries) >= self.capacity:
                self._entries.popitem(last=False)
            self._entries[packet_id] = {transmitter: None}
        else:
            senders.setdefault(transmitter, None)

    def density(self) -> float:
        if not self._entries:
            return 0.0
        return sum(len(s) for s in self._entries.values()) / len(self._entries)


def record_transmitter(lvt: LocalViewTable, packet_id, transmitter_id: int) -> LocalViewTable:
    lvt.record(packet_id, transmitter_id)
    return lvt


def estimate_density(lvt: LocalViewTable) -> float:
    """Mean number of distinct transmitters per packet in the table, 0 when empty."""
    return lvt.density()


@dataclass
class AdmNodeState:
    node: int
    local_view: LocalViewTable = field(default_factory=LocalViewTable)
    seen: set = field(default_factory=set)
    # packet id -> number of transmissions this node scheduled for it
    planned: dict = field(default_factory=dict)


class Reaction(NamedTuple):
    duplicate: bool
    dropped_ttl: bool
    sends: list  # [(time, Packet)]


def decide_and_schedule(s: Strategy, packet: Packet, time: float, rng: random.Random,
                        node: int | None = None, jitter: float = RELAY_JITTER) -> list:
    """One Bernoulli(p) draw per packet; on success ``nr`` copies, the k-th at
    ``time + k*dr`` plus its own Uniform(0, jitter) delay.

    Each copy draws its own delay so that two relays whose first copies
    collided do not collide again on every repetition.
    """
    if rng.random() >= s.p:
        return []
    copy = packet if node is None else packet.relayed_by(node)
    return [(time + k * s.dr + rng.uniform(0.0, jitter), copy) for k in range(s.nr)]


class AdmBehavior:
    """Autonomic dissemination: density- and priority-aware strategy per packet."""

    name = "adm"

    def __init__(self, kb: KnowledgeBase, jitter: float = RELAY_JITTER,
                 capacity: int = LOCAL_VIEW_CAPACITY):
        self.kb = kb
        self.jitter = jitter
        self.capacity = capacity

    def new_state(self, node: int) -> AdmNodeState:
        return AdmNodeState(node, LocalViewTable(self.capacity))

    def plan_priority(self, packet: Packet) -> Priority:
        return packet.priority

    # Analyze + Plan
    def strategy_for(self, state: AdmNodeState, priority: Priority) -> Strategy:
        density = classify_density(estimate_density(state.local_view))
        return kb_lookup(self.kb, density, priority)

    def source_emit(self, state: AdmNodeState, packet: Packet, time: float,
                    rng: random.Random) -> list:
        s = self.strategy_for(state, self.plan_priority(packet))
        packet = Packet(packet.id, packet.source, packet.priority, s.ttl, state.node, time)
        state.seen.add(packet.id)
        state.planned[packet.id] = s.nr
        return [(time + k * s.dr, packet) for k in range(s.nr)]

    def on_receive(self, state: AdmNodeState, packet: Packet, frm: int, time: float,
                   rng: random.Random) -> Reaction:
        # Monitor: everything reaching this hook is a broadcast frame.
        if frm != state.node:
            state.local_view.record(packet.id, frm)
        if packet.id in state.seen:
            return Reaction(True, False, [])
        state.seen.add(packet.id)
        if packet.ttl_remaining <= 0:
            return Reaction(False, True, [])
        s = self.strategy_for(state, self.plan_priority(packet))
        # Execute
        sends = decide_and_schedule(s, packet, time, rng, state.node, self.jitter)
        if sends:
            state.planned[packet.id] = len(sends)
        return Reaction(False, False, sends)


def mape_k_on_receive(state: AdmNodeState, packet: Packet, frm: int, time: float,
                      kb: KnowledgeBase, rng: random.Random, jitter: float = RELAY_JITTER) -> Reaction:
    return AdmBehavior(kb, jitter).on_receive(state, packet, frm, time, rng)


def source_emit(state: AdmNodeState, packet: Packet, kb: KnowledgeBase, time: float) -> list:
    return AdmBehavior(kb).source_emit(state, packet, time, random.Random(0))


class SmartFloodingBehavior(AdmBehavior):
    """Density-adaptive but priority-blind: every packet uses the HL row."""

    name = "smart"

    def plan_priority(self, packet: Packet) -> Priority:
        return Priority.HL


class SimpleFloodingBehavior:
    """Every node relays the first copy of every packet exactly once."""

    name = "simple"

    def __init__(self, jitter: float = RELAY_JITTER, ttl: int = FLOODING_TTL):
        self.jitter = jitter
        self.ttl = ttl

    def new_state(self, node: int) -> AdmNodeState:
        return AdmNodeState(node, LocalViewTable(1))

    def source_emit(self, state, packet: Packet, time: float, rng) -> list:
        packet = Packet(packet.id, packet.source, packet.priority, self.ttl, state.node, time)
        state.seen.add(packet.id)
        state.planned[packet.id] = 1
        return [(time, packet)]

    def on_receive(self, state, packet: Packet, frm: int, time: float, rng) -> Reaction:
        if packet.id in state.seen:
            return Reaction(True, False, [])
        state.seen.add(packet.id)
        if packet.ttl_remaining <= 0:
            return Reaction(False, True, [])
        state.planned[packet.id] = 1
        return Reaction(False, False, [(time + rng.uniform(0.0, self.jitter), packet.relayed_by(state.node))])


def simple_flooding_on_receive(state, packet, frm, time, rng=None) -> Reaction:
    return SimpleFloodingBehavior().on_receive(state, packet, frm, time, rng or random.Random(0))


def smart_flooding_on_receive(state, packet, frm, time, kb_hl: KnowledgeBase, rng) -> Reaction:
    return SmartFloodingBehavior(kb_hl).on_receive(state, packet, frm, time, rng)


BEHAVIORS = ("adm", "smart", "simple")


def make_behavior(name: str, kb: KnowledgeBase | None = None, jitter: float = RELAY_JITTER):
    if name == "simple":
        return SimpleFloodingBehavior(jitter)
    if kb is None:
        raise ValueError(f"behavior {name!r} needs a knowledge base")
    if name == "adm":
        return AdmBehavior(kb, jitter)
    if name == "smart":
        return SmartFloodingBehavior(kb, jitter)
    raise ValueError(f"unknown behavior {name!r}")
