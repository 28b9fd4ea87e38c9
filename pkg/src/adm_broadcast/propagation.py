"""Duty-cycled disc link model and receiver-side collision resolution."""

from __future__ import annotations

import bisect
import random
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

_LINK_TAG = 0x4C494E4B


@dataclass(frozen=True)
class LinkModelParams:
    comm_range: float
    duty_cycle: float = 1.0
    on_period_mean: float = 1.0

    def __post_init__(self):
        if self.comm_range <= 0:
            raise ValueError("comm_range must be > 0")
        if not 0.0 < self.duty_cycle <= 1.0:
            raise ValueError("duty_cycle must be in (0, 1]")
        if self.on_period_mean <= 0:
            raise ValueError("on_period_mean must be > 0")

    @property
    def off_period_mean(self) -> float:
        return self.on_period_mean * (1.0 - self.duty_cycle) / self.duty_cycle


def in_range(pos_a: float, pos_b: float, params: LinkModelParams) -> bool:
    return abs(pos_a - pos_b) <= params.comm_range


def link_seed(seed: int, a: int, b: int) -> int:
    state = np.random.SeedSequence([seed & 0xFFFFFFFFFFFFFFFF, _LINK_TAG, a, b]).generate_state(2)
    return int(state[0]) << 32 | int(state[1])


class _OnOffProcess:
    """Alternating exponential on/off renewal process, generated lazily.

    The initial state is drawn from the stationary distribution, so the
    on-fraction is ``duty_cycle`` from t = 0 onwards.
    """

    def __init__(self, rng: random.Random, params: LinkModelParams):
        self._rng = rng
        self._on_mean = params.on_period_mean
        self._off_mean = params.off_period_mean
        self.initial_on = rng.random() < params.duty_cycle
        self.switches = [0.0]
        self._on_now = self.initial_on

    def _extend(self, t: float):
        while self.switches[-1] <= t:
            mean = self._on_mean if self._on_now else self._off_mean
            self.switches.append(self.switches[-1] + self._rng.expovariate(1.0 / mean))
            self._on_now = not self._on_now

    def is_on(self, t: float) -> bool:
        self._extend(t)
        # switches[k] starts interval k; interval parity alternates state.
        k = bisect.bisect_right(self.switches, t) - 1
        return self.initial_on if k % 2 == 0 else not self.initial_on


class LinkStates:
    """Per-directed-link on/off processes for one scenario seed.

    Answers depend only on (seed, link, time), never on query order.
    """

    def __init__(self, params: LinkModelParams, seed: int):
        self.params = params
        self.seed = seed
        self._links: dict[tuple[int, int], _OnOffProcess] = {}

    def usable(self, a: int, b: int, t: float) -> bool:
        if self.params.duty_cycle >= 1.0:
            return True
        proc = self._links.get((a, b))
        if proc is None:
            proc = _OnOffProcess(random.Random(link_seed(self.seed, a, b)), self.params)
            self._links[a, b] = proc
        return proc.is_on(t)


def link_usable(link: tuple[int, int], time: float, params: LinkModelParams, seed: int) -> bool:
    """Stateless form of :meth:`LinkStates.usable` (rebuilds the link process)."""
    return LinkStates(params, seed).usable(link[0], link[1], time)


class Transmission(NamedTuple):
    transmitter: int
    start: float
    airtime: float

    @property
    def end(self) -> float:
        return self.start + self.airtime


class Outcome(NamedTuple):
    kind: str  # "received", "collision" or "nothing"
    received_from: tuple[int, ...] = ()  # indices into the transmission list
    collisions: int = 0


def resolve_receptions(transmissions: Sequence[Transmission], receivers, positions,
                       params: LinkModelParams, links: LinkStates | None = None) -> dict[int, Outcome]:
    """Batch reception outcome for each receiver over a finished set of transmissions.

    A receiver hears a transmission when it is in range and the directed link
    is on at the transmission start.  Audible transmissions are grouped into
    maximal chains of time-overlapping intervals; a group of one is received
    unless the receiver was itself on air during it, a group of two or more
    is one collision.  Outcome kind is "received" if anything was received,
    else "collision" if any collision occurred, else "nothing".
    """
    own: dict[int, list[tuple[float, float]]] = {}
    for tx in transmissions:
        own.setdefault(tx.transmitter, []).append((tx.start, tx.end))
    out = {}
    for rx in receivers:
        audible = [
            (tx.start, tx.end, i) for i, tx in enumerate(transmissions)
            if tx.transmitter != rx
            and in_range(positions[tx.transmitter], positions[rx], params)
            and (links is None or links.usable(tx.transmitter, rx, tx.start))
        ]
        audible.sort()
        received, collisions = [], 0
        group: list[tuple[float, float, int]] = []
        group_end = -np.inf

        def close(group):
            nonlocal collisions
            if len(group) >= 2:
                collisions += 1
            elif len(group) == 1:
                s, e, i = group[0]
                busy = any(os < e and s < oe for os, oe in own.get(rx, ()))
                if not busy:
                    received.append(i)

        for s, e, i in audible:
            if s < group_end:
                group.append((s, e, i))
                group_end = max(group_end, e)
            else:
                close(group)
                group, group_end = [(s, e, i)], e
        close(group)
        if received:
            out[rx] = Outcome("received", tuple(received), collisions)
        elif collisions:
            out[rx] = Outcome("collision", (), collisions)
        else:
            out[rx] = Outcome("nothing")
    return out
