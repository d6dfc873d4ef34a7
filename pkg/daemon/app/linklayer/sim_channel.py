"""Deterministic shared medium for the simulator.

Every registered node hears every frame sent by the others after a fixed
propagation delay, unless the seeded RNG drops that copy or the pair is on
the block list. Time is the channel's global clock in microseconds.
"""

from __future__ import annotations

import heapq
import random
from dataclasses import dataclass, field
from itertools import count
from typing import FrozenSet, Hashable, Iterable, List, Optional, Set, Tuple

from app.core.errors import UnknownNode
from app.linklayer.frame import LinkFrame

NodeId = Hashable


@dataclass(frozen=True)
class SimChannelConfig:
    loss_probability: float = 0.0
    propagation_delay: int = 0
    rng_seed: int = 0
    blocked: FrozenSet[FrozenSet[NodeId]] = field(default_factory=frozenset)

    def __post_init__(self) -> None:
        if not 0.0 <= self.loss_probability <= 1.0:
            raise ValueError(f"loss_probability must be in [0, 1], got {self.loss_probability}")
        if self.propagation_delay < 0:
            raise ValueError("propagation_delay must not be negative")


class SimChannel:
    """Full-mesh broadcast channel with i.i.d. loss per (frame, receiver).

    Deliveries come out of ``advance`` ordered by ``(time, node id,
    insertion)``. The RNG is drawn once per receiver of each frame, in sorted
    receiver order, so identical seeds and send sequences give identical
    outcomes.
    """

    def __init__(self, config: SimChannelConfig) -> None:
        self.config = config
        self.rng = random.Random(config.rng_seed)
        self.nodes: Set[NodeId] = set()
        self.blocked: Set[FrozenSet[NodeId]] = set(config.blocked)
        self._queue: List[Tuple[int, NodeId, int, LinkFrame]] = []
        self._insertion = count()
        self.sent = 0
        self.delivered = 0
        self.dropped = 0

    def register(self, node: NodeId) -> None:
        self.nodes.add(node)

    def block(self, a: NodeId, b: NodeId) -> None:
        """Stop frames travelling between ``a`` and ``b`` in either direction."""
        self.blocked.add(frozenset((a, b)))

    def unblock(self, a: NodeId, b: NodeId) -> None:
        self.blocked.discard(frozenset((a, b)))

    def _check(self, node: NodeId) -> None:
        if node not in self.nodes:
            raise UnknownNode(f"node {node} is not registered on the channel")

    def send(self, sender: NodeId, f: LinkFrame) -> None:
        """Queue a copy of ``f`` for every other node that survives the loss draw.

        Raises:
            UnknownNode: ``sender`` was never registered.
        """
        self._check(sender)
        self.sent += 1
        arrival = f.timestamp + self.config.propagation_delay
        for receiver in sorted(self.nodes):
            if receiver == sender or frozenset((sender, receiver)) in self.blocked:
                continue
            if self.rng.random() < self.config.loss_probability:
                self.dropped += 1
                continue
            heapq.heappush(
                self._queue,
                (arrival, receiver, next(self._insertion), LinkFrame(arrival, f.data)),
            )

    def advance(self, until: int) -> List[Tuple[NodeId, LinkFrame]]:
        """Pop every delivery due at or before ``until``."""
        out: List[Tuple[NodeId, LinkFrame]] = []
        while self._queue and self._queue[0][0] <= until:
            _time, receiver, _seq, frame = heapq.heappop(self._queue)
            out.append((receiver, frame))
        self.delivered += len(out)
        return out

    def next_time(self) -> Optional[int]:
        return self._queue[0][0] if self._queue else None

    def pending(self) -> int:
        return len(self._queue)


def sim_send(ch: SimChannel, sender: NodeId, f: LinkFrame) -> None:
    ch.send(sender, f)


def sim_advance(ch: SimChannel, until: int) -> List[Tuple[NodeId, LinkFrame]]:
    return ch.advance(until)


def blocked_pairs(pairs: Iterable[Tuple[NodeId, NodeId]]) -> FrozenSet[FrozenSet[NodeId]]:
    return frozenset(frozenset(p) for p in pairs)
