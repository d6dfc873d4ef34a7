"""Deterministic master election.

Candidates are ordered by ``(counter, metric, address)``; the largest wins.
A node adopts the best master advertised by a fresh neighbour unless its own
key is larger, and takes its timing from the neighbour it heard it through.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import IntEnum
from typing import Iterable, List, NamedTuple, Optional, Tuple

from app.codec.constants import TLV_ELECTION_PARAMS
from app.codec.mac import MacAddress
from app.codec.params import ElectionParams, encode_election_params
from app.codec.tlv import Tlv

MAX_DISTANCE = 10
ELECTION_FRESH_MS = 2000


class Ordering(IntEnum):
    LESS = -1
    EQUAL = 0
    GREATER = 1


class CandidateKey(NamedTuple):
    """Tuple comparison gives the election order directly."""

    counter: int
    metric: int
    addr: MacAddress


class PeerAdvert(NamedTuple):
    addr: MacAddress
    params: ElectionParams
    fresh: bool


@dataclass(frozen=True)
class ElectionState:
    self_addr: MacAddress
    self_metric: int
    self_counter: int
    top_master: MacAddress
    master_metric: int
    master_counter: int
    distance: int
    sync_master: MacAddress

    @classmethod
    def initial(cls, addr: MacAddress, metric: int, counter: int = 0) -> "ElectionState":
        return cls(addr, metric, counter, addr, metric, counter, 0, addr)

    @property
    def is_master(self) -> bool:
        return self.top_master == self.self_addr

    @property
    def self_key(self) -> CandidateKey:
        return CandidateKey(self.self_counter, self.self_metric, self.self_addr)

    def as_master(self) -> "ElectionState":
        return replace(
            self,
            top_master=self.self_addr,
            master_metric=self.self_metric,
            master_counter=self.self_counter,
            distance=0,
            sync_master=self.self_addr,
        )


def compare_candidates(a: CandidateKey, b: CandidateKey) -> Ordering:
    if a == b:
        return Ordering.EQUAL
    return Ordering.GREATER if a > b else Ordering.LESS


def _advert_key(params: ElectionParams) -> CandidateKey:
    return CandidateKey(params.master_counter, params.master_metric, params.master_address)


def run_election(
    state: ElectionState,
    peers: Iterable[PeerAdvert | Tuple[MacAddress, ElectionParams, bool]],
    max_distance: int = MAX_DISTANCE,
) -> ElectionState:
    """Pick the top master among self and the fresh peers' advertisements.

    Args:
        state: Current election view of this node.
        peers: ``(addr, params, fresh)`` for every known neighbour.
        max_distance: Advertisements at or beyond this distance are ignored.

    Returns:
        The new election state. A node that becomes master again after
        following someone else bumps its ``self_counter``.
    """
    best: Optional[CandidateKey] = None
    via: List[Tuple[int, MacAddress, ElectionParams]] = []
    for addr, params, fresh in peers:
        if not fresh or params.distance_to_master >= max_distance:
            continue
        # Our own mastership echoed back by a neighbour is never adopted.
        if params.master_address == state.self_addr:
            continue
        key = _advert_key(params)
        if best is None or key > best:
            best = key
            via = [(params.distance_to_master, addr, params)]
        elif key == best:
            via.append((params.distance_to_master, addr, params))

    if best is None or state.self_key >= best:
        if state.is_master:
            return state.as_master()
        return replace(state, self_counter=state.self_counter + 1).as_master()

    # Smallest distance first, larger peer address breaks ties.
    distance, sync_addr, params = min(via, key=lambda v: (v[0], _negated(v[1])))
    return replace(
        state,
        top_master=params.master_address,
        master_metric=params.master_metric,
        master_counter=params.master_counter,
        distance=distance + 1,
        sync_master=sync_addr,
    )


def _negated(addr: MacAddress) -> bytes:
    return bytes(0xFF - b for b in addr.octets)


def election_params(state: ElectionState) -> ElectionParams:
    return ElectionParams(
        master_address=state.top_master,
        sync_address=state.sync_master,
        master_counter=state.master_counter,
        distance_to_master=state.distance,
        master_metric=state.master_metric,
        self_metric=state.self_metric,
        self_counter=state.self_counter,
    )


def build_election_tlv(state: ElectionState) -> Tlv:
    return Tlv(TLV_ELECTION_PARAMS, encode_election_params(election_params(state)))
