"""The node state machine.

``step`` is a pure transition: it reads no clock, draws no random numbers
and performs no I/O. The caller feeds it one event at a time together with
the current local time and executes the returned actions in order.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

from app.codec.constants import TLV_SYNC_PARAMS
from app.codec.frames import (
    ActionFrame,
    ActionSubtype,
    FrameClass,
    Ieee80211Header,
    classify_frame,
    parse_action_frame,
    parse_data_frame,
    serialize_action_frame,
)
from app.codec.mac import BROADCAST, MacAddress
from app.codec.params import (
    build_channel_sequence_tlv,
    build_hostname_tlv,
    build_sync_tlv,
    build_version_tlv,
    decode_sync_params,
)
from app.core.config import settings
from app.core.errors import CodecError, OversizeFrame
from app.linklayer.frame import LinkFrame
from app.protocol.datapath import (
    DatapathState,
    EthernetFrame,
    count_rx,
    ethernet_from_data_frame,
    ethernet_to_awdl,
)
from app.protocol.election import ElectionState, PeerAdvert, build_election_tlv, run_election
from app.protocol.peers import PeerTable, expire_peers, format_ipv6, is_fresh, upsert_peer
from app.protocol.sync import SEQ_MODULUS, SyncState, adopt_timing, aw_seq_at, build_sync_params, next_af_time
from app.schemas.schemas import NodeConfig

TIME_MASK = 0xFFFFFFFF


# Events
@dataclass(frozen=True)
class LinkFrameIn:
    frame: LinkFrame


@dataclass(frozen=True)
class HostFrameIn:
    frame: EthernetFrame


@dataclass(frozen=True)
class Timer:
    at: int


EngineEvent = Union[LinkFrameIn, HostFrameIn, Timer]


# Actions
@dataclass(frozen=True)
class LinkFrameOut:
    frame: LinkFrame


@dataclass(frozen=True)
class HostFrameOut:
    frame: EthernetFrame


@dataclass(frozen=True)
class SetTimer:
    at: int


@dataclass(frozen=True)
class Log:
    record: Dict[str, Any]


EngineAction = Union[LinkFrameOut, HostFrameOut, SetTimer, Log]


@dataclass(frozen=True)
class NodeState:
    config: NodeConfig
    election: ElectionState
    sync: SyncState
    peers: PeerTable
    datapath: DatapathState
    next_af: int
    counters: Mapping[str, int] = field(default_factory=dict)
    af_seq: int = 0
    timing_source: Optional[MacAddress] = None

    @property
    def addr(self) -> MacAddress:
        return self.config.mac


def create_node(config: NodeConfig, now: int) -> NodeState:
    """Initial state: self-master, AW grid anchored at ``now``, first MIF due at ``now``.

    The node's RNG (seeded from ``config.rng_seed``) picks the initial AW
    sequence number and, when none is configured, the election metric.
    """
    rng = random.Random(config.rng_seed)
    metric = config.metric if config.metric is not None else rng.randrange(1, 1 << 16)
    anchor_seq = rng.randrange(SEQ_MODULUS)
    return NodeState(
        config=config,
        election=ElectionState.initial(config.mac, metric),
        sync=SyncState.initial(now, anchor_seq, config.channel, config.af_period_tu),
        peers=PeerTable(timeout=config.peer_timeout_ms * 1000),
        datapath=DatapathState(),
        next_af=now,
    )


def _count(counters: Mapping[str, int], *names: str) -> Dict[str, int]:
    out = dict(counters)
    for name in names:
        out[name] = out.get(name, 0) + 1
    return out


def _parse_error_log(error: str, detail: str) -> Log:
    return Log({"event": "parse_error", "error": error, "detail": detail})


def _elect(state: NodeState, peers: PeerTable, now: int) -> ElectionState:
    horizon = state.config.election_fresh_ms * 1000
    adverts = [
        PeerAdvert(addr, peer.election, is_fresh(peer, now, horizon))
        for addr, peer in sorted(peers.peers.items())
        if peer.election is not None
    ]
    return run_election(state.election, adverts, state.config.max_distance)


def _master_changed(old: ElectionState, new: ElectionState) -> List[EngineAction]:
    if old.top_master == new.top_master:
        return []
    return [Log({
        "event": "master_changed",
        "old": str(old.top_master),
        "new": str(new.top_master),
        "distance": new.distance,
    })]


def _on_action(state: NodeState, raw: bytes, now: int) -> Tuple[NodeState, List[EngineAction]]:
    counters = _count(state.counters, "rx_action")
    try:
        frame = parse_action_frame(raw)
    except CodecError as exc:
        counters = _count(counters, "parse_errors")
        return replace(state, counters=counters), [_parse_error_log(type(exc).__name__, str(exc))]
    src = frame.source
    if src == state.addr:
        return replace(state, counters=_count(counters, "own_frames")), []

    actions: List[EngineAction] = []
    peers, is_new = upsert_peer(state.peers, frame, now)
    peer = peers.get(src)
    if is_new:
        counters = _count(counters, "peers_added")
        actions.append(Log({"event": "peer_added", "mac": str(src), "ipv6": format_ipv6(peer.ipv6_ll)}))
    for error in peer.last_errors:
        name, _, detail = error.partition(": ")
        counters = _count(counters, "parse_errors")
        actions.append(_parse_error_log(name, detail))

    election = _elect(state, peers, now)
    changes = _master_changed(state.election, election)
    if changes:
        counters = _count(counters, "master_changes")
    actions.extend(changes)

    sync, timing_source = state.sync, state.timing_source
    if not election.is_master and src == election.sync_master:
        adopted = _adopt(sync, frame, now)
        if adopted is not None:
            sync = adopted
            if timing_source != src:
                timing_source = src
                counters = _count(counters, "sync_adoptions")
                actions.append(Log({"event": "sync_adopted", "from": str(src), "aw_seq": sync.anchor_seq}))
    elif election.is_master:
        timing_source = None

    state = replace(
        state,
        peers=peers,
        election=election,
        sync=sync,
        timing_source=timing_source,
        counters=counters,
    )
    return state, actions


def _adopt(sync: SyncState, frame: ActionFrame, now: int) -> Optional[SyncState]:
    tlv = frame.find(TLV_SYNC_PARAMS)
    if tlv is None:
        return None
    try:
        return adopt_timing(sync, decode_sync_params(tlv), now)
    except CodecError:
        # Already reported through the peer's last_errors.
        return None


def _on_data(state: NodeState, raw: bytes, now: int) -> Tuple[NodeState, List[EngineAction]]:
    counters = _count(state.counters, "rx_data")
    try:
        frame = parse_data_frame(raw)
    except CodecError as exc:
        counters = _count(counters, "parse_errors")
        return replace(state, counters=counters), [_parse_error_log(type(exc).__name__, str(exc))]
    if frame.src == state.addr:
        return replace(state, counters=_count(counters, "own_frames")), []
    if frame.dst != state.addr and not frame.dst.is_multicast:
        return replace(state, counters=_count(counters, "data_not_for_us")), []

    state = replace(state, datapath=count_rx(state.datapath), counters=_count(counters, "data_delivered"))
    return state, [
        HostFrameOut(ethernet_from_data_frame(frame)),
        Log({
            "event": "data_received",
            "src": str(frame.src),
            "sequence": frame.hdr.sequence,
            "length": len(frame.payload),
        }),
    ]


def _on_link(state: NodeState, f: LinkFrame, now: int) -> Tuple[NodeState, List[EngineAction]]:
    state = replace(state, counters=_count(state.counters, "rx_frames"))
    frame_class = classify_frame(f.data)
    if frame_class is FrameClass.AWDL_ACTION:
        return _on_action(state, f.data, now)
    if frame_class is FrameClass.AWDL_DATA:
        return _on_data(state, f.data, now)
    return replace(state, counters=_count(state.counters, "rx_other")), []


def _on_host(state: NodeState, f: EthernetFrame, now: int) -> Tuple[NodeState, List[EngineAction]]:
    sequence = state.datapath.seq_counter
    try:
        raw, datapath = ethernet_to_awdl(f, state.datapath)
    except OversizeFrame as exc:
        counters = _count(state.counters, "tx_dropped")
        return replace(state, counters=counters), [Log({"event": "frame_dropped", "reason": str(exc)})]
    state = replace(state, datapath=datapath, counters=_count(state.counters, "tx_data"))
    return state, [
        LinkFrameOut(LinkFrame(now, raw)),
        Log({"event": "data_sent", "dst": str(f.dst), "sequence": sequence, "length": len(f.payload)}),
    ]


def build_mif(state: NodeState, now: int) -> ActionFrame:
    """The master indication frame this node sends at ``now``."""
    sync_params = build_sync_params(state.sync, state.election, now, now)
    tlvs = (
        build_sync_tlv(sync_params),
        build_election_tlv(state.election),
        build_channel_sequence_tlv(state.sync.channel_sequence),
        build_hostname_tlv(state.config.hostname),
        build_version_tlv(settings.AWDL_VERSION, settings.DEVICE_CLASS),
    )
    return ActionFrame(
        hdr=Ieee80211Header.action(state.addr, BROADCAST, state.af_seq),
        subtype=ActionSubtype.MIF,
        phy_tx_time=now & TIME_MASK,
        target_tx_time=now & TIME_MASK,
        tlvs=tlvs,
    )


def _on_timer(state: NodeState, at: int, now: int) -> Tuple[NodeState, List[EngineAction]]:
    if at != state.next_af:
        return replace(state, counters=_count(state.counters, "stale_timers")), []

    frame = build_mif(state, now)
    actions: List[EngineAction] = [
        LinkFrameOut(LinkFrame(now, serialize_action_frame(frame))),
        Log({
            "event": "af_sent",
            "aw_seq": aw_seq_at(state.sync, now)[0],
            "master": str(state.election.top_master),
            "distance": state.election.distance,
        }),
    ]
    counters = _count(state.counters, "tx_action")

    peers, removed = expire_peers(state.peers, now)
    for addr in removed:
        counters = _count(counters, "peers_expired")
        actions.append(Log({"event": "peer_expired", "mac": str(addr)}))

    election, timing_source = state.election, state.timing_source
    if removed and election.sync_master in removed:
        election = _elect(state, peers, now)
        changes = _master_changed(state.election, election)
        if changes:
            counters = _count(counters, "master_changes")
        actions.extend(changes)
        if timing_source in removed:
            timing_source = None

    next_af = next_af_time(state.sync, now)
    actions.append(SetTimer(next_af))
    state = replace(
        state,
        peers=peers,
        election=election,
        timing_source=timing_source,
        next_af=next_af,
        af_seq=(state.af_seq + 1) & 0x0FFF,
        counters=counters,
    )
    return state, actions


def step(state: NodeState, event: EngineEvent, now: int) -> Tuple[NodeState, List[EngineAction]]:
    """Apply one event.

    Args:
        state: Current node state.
        event: ``LinkFrameIn``, ``HostFrameIn`` or ``Timer``.
        now: Local time in microseconds; must not go backwards.

    Returns:
        The next state and the actions to execute, in order. At most one
        ``SetTimer`` is among them. Codec errors never escape; they become
        ``parse_error`` log records and counters.
    """
    if isinstance(event, LinkFrameIn):
        return _on_link(state, event.frame, now)
    if isinstance(event, HostFrameIn):
        return _on_host(state, event.frame, now)
    if isinstance(event, Timer):
        return _on_timer(state, event.at, now)
    raise TypeError(f"unknown engine event {event!r}")


def log_records(actions: Sequence[EngineAction]) -> List[Dict[str, Any]]:
    return [a.record for a in actions if isinstance(a, Log)]
