"""Discrete-event scenario runner.

All nodes share one ``SimChannel`` and one global clock; each node sees the
global time through its own ppm-skewed local clock. Events at the same
global time run in phase order: joins, link changes, channel deliveries,
timers, then traffic. A link change only affects frames sent after it; the
trace uses global time.
"""

from __future__ import annotations

import heapq
import io
from dataclasses import dataclass, field
from enum import Enum
from itertools import count
from typing import Any, Dict, List, Optional, Tuple

from app.codec.mac import MacAddress
from app.engine.node import (
    EngineAction,
    EngineEvent,
    HostFrameIn,
    HostFrameOut,
    LinkFrameIn,
    LinkFrameOut,
    Log,
    NodeState,
    SetTimer,
    Timer,
    create_node,
    step,
)
from app.linklayer.frame import LinkFrame
from app.linklayer.pcap import PcapWriter
from app.linklayer.ports import SimPort
from app.linklayer.sim_channel import SimChannel, SimChannelConfig, blocked_pairs
from app.protocol.datapath import EthernetFrame
from app.protocol.sync import global_time, local_time
from app.schemas.schemas import LinkChangeSpec, NodeConfig, Scenario
from app.simulator.apps import (
    ByteStream,
    EchoResponder,
    PingClient,
    PingResult,
    StreamResult,
    route_host_frame,
)
from app.utils.file_utils import dumps_line
from app.utils.logger import debug, log, warn


class TraceKind(str, Enum):
    MASTER_CHANGED = "MasterChanged"
    PEER_ADDED = "PeerAdded"
    PEER_EXPIRED = "PeerExpired"
    AF_SENT = "AfSent"
    SYNC_ADOPTED = "SyncAdopted"
    DATA_SENT = "DataSent"
    DATA_RECEIVED = "DataReceived"
    ECHO_REPLIED = "EchoReplied"
    LINK_CHANGED = "LinkChanged"


_TRACE_KINDS = {
    "master_changed": TraceKind.MASTER_CHANGED,
    "peer_added": TraceKind.PEER_ADDED,
    "peer_expired": TraceKind.PEER_EXPIRED,
    "af_sent": TraceKind.AF_SENT,
    "sync_adopted": TraceKind.SYNC_ADOPTED,
    "data_sent": TraceKind.DATA_SENT,
    "data_received": TraceKind.DATA_RECEIVED,
}


@dataclass(frozen=True)
class TraceEvent:
    t: int
    node: MacAddress
    kind: TraceKind
    detail: Dict[str, Any] = field(default_factory=dict)

    def to_record(self) -> Dict[str, Any]:
        return {"t_us": self.t, "node": str(self.node), "kind": self.kind.value, **self.detail}


@dataclass
class ScenarioResult:
    trace: List[TraceEvent]
    pcap: Optional[bytes]
    nodes: Dict[MacAddress, NodeState]
    pings: List[PingResult]
    streams: List[StreamResult]
    frames_sent: int = 0
    counters: Dict[str, int] = field(default_factory=dict)

    def trace_lines(self) -> List[str]:
        return [dumps_line(event.to_record()) for event in self.trace]

    def events(self, kind: TraceKind, node: Optional[MacAddress] = None) -> List[TraceEvent]:
        return [e for e in self.trace if e.kind is kind and (node is None or e.node == node)]


# Same-time ordering
JOIN, LINK, DELIVERY, TIMER, TRAFFIC = range(5)


@dataclass
class _SimNode:
    config: NodeConfig
    ppm: int
    join_at: int
    state: Optional[NodeState] = None
    port: Optional[SimPort] = None
    timer_token: int = 0
    responder: Optional[EchoResponder] = None

    @property
    def addr(self) -> MacAddress:
        return self.config.mac

    def local(self, t: int) -> int:
        return local_time(t, self.ppm)


class ScenarioRunner:
    """Runs one scenario to completion; use ``run_scenario`` for the one-shot form."""

    def __init__(self, scenario: Scenario, record_pcap: bool = True) -> None:
        self.scenario = scenario
        self.duration = scenario.duration_ms * 1000
        spec = scenario.channel
        self.channel = SimChannel(SimChannelConfig(
            loss_probability=spec.loss,
            propagation_delay=spec.delay_us,
            rng_seed=spec.seed,
            blocked=blocked_pairs(
                (MacAddress.parse(a), MacAddress.parse(b)) for a, b in spec.blocked
            ),
        ))
        self.nodes: Dict[MacAddress, _SimNode] = {}
        for index, node in enumerate(scenario.nodes):
            config = scenario.node_config(index)
            self.nodes[config.mac] = _SimNode(config, node.ppm, node.join_at_ms * 1000)

        self._buffer = io.BytesIO() if record_pcap else None
        self._pcap = PcapWriter(self._buffer) if self._buffer is not None else None
        self._queue: List[Tuple[int, int, int, str, Any]] = []
        self._seq = count()
        self.trace: List[TraceEvent] = []
        self.frames_sent = 0

        self.pings: Dict[int, PingClient] = {}
        self.streams: Dict[int, ByteStream] = {}
        for sim_node in self.nodes.values():
            self._push(sim_node.join_at, JOIN, "join", sim_node.addr)
        for change in scenario.links:
            self._push(change.at_ms * 1000, LINK, "link", change)
        for index, directive in enumerate(scenario.traffic):
            self._schedule_traffic(index + 1, directive)

    def _push(self, t: int, phase: int, kind: str, payload: Any) -> None:
        heapq.heappush(self._queue, (t, phase, next(self._seq), kind, payload))

    def _schedule_traffic(self, ident: int, directive) -> None:
        src, dst = MacAddress.parse(directive.src), MacAddress.parse(directive.dst)
        start = directive.at_ms * 1000
        if directive.kind == "ping":
            client = PingClient(src, dst, ident, directive.payload_size)
            self.pings[ident] = client
            for seq in range(directive.count):
                self._push(start + seq * directive.interval_ms * 1000, TRAFFIC, "ping", (ident, seq))
        else:
            stream = ByteStream(src, dst, ident, directive.size, directive.chunk, self.scenario.channel.seed)
            self.streams[ident] = stream
            self._push(start, TRAFFIC, "stream", ident)

    # Event handlers

    def _join(self, t: int, addr: MacAddress) -> None:
        node = self.nodes[addr]
        node.port = SimPort(self.channel, addr)
        node.responder = EchoResponder(addr)
        node.state = create_node(node.config, node.local(t))
        debug(f"sim: {addr} joins at {t} us")
        self._arm_timer(node, node.state.next_af)

    def _link(self, t: int, change: LinkChangeSpec) -> None:
        a, b = MacAddress.parse(change.a), MacAddress.parse(change.b)
        if change.state == "down":
            self.channel.block(a, b)
        else:
            self.channel.unblock(a, b)
        debug(f"sim: link {a} <-> {b} {change.state} at {t} us")
        self.trace.append(TraceEvent(t, a, TraceKind.LINK_CHANGED, {"peer": str(b), "state": change.state}))

    def _arm_timer(self, node: _SimNode, at_local: int) -> None:
        node.timer_token += 1
        self._push(global_time(at_local, node.ppm), TIMER, "timer", (node.addr, node.timer_token, at_local))

    def _step(self, node: _SimNode, event: EngineEvent, t: int) -> None:
        node.state, actions = step(node.state, event, node.local(t))
        self._execute(node, actions, t)

    def _execute(self, node: _SimNode, actions: List[EngineAction], t: int) -> None:
        for action in actions:
            if isinstance(action, LinkFrameOut):
                frame = LinkFrame(t, action.frame.data)
                self.frames_sent += 1
                if self._pcap is not None:
                    self._pcap.write(frame)
                node.port.send(frame)
            elif isinstance(action, SetTimer):
                self._arm_timer(node, action.at)
            elif isinstance(action, HostFrameOut):
                self._host_out(node, action.frame, t)
            elif isinstance(action, Log):
                kind = _TRACE_KINDS.get(action.record.get("event"))
                if kind is not None:
                    detail = {k: v for k, v in action.record.items() if k != "event"}
                    self.trace.append(TraceEvent(t, node.addr, kind, detail))

    def _host_out(self, node: _SimNode, f: EthernetFrame, t: int) -> None:
        reply, answered = route_host_frame(node.addr, f, node.responder, self.pings, self.streams, t)
        if answered is not None:
            self.trace.append(TraceEvent(t, node.addr, TraceKind.ECHO_REPLIED, {
                "peer": str(f.src),
                "ident": answered.ident,
                "seq": answered.seq,
            }))
        if reply is not None:
            self._push(t, TRAFFIC, "host_in", (node.addr, reply))

    def _host_in(self, addr: MacAddress, f: EthernetFrame, t: int) -> None:
        node = self.nodes[addr]
        if node.state is None:
            warn(f"sim: {addr} has not joined at {t} us; host frame dropped")
            return
        self._step(node, HostFrameIn(f), t)

    def _deliver(self, t: int) -> None:
        for receiver, frame in self.channel.advance(t):
            node = self.nodes[receiver]
            node.port.deliver(frame)
            delivered = node.port.poll(t)
            if delivered is not None:
                self._step(node, LinkFrameIn(LinkFrame(node.local(t), delivered.data)), t)

    def _traffic(self, kind: str, payload: Any, t: int) -> None:
        if kind == "ping":
            ident, seq = payload
            client = self.pings[ident]
            self._host_in(client.src, client.request(seq, t), t)
        elif kind == "stream":
            stream = self.streams[payload]
            for segment in stream.segments():
                self._host_in(stream.src, segment, t)
        elif kind == "host_in":
            addr, frame = payload
            self._host_in(addr, frame, t)

    def run(self) -> ScenarioResult:
        while True:
            head = self._queue[0] if self._queue else None
            delivery_at = self.channel.next_time()
            if head is None and delivery_at is None:
                break
            if delivery_at is not None and (head is None or (delivery_at, DELIVERY) < head[:2]):
                if delivery_at > self.duration:
                    break
                self._deliver(delivery_at)
                continue
            t, _phase, _seq, kind, payload = heapq.heappop(self._queue)
            if t > self.duration:
                break
            if kind == "join":
                self._join(t, payload)
            elif kind == "link":
                self._link(t, payload)
            elif kind == "timer":
                addr, token, at_local = payload
                node = self.nodes[addr]
                if token == node.timer_token:
                    self._step(node, Timer(at_local), t)
            else:
                self._traffic(kind, payload, t)

        return self._result()

    def _result(self) -> ScenarioResult:
        counters: Dict[str, int] = {
            "channel_sent": self.channel.sent,
            "channel_delivered": self.channel.delivered,
            "channel_dropped": self.channel.dropped,
        }
        states = {addr: node.state for addr, node in self.nodes.items() if node.state is not None}
        log(
            f"scenario done: {len(states)} nodes, {self.frames_sent} frames, "
            f"{len(self.trace)} trace events"
        )
        return ScenarioResult(
            trace=self.trace,
            pcap=self._buffer.getvalue() if self._buffer is not None else None,
            nodes=states,
            pings=[client.result for _, client in sorted(self.pings.items())],
            streams=[stream.result for _, stream in sorted(self.streams.items())],
            frames_sent=self.frames_sent,
            counters=counters,
        )


def run_scenario(s: Scenario, record_pcap: bool = True) -> ScenarioResult:
    """Run ``s`` deterministically.

    Args:
        s: A validated scenario.
        record_pcap: Keep every frame put on the channel as pcap bytes.

    Returns:
        Trace, optional pcap bytes, final node states, ping and stream results.
    """
    return ScenarioRunner(s, record_pcap=record_pcap).run()
