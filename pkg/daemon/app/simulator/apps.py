"""Host applications attached to simulated nodes: ping and a byte stream."""

from __future__ import annotations

import random
import struct
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Dict, List, Optional, Tuple

from app.codec.mac import MacAddress
from app.protocol.datapath import EthernetFrame
from app.simulator.icmpv6 import EchoMessage, build_echo_request, echo_responder, parse_echo

STREAM_ETHERTYPE = 0x88B5
_STREAM_HEADER = struct.Struct("!BHI")


class StreamKind(IntEnum):
    DATA = 0
    ACK = 1


@dataclass(frozen=True)
class StreamSegment:
    kind: StreamKind
    stream_id: int
    offset: int
    data: bytes = b""


def encode_segment(src: MacAddress, dst: MacAddress, seg: StreamSegment) -> EthernetFrame:
    payload = _STREAM_HEADER.pack(int(seg.kind), seg.stream_id, seg.offset) + seg.data
    return EthernetFrame(dst=dst, src=src, ethertype=STREAM_ETHERTYPE, payload=payload)


def decode_segment(f: EthernetFrame) -> Optional[StreamSegment]:
    if f.ethertype != STREAM_ETHERTYPE or len(f.payload) < _STREAM_HEADER.size:
        return None
    kind, stream_id, offset = _STREAM_HEADER.unpack_from(f.payload)
    if kind not in (StreamKind.DATA, StreamKind.ACK):
        return None
    return StreamSegment(StreamKind(kind), stream_id, offset, bytes(f.payload[_STREAM_HEADER.size:]))


class EchoResponder:
    """Answers echo requests addressed to its node."""

    def __init__(self, addr: MacAddress) -> None:
        self.addr = addr
        self.replied = 0

    def handle(self, f: EthernetFrame) -> Optional[EthernetFrame]:
        reply = echo_responder(self.addr, f)
        if reply is not None:
            self.replied += 1
        return reply


@dataclass
class PingResult:
    src: str
    dst: str
    ident: int
    sent: Dict[int, int] = field(default_factory=dict)
    received: Dict[int, int] = field(default_factory=dict)
    payload_matches: int = 0
    bad_checksums: int = 0

    @property
    def rtts_us(self) -> List[int]:
        return [self.received[seq] - self.sent[seq] for seq in sorted(self.received) if seq in self.sent]

    def to_record(self) -> dict:
        return {
            "src": self.src,
            "dst": self.dst,
            "ident": self.ident,
            "sent": len(self.sent),
            "received": len(self.received),
            "payload_matches": self.payload_matches,
            "bad_checksums": self.bad_checksums,
            "rtts_us": self.rtts_us,
        }


class PingClient:
    """Sends ``count`` echo requests with a fixed payload and checks the replies."""

    def __init__(self, src: MacAddress, dst: MacAddress, ident: int, payload_size: int) -> None:
        self.src = src
        self.dst = dst
        self.ident = ident
        self.payload = bytes(i & 0xFF for i in range(payload_size))
        self.result = PingResult(str(src), str(dst), ident)

    def request(self, seq: int, t: int) -> EthernetFrame:
        self.result.sent[seq] = t
        return build_echo_request(self.src, self.dst, self.ident, seq, self.payload)

    def matches(self, echo: EchoMessage) -> bool:
        return not echo.is_request and echo.ident == self.ident

    def on_reply(self, echo: EchoMessage, t: int) -> None:
        if not echo.checksum_ok:
            self.result.bad_checksums += 1
            return
        if echo.seq in self.result.received:
            return
        self.result.received[echo.seq] = t
        if echo.payload == self.payload:
            self.result.payload_matches += 1


@dataclass
class StreamResult:
    src: str
    dst: str
    stream_id: int
    size: int
    sent: bytes = b""
    received: bytearray = field(default_factory=bytearray)
    acked: int = 0
    out_of_order: int = 0

    @property
    def complete(self) -> bool:
        return len(self.received) == self.size and bytes(self.received) == self.sent

    def to_record(self) -> dict:
        return {
            "src": self.src,
            "dst": self.dst,
            "stream_id": self.stream_id,
            "size": self.size,
            "received": len(self.received),
            "acked": self.acked,
            "out_of_order": self.out_of_order,
            "complete": self.complete,
        }


class ByteStream:
    """One-way byte transfer in fixed-size chunks with cumulative acks.

    The data is pseudo-random, seeded from the stream id, so reruns send
    identical bytes.
    """

    def __init__(self, src: MacAddress, dst: MacAddress, stream_id: int, size: int, chunk: int, seed: int = 0) -> None:
        self.src = src
        self.dst = dst
        self.stream_id = stream_id
        self.chunk = chunk
        data = random.Random(seed * 65536 + stream_id).randbytes(size)
        self.result = StreamResult(str(src), str(dst), stream_id, size, sent=data)

    def segments(self) -> List[EthernetFrame]:
        data = self.result.sent
        return [
            encode_segment(self.src, self.dst, StreamSegment(StreamKind.DATA, self.stream_id, offset, data[offset:offset + self.chunk]))
            for offset in range(0, len(data), self.chunk)
        ]

    def on_data(self, seg: StreamSegment) -> EthernetFrame:
        """Receiver side: append in-order data and return the cumulative ack."""
        received = self.result.received
        if seg.offset == len(received):
            received.extend(seg.data)
        else:
            self.result.out_of_order += 1
        return encode_segment(self.dst, self.src, StreamSegment(StreamKind.ACK, self.stream_id, len(received)))

    def on_ack(self, seg: StreamSegment) -> None:
        self.result.acked = max(self.result.acked, seg.offset)


def route_host_frame(
    addr: MacAddress,
    f: EthernetFrame,
    responder: EchoResponder,
    pings: Dict[int, PingClient],
    streams: Dict[int, ByteStream],
    now: int,
) -> Tuple[Optional[EthernetFrame], Optional[EchoMessage]]:
    """Hand a frame delivered to ``addr``'s host to the right application.

    Returns:
        A frame the host sends back (echo reply or stream ack) and, for an
        answered echo request, the request that was answered.
    """
    echo = parse_echo(f)
    if echo is not None:
        if echo.is_request:
            reply = responder.handle(f)
            return reply, echo if reply is not None else None
        client = pings.get(echo.ident)
        if client is not None and client.src == addr and client.matches(echo):
            client.on_reply(echo, now)
        return None, None

    seg = decode_segment(f)
    if seg is None:
        return None, None
    stream = streams.get(seg.stream_id)
    if stream is None:
        return None, None
    if seg.kind is StreamKind.DATA and stream.dst == addr:
        return stream.on_data(seg), None
    if seg.kind is StreamKind.ACK and stream.src == addr:
        stream.on_ack(seg)
    return None, None
