"""ICMPv6 echo messages over link-local IPv6, enough for ping between nodes."""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Optional

from app.codec.constants import ETHERTYPE_IPV6
from app.codec.mac import MacAddress
from app.protocol.datapath import EthernetFrame
from app.protocol.peers import ipv6_from_mac

NEXT_HEADER_ICMPV6 = 58
HOP_LIMIT = 255
ICMPV6_ECHO_REQUEST = 128
ICMPV6_ECHO_REPLY = 129

_IPV6_HEADER = struct.Struct("!IHBB16s16s")
_ECHO_HEADER = struct.Struct("!BBHHH")
_PSEUDO_HEADER = struct.Struct("!16s16sI3xB")


def ones_complement_sum(data: bytes) -> int:
    """16-bit ones-complement sum with end-around carry (odd length padded with zero)."""
    if len(data) % 2:
        data += b"\x00"
    total = sum(struct.unpack(f"!{len(data) // 2}H", data))
    while total >> 16:
        total = (total & 0xFFFF) + (total >> 16)
    return total


def icmpv6_checksum(src_ip: bytes, dst_ip: bytes, icmp_payload: bytes) -> int:
    """Internet checksum over the IPv6 pseudo-header and the ICMPv6 message.

    ``icmp_payload`` is the whole ICMPv6 message; its checksum field
    (bytes 2-3) is treated as zero.
    """
    message = icmp_payload[:2] + b"\x00\x00" + icmp_payload[4:] if len(icmp_payload) >= 4 else icmp_payload
    pseudo = _PSEUDO_HEADER.pack(src_ip, dst_ip, len(icmp_payload), NEXT_HEADER_ICMPV6)
    return ~ones_complement_sum(pseudo + message) & 0xFFFF


def verify_icmpv6(src_ip: bytes, dst_ip: bytes, message: bytes) -> bool:
    """True when the message's stored checksum makes the full sum 0xFFFF."""
    pseudo = _PSEUDO_HEADER.pack(src_ip, dst_ip, len(message), NEXT_HEADER_ICMPV6)
    return ones_complement_sum(pseudo + message) == 0xFFFF


@dataclass(frozen=True)
class EchoMessage:
    icmp_type: int
    ident: int
    seq: int
    payload: bytes
    src_ip: bytes
    dst_ip: bytes
    checksum_ok: bool

    @property
    def is_request(self) -> bool:
        return self.icmp_type == ICMPV6_ECHO_REQUEST


def _echo_frame(
    src: MacAddress,
    dst: MacAddress,
    icmp_type: int,
    ident: int,
    seq: int,
    payload: bytes,
) -> EthernetFrame:
    src_ip, dst_ip = ipv6_from_mac(src), ipv6_from_mac(dst)
    unsummed = _ECHO_HEADER.pack(icmp_type, 0, 0, ident, seq) + payload
    checksum = icmpv6_checksum(src_ip, dst_ip, unsummed)
    message = _ECHO_HEADER.pack(icmp_type, 0, checksum, ident, seq) + payload
    ipv6 = _IPV6_HEADER.pack(6 << 28, len(message), NEXT_HEADER_ICMPV6, HOP_LIMIT, src_ip, dst_ip)
    return EthernetFrame(dst=dst, src=src, ethertype=ETHERTYPE_IPV6, payload=ipv6 + message)


def build_echo_request(src: MacAddress, dst: MacAddress, ident: int, seq: int, payload: bytes) -> EthernetFrame:
    """Echo request between the link-local addresses derived from ``src`` and ``dst``."""
    return _echo_frame(src, dst, ICMPV6_ECHO_REQUEST, ident, seq, payload)


def build_echo_reply(responder: MacAddress, request: EthernetFrame, echo: EchoMessage) -> EthernetFrame:
    return _echo_frame(responder, request.src, ICMPV6_ECHO_REPLY, echo.ident, echo.seq, echo.payload)


def parse_echo(f: EthernetFrame) -> Optional[EchoMessage]:
    """Decode an ICMPv6 echo request or reply; anything else gives None."""
    if f.ethertype != ETHERTYPE_IPV6 or len(f.payload) < _IPV6_HEADER.size:
        return None
    vtf, length, next_header, _hops, src_ip, dst_ip = _IPV6_HEADER.unpack_from(f.payload)
    if vtf >> 28 != 6 or next_header != NEXT_HEADER_ICMPV6:
        return None
    message = f.payload[_IPV6_HEADER.size:_IPV6_HEADER.size + length]
    if len(message) != length or length < _ECHO_HEADER.size:
        return None
    icmp_type, code, _checksum, ident, seq = _ECHO_HEADER.unpack_from(message)
    if code != 0 or icmp_type not in (ICMPV6_ECHO_REQUEST, ICMPV6_ECHO_REPLY):
        return None
    return EchoMessage(
        icmp_type=icmp_type,
        ident=ident,
        seq=seq,
        payload=bytes(message[_ECHO_HEADER.size:]),
        src_ip=src_ip,
        dst_ip=dst_ip,
        checksum_ok=verify_icmpv6(src_ip, dst_ip, message),
    )


def echo_responder(node: MacAddress, f: EthernetFrame) -> Optional[EthernetFrame]:
    """Reply to a valid echo request addressed to ``node``'s link-local address."""
    echo = parse_echo(f)
    if echo is None or not echo.is_request or not echo.checksum_ok:
        return None
    if echo.dst_ip != ipv6_from_mac(node):
        return None
    return build_echo_reply(node, f, echo)
