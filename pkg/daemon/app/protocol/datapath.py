"""Ethernet <-> AWDL data frame translation with the outbound sequence counter."""

from __future__ import annotations

import struct
from dataclasses import dataclass, replace
from typing import Tuple

from app.codec.frames import DataFrame, DataHeader, build_data_frame, parse_data_frame
from app.codec.mac import MacAddress

_ETH_HEADER = struct.Struct("!6s6sH")


@dataclass(frozen=True)
class EthernetFrame:
    dst: MacAddress
    src: MacAddress
    ethertype: int
    payload: bytes = b""

    def pack(self) -> bytes:
        return _ETH_HEADER.pack(self.dst.octets, self.src.octets, self.ethertype) + self.payload

    @classmethod
    def unpack(cls, raw: bytes) -> "EthernetFrame":
        if len(raw) < _ETH_HEADER.size:
            raise ValueError(f"Ethernet frame needs {_ETH_HEADER.size} bytes, got {len(raw)}")
        dst, src, ethertype = _ETH_HEADER.unpack_from(raw)
        return cls(MacAddress(dst), MacAddress(src), ethertype, bytes(raw[_ETH_HEADER.size:]))


@dataclass(frozen=True)
class DatapathState:
    seq_counter: int = 0
    tx_frames: int = 0
    rx_frames: int = 0


def ethernet_from_data_frame(frame: DataFrame) -> EthernetFrame:
    return EthernetFrame(dst=frame.dst, src=frame.src, ethertype=frame.hdr.ethertype, payload=frame.payload)


def awdl_to_ethernet(raw: bytes) -> EthernetFrame:
    """Strip the AWDL data header and rebuild the Ethernet frame.

    Raises:
        TruncatedFrame: too short for the data header.
        BadMagic: not an AWDL data header.
    """
    return ethernet_from_data_frame(parse_data_frame(raw))


def ethernet_to_awdl(f: EthernetFrame, st: DatapathState) -> Tuple[bytes, DatapathState]:
    """Wrap an Ethernet frame for the air and advance the sequence counter.

    Raises:
        OversizeFrame: payload does not fit an 802.11 body.
    """
    raw = build_data_frame(f.src, f.dst, DataHeader(sequence=st.seq_counter, ethertype=f.ethertype), f.payload)
    return raw, replace(st, seq_counter=(st.seq_counter + 1) & 0xFFFF, tx_frames=st.tx_frames + 1)


def count_rx(st: DatapathState) -> DatapathState:
    return replace(st, rx_frames=st.rx_frames + 1)
