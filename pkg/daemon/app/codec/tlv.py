"""Type-length-value records: 1-byte type, little-endian u16 length, value."""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Iterable, List

from app.core.errors import TruncatedTlv

_TLV_HEADER = struct.Struct("<BH")


@dataclass(frozen=True)
class Tlv:
    tlv_type: int
    value: bytes = b""

    def __post_init__(self) -> None:
        if not 0 <= self.tlv_type <= 0xFF:
            raise ValueError(f"TLV type {self.tlv_type} does not fit one byte")
        if len(self.value) > 0xFFFF:
            raise ValueError(f"TLV value of {len(self.value)} bytes exceeds 65535")
        if not isinstance(self.value, bytes):
            object.__setattr__(self, "value", bytes(self.value))

    def pack(self) -> bytes:
        return _TLV_HEADER.pack(self.tlv_type, len(self.value)) + self.value


def parse_tlvs(data: bytes) -> List[Tlv]:
    """Split a TLV area into records, in wire order.

    Raises:
        TruncatedTlv: a header or a declared value runs past the end.
    """
    tlvs: List[Tlv] = []
    offset = 0
    end = len(data)
    while offset < end:
        if end - offset < _TLV_HEADER.size:
            raise TruncatedTlv(f"{end - offset} trailing byte(s) at offset {offset} cannot hold a TLV header")
        tlv_type, length = _TLV_HEADER.unpack_from(data, offset)
        offset += _TLV_HEADER.size
        if offset + length > end:
            raise TruncatedTlv(
                f"TLV 0x{tlv_type:02x} declares {length} bytes but only {end - offset} remain"
            )
        tlvs.append(Tlv(tlv_type, bytes(data[offset:offset + length])))
        offset += length
    return tlvs


def serialize_tlvs(tlvs: Iterable[Tlv]) -> bytes:
    return b"".join(tlv.pack() for tlv in tlvs)
