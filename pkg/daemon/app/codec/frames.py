"""802.11 framing, the AWDL BSSID classifier and the action/data frame codecs."""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from enum import Enum, IntEnum
from typing import Optional, Tuple

from app.codec.constants import (
    ACTION_FIXED_LEN,
    APPLE_OUI,
    AWDL_ACTION_TYPE,
    AWDL_ACTION_VERSION,
    AWDL_BSSID_BYTES,
    CATEGORY_VENDOR,
    DATA_HEADER_LEN,
    DATA_MAGIC,
    FC_FLAGS_REJECT,
    FC_SUBTYPE_ACTION,
    FC_SUBTYPE_DATA,
    FC_TYPE_DATA,
    FC_TYPE_MGMT,
    IEEE80211_HEADER_LEN,
    LLC_SNAP_HEADER,
    MAX_BODY_LEN,
    MAX_DATA_PAYLOAD,
)
from app.codec.mac import AWDL_BSSID, BROADCAST, MacAddress
from app.codec.tlv import Tlv, parse_tlvs, serialize_tlvs
from app.core.errors import BadMagic, InvariantViolation, OversizeFrame, TruncatedFrame

_HEADER = struct.Struct("<2sH6s6s6sH")
_ACTION_FIXED = struct.Struct("<B3sBBBBII")
_DATA_HEADER = struct.Struct("<2sHH")
_ETHERTYPE = struct.Struct(">H")

assert _HEADER.size == IEEE80211_HEADER_LEN
assert _ACTION_FIXED.size == ACTION_FIXED_LEN


class FrameClass(str, Enum):
    """Result of the BSSID classifier."""

    AWDL_ACTION = "AwdlAction"
    AWDL_DATA = "AwdlData"
    OTHER = "Other"


class ActionSubtype(IntEnum):
    PSF = 0
    MIF = 3


def _frame_control(fc_type: int, fc_subtype: int) -> bytes:
    return bytes([(fc_subtype << 4) | (fc_type << 2), 0])


FC_ACTION = _frame_control(FC_TYPE_MGMT, FC_SUBTYPE_ACTION)
FC_DATA = _frame_control(FC_TYPE_DATA, FC_SUBTYPE_DATA)


@dataclass(frozen=True)
class Ieee80211Header:
    """Three-address 802.11 header (no QoS, no HT control)."""

    frame_control: bytes
    duration: int
    addr1: MacAddress
    addr2: MacAddress
    addr3: MacAddress
    seq_ctrl: int = 0

    @classmethod
    def action(cls, src: MacAddress, dst: MacAddress = BROADCAST, seq: int = 0) -> "Ieee80211Header":
        return cls(FC_ACTION, 0, dst, src, AWDL_BSSID, (seq & 0x0FFF) << 4)

    @classmethod
    def data(cls, src: MacAddress, dst: MacAddress, seq: int = 0) -> "Ieee80211Header":
        return cls(FC_DATA, 0, dst, src, AWDL_BSSID, (seq & 0x0FFF) << 4)

    def pack(self) -> bytes:
        return _HEADER.pack(
            self.frame_control,
            self.duration,
            self.addr1.octets,
            self.addr2.octets,
            self.addr3.octets,
            self.seq_ctrl,
        )

    @classmethod
    def unpack(cls, raw: bytes) -> "Ieee80211Header":
        if len(raw) < IEEE80211_HEADER_LEN:
            raise TruncatedFrame(f"802.11 header needs {IEEE80211_HEADER_LEN} bytes, got {len(raw)}")
        fc, duration, a1, a2, a3, seq_ctrl = _HEADER.unpack_from(raw)
        return cls(fc, duration, MacAddress(a1), MacAddress(a2), MacAddress(a3), seq_ctrl)


@dataclass(frozen=True)
class ActionFrame:
    """A parsed AWDL vendor action frame."""

    hdr: Ieee80211Header
    subtype: int
    phy_tx_time: int
    target_tx_time: int
    tlvs: Tuple[Tlv, ...] = ()
    version: int = AWDL_ACTION_VERSION
    reserved: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "tlvs", tuple(self.tlvs))
        if self.hdr.addr3 != AWDL_BSSID:
            raise ValueError(f"action frame addr3 must be the AWDL BSSID, got {self.hdr.addr3}")

    @property
    def source(self) -> MacAddress:
        return self.hdr.addr2

    def find(self, tlv_type: int) -> Optional[Tlv]:
        """Return the first TLV of ``tlv_type`` in wire order."""
        for tlv in self.tlvs:
            if tlv.tlv_type == tlv_type:
                return tlv
        return None


@dataclass(frozen=True)
class DataHeader:
    magic: bytes = DATA_MAGIC
    sequence: int = 0
    ethertype: int = 0
    pad: int = 0


@dataclass(frozen=True)
class DataFrame:
    """A parsed AWDL data frame; ``wlan`` keeps the 802.11 header as received."""

    wlan: Ieee80211Header
    hdr: DataHeader
    payload: bytes = field(default=b"")

    @property
    def src(self) -> MacAddress:
        return self.wlan.addr2

    @property
    def dst(self) -> MacAddress:
        return self.wlan.addr1


def _frame_kind(raw: bytes) -> Optional[Tuple[int, int]]:
    if len(raw) < IEEE80211_HEADER_LEN:
        return None
    fc0, fc1 = raw[0], raw[1]
    if fc0 & 0x03 or fc1 & FC_FLAGS_REJECT:
        return None
    return (fc0 >> 2) & 0x03, fc0 >> 4


def classify_frame(raw: bytes) -> FrameClass:
    """Classify a raw 802.11 frame (no radiotap) by the AWDL BSSID filter.

    Never raises: truncated and malformed input classifies as ``Other``.
    """
    kind = _frame_kind(raw)
    if kind is None or raw[16:22] != AWDL_BSSID_BYTES:
        return FrameClass.OTHER
    body = raw[IEEE80211_HEADER_LEN:]
    if kind == (FC_TYPE_MGMT, FC_SUBTYPE_ACTION):
        if len(body) >= 5 and body[0] == CATEGORY_VENDOR and body[1:4] == APPLE_OUI and body[4] == AWDL_ACTION_TYPE:
            return FrameClass.AWDL_ACTION
    elif kind == (FC_TYPE_DATA, FC_SUBTYPE_DATA):
        if body[: len(LLC_SNAP_HEADER)] == LLC_SNAP_HEADER:
            return FrameClass.AWDL_DATA
    return FrameClass.OTHER


def parse_action_frame(raw: bytes) -> ActionFrame:
    """Parse an AWDL action frame; unknown TLVs are kept as opaque values.

    Raises:
        TruncatedFrame: header or fixed body part is short.
        TruncatedTlv: a TLV's declared length overruns the body.
        InvariantViolation: addr3 is not the AWDL BSSID, or the body does not
            start with the Apple vendor category, OUI and AWDL type.
        OversizeFrame: the body exceeds the 802.11 body limit.
    """
    hdr = Ieee80211Header.unpack(raw)
    if hdr.addr3 != AWDL_BSSID:
        raise InvariantViolation(f"action frame addr3 {hdr.addr3} is not the AWDL BSSID")
    body = raw[IEEE80211_HEADER_LEN:]
    if len(body) < ACTION_FIXED_LEN:
        raise TruncatedFrame(f"action body needs {ACTION_FIXED_LEN} bytes, got {len(body)}")
    if len(body) > MAX_BODY_LEN:
        raise OversizeFrame(f"action body of {len(body)} bytes exceeds {MAX_BODY_LEN}")
    category, oui, action_type, version, subtype, reserved, phy, target = _ACTION_FIXED.unpack_from(body)
    if (category, oui, action_type) != (CATEGORY_VENDOR, APPLE_OUI, AWDL_ACTION_TYPE):
        raise InvariantViolation(
            f"action body starts {category:02x} {oui.hex()} {action_type:02x}, not an AWDL vendor action"
        )
    tlvs = parse_tlvs(body[ACTION_FIXED_LEN:])
    return ActionFrame(
        hdr=hdr,
        subtype=subtype,
        phy_tx_time=phy,
        target_tx_time=target,
        tlvs=tlvs,
        version=version,
        reserved=reserved,
    )


def serialize_action_frame(f: ActionFrame) -> bytes:
    """Serialize an action frame.

    Raises:
        OversizeFrame: the body exceeds the 802.11 body limit.
    """
    body = _ACTION_FIXED.pack(
        CATEGORY_VENDOR,
        APPLE_OUI,
        AWDL_ACTION_TYPE,
        f.version,
        int(f.subtype),
        f.reserved,
        f.phy_tx_time & 0xFFFFFFFF,
        f.target_tx_time & 0xFFFFFFFF,
    ) + serialize_tlvs(f.tlvs)
    if len(body) > MAX_BODY_LEN:
        raise OversizeFrame(f"action body of {len(body)} bytes exceeds {MAX_BODY_LEN}")
    return f.hdr.pack() + body


def parse_data_frame(raw: bytes) -> DataFrame:
    """Split an AWDL data frame into 802.11 header, data header and payload.

    Raises:
        TruncatedFrame: shorter than header + SNAP + data header.
        InvariantViolation: the LLC/SNAP header is not the AWDL one.
        BadMagic: data header magic is not ``03 04``.
        OversizeFrame: the payload exceeds the 802.11 body limit.
    """
    wlan = Ieee80211Header.unpack(raw)
    start = IEEE80211_HEADER_LEN + len(LLC_SNAP_HEADER)
    if len(raw) < start + DATA_HEADER_LEN:
        raise TruncatedFrame(f"data frame needs {start + DATA_HEADER_LEN} bytes, got {len(raw)}")
    snap = raw[IEEE80211_HEADER_LEN:start]
    if snap != LLC_SNAP_HEADER:
        raise InvariantViolation(f"LLC/SNAP header {snap.hex()} is not {LLC_SNAP_HEADER.hex()}")
    magic, sequence, pad = _DATA_HEADER.unpack_from(raw, start)
    if magic != DATA_MAGIC:
        raise BadMagic(f"data header magic {magic.hex()} != {DATA_MAGIC.hex()}")
    (ethertype,) = _ETHERTYPE.unpack_from(raw, start + _DATA_HEADER.size)
    payload = raw[start + DATA_HEADER_LEN:]
    if len(payload) > MAX_DATA_PAYLOAD:
        raise OversizeFrame(f"payload of {len(payload)} bytes exceeds {MAX_DATA_PAYLOAD}")
    return DataFrame(
        wlan=wlan,
        hdr=DataHeader(magic=magic, sequence=sequence, ethertype=ethertype, pad=pad),
        payload=bytes(payload),
    )


def serialize_data_frame(f: DataFrame) -> bytes:
    """Serialize a data frame from its stored 802.11 header.

    Raises:
        OversizeFrame: payload does not fit the 802.11 body limit.
    """
    if len(f.payload) > MAX_DATA_PAYLOAD:
        raise OversizeFrame(f"payload of {len(f.payload)} bytes exceeds {MAX_DATA_PAYLOAD}")
    return (
        f.wlan.pack()
        + LLC_SNAP_HEADER
        + _DATA_HEADER.pack(f.hdr.magic, f.hdr.sequence, f.hdr.pad)
        + _ETHERTYPE.pack(f.hdr.ethertype)
        + f.payload
    )


def build_data_frame(src: MacAddress, dst: MacAddress, hdr: DataHeader, payload: bytes) -> bytes:
    """Wrap ``payload`` in 802.11 + SNAP + AWDL data header.

    Raises:
        OversizeFrame: payload does not fit the 802.11 body limit.
    """
    return serialize_data_frame(DataFrame(Ieee80211Header.data(src, dst, hdr.sequence), hdr, bytes(payload)))
