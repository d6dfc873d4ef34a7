"""Value layouts of the AWDL TLVs that carry discovery, election and sync state.

All multi-byte integers are little-endian.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import Sequence, Tuple

from app.codec.constants import (
    CHANNEL_SEQ_LEN,
    TLV_CHANNEL_SEQUENCE,
    TLV_ELECTION_PARAMS,
    TLV_HOSTNAME,
    TLV_SYNC_PARAMS,
    TLV_VERSION,
    VALID_CHANNELS,
)
from app.codec.mac import MacAddress
from app.codec.tlv import Tlv
from app.core.errors import BadEncodingId, InvariantViolation, TruncatedValue, WrongTlvType

_CHANSEQ_HEADER = struct.Struct("<BBBBH")
_SYNC_FIXED = struct.Struct("<BHBBHHHHHHBBBB6sBBHH")
_ELECTION = struct.Struct("<6s6sIIIII")
_VERSION = struct.Struct("<BB")

ChannelEntry = Tuple[int, int]  # (flags, channel)


def _check_type(t: Tlv, expected: int) -> None:
    if t.tlv_type != expected:
        raise WrongTlvType(f"expected TLV 0x{expected:02x}, got 0x{t.tlv_type:02x}")


def _check_size(value: bytes, size: int, what: str) -> None:
    if len(value) < size:
        raise TruncatedValue(f"{what} need {size} bytes, got {len(value)}")
    if len(value) > size:
        raise InvariantViolation(f"{what} take {size} bytes, got {len(value)}")


@dataclass(frozen=True)
class ChannelSequence:
    """Sixteen-slot channel schedule; advisory only, the engine never retunes."""

    entries: Tuple[ChannelEntry, ...]
    step_count: int = 4
    fill_channel: int = 0xFFFF
    encoding: int = 1
    duplicate: int = 0

    def __post_init__(self) -> None:
        entries = tuple((int(f), int(c)) for f, c in self.entries)
        object.__setattr__(self, "entries", entries)
        if not 1 <= len(entries) <= CHANNEL_SEQ_LEN:
            raise InvariantViolation(f"channel sequence needs 1..{CHANNEL_SEQ_LEN} entries, got {len(entries)}")
        if self.encoding not in (0, 1):
            raise BadEncodingId(f"channel sequence encoding {self.encoding} not in {{0, 1}}")
        for flags, channel in entries:
            if channel and channel not in VALID_CHANNELS:
                raise InvariantViolation(f"channel {channel} is not a valid 802.11 channel")
            if not (0 <= flags <= 0xFF and 0 <= channel <= 0xFF):
                raise InvariantViolation(f"channel entry {(flags, channel)} does not fit two bytes")

    @classmethod
    def uniform(cls, channel: int, flags: int = 0) -> "ChannelSequence":
        return cls(entries=((flags, channel),) * CHANNEL_SEQ_LEN)

    @classmethod
    def from_channels(cls, channels: Sequence[int]) -> "ChannelSequence":
        return cls(entries=tuple((0, c) for c in channels)).padded()

    def padded(self) -> "ChannelSequence":
        """Return a copy with exactly 16 entries, repeating the last one."""
        missing = CHANNEL_SEQ_LEN - len(self.entries)
        if not missing:
            return self
        entries = self.entries + (self.entries[-1],) * missing
        return ChannelSequence(entries, self.step_count, self.fill_channel, self.encoding, self.duplicate)

    @property
    def channels(self) -> Tuple[int, ...]:
        return tuple(c for _, c in self.entries)


def encode_channel_sequence(c: ChannelSequence) -> bytes:
    c = c.padded()
    header = _CHANSEQ_HEADER.pack(CHANNEL_SEQ_LEN - 1, c.encoding, c.duplicate, c.step_count - 1, c.fill_channel)
    if c.encoding == 0:
        if any(flags for flags, _ in c.entries):
            raise InvariantViolation("encoding 0 carries bare channels and cannot represent flags")
        return header + bytes(ch for _, ch in c.entries)
    return header + b"".join(bytes(entry) for entry in c.entries)


def channel_sequence_length(raw: bytes, offset: int = 0) -> int:
    """Number of bytes the channel sequence starting at ``offset`` occupies."""
    if len(raw) - offset < _CHANSEQ_HEADER.size:
        raise TruncatedValue("channel sequence header is truncated")
    encoding = raw[offset + 1]
    if encoding not in (0, 1):
        raise BadEncodingId(f"channel sequence encoding {encoding} not in {{0, 1}}")
    return _CHANSEQ_HEADER.size + CHANNEL_SEQ_LEN * (encoding + 1)


def decode_channel_sequence(raw: bytes) -> ChannelSequence:
    """Decode a channel sequence that fills ``raw`` exactly.

    Raises:
        BadEncodingId: encoding byte not 0 or 1.
        TruncatedValue: fewer bytes than the 16 entries need.
        InvariantViolation: count byte is not 15, a channel is invalid, or
            bytes follow the last entry.
    """
    size = channel_sequence_length(raw)
    if len(raw) < size:
        raise TruncatedValue(f"channel sequence needs {size} bytes, got {len(raw)}")
    if len(raw) > size:
        raise InvariantViolation(f"{len(raw) - size} trailing bytes after the channel sequence")
    count, encoding, duplicate, step, fill = _CHANSEQ_HEADER.unpack_from(raw)
    if count != CHANNEL_SEQ_LEN - 1:
        raise InvariantViolation(f"channel sequence count byte {count} != {CHANNEL_SEQ_LEN - 1}")
    body = raw[_CHANSEQ_HEADER.size:size]
    if encoding == 0:
        entries = tuple((0, ch) for ch in body)
    else:
        entries = tuple((body[i], body[i + 1]) for i in range(0, len(body), 2))
    return ChannelSequence(entries, step + 1, fill, encoding, duplicate)


def build_channel_sequence_tlv(c: ChannelSequence) -> Tlv:
    return Tlv(TLV_CHANNEL_SEQUENCE, encode_channel_sequence(c))


@dataclass(frozen=True)
class SyncParams:
    next_aw_channel: int
    tx_counter: int
    master_channel: int
    guard_time: int
    aw_period: int
    af_period: int
    flags: int
    aw_ext_length: int
    aw_common_length: int
    remaining_aw_length: int
    ext_counts: Tuple[int, int, int, int]
    master_address: MacAddress
    presence_mode: int
    aw_seq_number: int
    ap_alignment_delta: int
    channel_sequence: ChannelSequence = field(default_factory=lambda: ChannelSequence.uniform(6))
    reserved: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "ext_counts", tuple(self.ext_counts))
        if len(self.ext_counts) != 4:
            raise InvariantViolation("ext_counts needs four values (min, multicast, unicast, af)")
        if self.remaining_aw_length > self.aw_common_length:
            raise InvariantViolation(
                f"remaining_aw_length {self.remaining_aw_length} > aw_common_length {self.aw_common_length}"
            )
        if self.aw_period <= 0 or self.af_period <= 0:
            raise InvariantViolation("aw_period and af_period must be positive")


def encode_sync_params(s: SyncParams) -> bytes:
    return _SYNC_FIXED.pack(
        s.next_aw_channel,
        s.tx_counter,
        s.master_channel,
        s.guard_time,
        s.aw_period,
        s.af_period,
        s.flags,
        s.aw_ext_length,
        s.aw_common_length,
        s.remaining_aw_length,
        *s.ext_counts,
        s.master_address.octets,
        s.presence_mode,
        s.reserved,
        s.aw_seq_number,
        s.ap_alignment_delta,
    ) + encode_channel_sequence(s.channel_sequence)


def build_sync_tlv(s: SyncParams) -> Tlv:
    return Tlv(TLV_SYNC_PARAMS, encode_sync_params(s))


def decode_sync_params(t: Tlv) -> SyncParams:
    """Decode a sync-parameters TLV (type 0x04).

    The embedded channel sequence must end the value; trailing bytes raise
    ``InvariantViolation`` so that every accepted value re-encodes unchanged.

    Raises:
        WrongTlvType, TruncatedValue, InvariantViolation, BadEncodingId
    """
    _check_type(t, TLV_SYNC_PARAMS)
    raw = t.value
    if len(raw) < _SYNC_FIXED.size:
        raise TruncatedValue(f"sync params need {_SYNC_FIXED.size} fixed bytes, got {len(raw)}")
    (
        next_aw_channel,
        tx_counter,
        master_channel,
        guard_time,
        aw_period,
        af_period,
        flags,
        aw_ext_length,
        aw_common_length,
        remaining_aw_length,
        min_ext,
        max_multicast_ext,
        max_unicast_ext,
        max_af_ext,
        master,
        presence_mode,
        reserved,
        aw_seq_number,
        ap_alignment_delta,
    ) = _SYNC_FIXED.unpack_from(raw)
    return SyncParams(
        next_aw_channel=next_aw_channel,
        tx_counter=tx_counter,
        master_channel=master_channel,
        guard_time=guard_time,
        aw_period=aw_period,
        af_period=af_period,
        flags=flags,
        aw_ext_length=aw_ext_length,
        aw_common_length=aw_common_length,
        remaining_aw_length=remaining_aw_length,
        ext_counts=(min_ext, max_multicast_ext, max_unicast_ext, max_af_ext),
        master_address=MacAddress(master),
        presence_mode=presence_mode,
        aw_seq_number=aw_seq_number,
        ap_alignment_delta=ap_alignment_delta,
        channel_sequence=decode_channel_sequence(raw[_SYNC_FIXED.size:]),
        reserved=reserved,
    )


@dataclass(frozen=True)
class ElectionParams:
    master_address: MacAddress
    sync_address: MacAddress
    master_counter: int
    distance_to_master: int
    master_metric: int
    self_metric: int
    self_counter: int


def encode_election_params(e: ElectionParams) -> bytes:
    return _ELECTION.pack(
        e.master_address.octets,
        e.sync_address.octets,
        e.master_counter,
        e.distance_to_master,
        e.master_metric,
        e.self_metric,
        e.self_counter,
    )


def decode_election_params(t: Tlv) -> ElectionParams:
    """Decode an election-parameters TLV (type 0x18).

    Cross-record semantics (distance 0 naming someone else) are not checked.

    Raises:
        WrongTlvType, TruncatedValue, InvariantViolation (value longer than the layout)
    """
    _check_type(t, TLV_ELECTION_PARAMS)
    _check_size(t.value, _ELECTION.size, "election params")
    master, sync, counter, distance, master_metric, self_metric, self_counter = _ELECTION.unpack_from(t.value)
    return ElectionParams(
        master_address=MacAddress(master),
        sync_address=MacAddress(sync),
        master_counter=counter,
        distance_to_master=distance,
        master_metric=master_metric,
        self_metric=self_metric,
        self_counter=self_counter,
    )


def build_hostname_tlv(hostname: str) -> Tlv:
    return Tlv(TLV_HOSTNAME, hostname.encode("utf-8"))


def decode_hostname(t: Tlv) -> str:
    _check_type(t, TLV_HOSTNAME)
    try:
        return t.value.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise InvariantViolation(f"hostname is not UTF-8: {exc.reason}") from None


def build_version_tlv(version: int, device_class: int) -> Tlv:
    return Tlv(TLV_VERSION, _VERSION.pack(version, device_class))


def decode_version(t: Tlv) -> Tuple[int, int]:
    """Return ``(version, device_class)``."""
    _check_type(t, TLV_VERSION)
    _check_size(t.value, _VERSION.size, "version TLV")
    return _VERSION.unpack_from(t.value)
