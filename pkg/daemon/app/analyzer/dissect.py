"""Per-frame dissection of capture files."""

from __future__ import annotations

import io
from pathlib import Path
from typing import BinaryIO, Callable, List, Optional, Tuple, TypeVar

from app.codec.constants import TLV_ELECTION_PARAMS, TLV_HOSTNAME, TLV_NAMES, TLV_SYNC_PARAMS, TLV_VERSION
from app.codec.frames import (
    ActionFrame,
    FrameClass,
    Ieee80211Header,
    classify_frame,
    parse_action_frame,
    parse_data_frame,
)
from app.codec.params import decode_election_params, decode_hostname, decode_sync_params, decode_version
from app.codec.tlv import Tlv
from app.core.errors import BadRecord, CodecError, TruncatedRecord
from app.linklayer.frame import LinkFrame
from app.linklayer.pcap import PcapReader
from app.schemas.schemas import ActionSummary, DataSummary, ElectionSummary, FrameRecord, SyncSummary
from app.utils.logger import warn

T = TypeVar("T")


def _error(exc: Exception) -> str:
    return f"{type(exc).__name__}: {exc}"


def _decode(frame: ActionFrame, tlv_type: int, decode: Callable[[Tlv], T], errors: List[str]) -> Optional[T]:
    tlv = frame.find(tlv_type)
    if tlv is None:
        return None
    try:
        return decode(tlv)
    except CodecError as exc:
        errors.append(_error(exc))
        return None


def _action_summary(frame: ActionFrame, errors: List[str]) -> ActionSummary:
    sync = _decode(frame, TLV_SYNC_PARAMS, decode_sync_params, errors)
    election = _decode(frame, TLV_ELECTION_PARAMS, decode_election_params, errors)
    return ActionSummary(
        subtype=frame.subtype,
        version=frame.version,
        phy_tx_time=frame.phy_tx_time,
        target_tx_time=frame.target_tx_time,
        tlv_types=[tlv.tlv_type for tlv in frame.tlvs],
        sync=SyncSummary(
            master=str(sync.master_address),
            aw_seq=sync.aw_seq_number,
            af_period=sync.af_period,
            aw_common_length=sync.aw_common_length,
            remaining_aw_length=sync.remaining_aw_length,
            tx_counter=sync.tx_counter,
            channels=list(sync.channel_sequence.channels),
        ) if sync else None,
        election=ElectionSummary(
            master=str(election.master_address),
            sync=str(election.sync_address),
            distance=election.distance_to_master,
            master_metric=election.master_metric,
            master_counter=election.master_counter,
            self_metric=election.self_metric,
            self_counter=election.self_counter,
        ) if election else None,
        hostname=_decode(frame, TLV_HOSTNAME, decode_hostname, errors),
        awdl_version=_decode(frame, TLV_VERSION, decode_version, errors),
    )


def _addresses(raw: bytes) -> Tuple[Optional[str], Optional[str]]:
    try:
        hdr = Ieee80211Header.unpack(raw)
    except CodecError:
        return None, None
    return str(hdr.addr2), str(hdr.addr1)


def dissect_frame(f: LinkFrame) -> FrameRecord:
    """Describe one frame. Never raises: failures end up in ``parse_errors``."""
    raw = f.data
    src, dst = _addresses(raw)
    record = FrameRecord(t_us=f.timestamp, frame_class=FrameClass.OTHER.value, src=src, dst=dst, length=len(raw))
    frame_class = classify_frame(raw)
    if frame_class is FrameClass.AWDL_ACTION:
        try:
            frame = parse_action_frame(raw)
        except (CodecError, ValueError) as exc:
            record.parse_errors.append(_error(exc))
            return record
        record.frame_class = frame_class.value
        record.action = _action_summary(frame, record.parse_errors)
    elif frame_class is FrameClass.AWDL_DATA:
        try:
            data = parse_data_frame(raw)
        except CodecError as exc:
            record.parse_errors.append(_error(exc))
            return record
        record.frame_class = frame_class.value
        record.data = DataSummary(sequence=data.hdr.sequence, ethertype=data.hdr.ethertype, length=len(data.payload))
    return record


def dissect_stream(stream: BinaryIO, name: str = "<capture>") -> List[FrameRecord]:
    """Dissect every record of an open pcap stream, in file order.

    Raises:
        BadPcapMagic, UnsupportedLinktype, TruncatedRecord: the file header
        itself is unusable. A truncated record at the tail only ends the
        dissection with a warning.
    """
    reader = PcapReader(stream)
    records: List[FrameRecord] = []
    while True:
        try:
            frame = reader.next()
        except BadRecord as exc:
            records.append(FrameRecord(
                t_us=exc.timestamp or 0,
                frame_class=FrameClass.OTHER.value,
                length=exc.length,
                parse_errors=[_error(exc)],
            ))
            continue
        except TruncatedRecord as exc:
            warn(f"{name}: {exc}; {len(records)} records dissected")
            break
        if frame is None:
            break
        records.append(dissect_frame(frame))
    return records


def dissect_capture(path: str | Path) -> List[FrameRecord]:
    """One ``FrameRecord`` per capture record of the file at ``path``."""
    with open(path, "rb") as f:
        return dissect_stream(f, str(path))


def dissect_bytes(data: bytes) -> List[FrameRecord]:
    return dissect_stream(io.BytesIO(data))


def format_record(r: FrameRecord) -> str:
    """One human-readable line per record."""
    head = f"{r.t_us:>12} {r.frame_class:<10} {r.src or '-':<17} -> {r.dst or '-':<17} {r.length:>5}B"
    parts = [head]
    if r.action is not None:
        names = ",".join(TLV_NAMES.get(t, f"0x{t:02x}") for t in r.action.tlv_types)
        parts.append(f"subtype={r.action.subtype} tlvs=[{names}]")
        if r.action.election is not None:
            parts.append(f"master={r.action.election.master} dist={r.action.election.distance}")
        if r.action.sync is not None:
            parts.append(f"aw={r.action.sync.aw_seq} rem={r.action.sync.remaining_aw_length}")
        if r.action.hostname:
            parts.append(f"host={r.action.hostname}")
    if r.data is not None:
        parts.append(f"seq={r.data.sequence} type=0x{r.data.ethertype:04x} len={r.data.length}")
    if r.parse_errors:
        parts.append("errors=" + "; ".join(r.parse_errors))
    return "  ".join(parts)
