"""Availability-window timekeeping.

Times are integer microseconds on the node's local clock. An AW lasts
16 TU; AW sequence numbers wrap at 2^16; the channel sequence repeats every
64 AWs with four AWs per slot.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Tuple

from app.codec.constants import (
    AW_DURATION_US,
    CHANNEL_SEQ_PERIOD_AWS,
    DEFAULT_AF_PERIOD_TU,
    SLOT_AWS,
    TU_US,
)
from app.codec.params import ChannelSequence, SyncParams
from app.core.errors import InvariantViolation
from app.protocol.election import ElectionState

SEQ_MODULUS = 1 << 16


@dataclass(frozen=True)
class SyncState:
    anchor_time: int
    anchor_seq: int
    channel_sequence: ChannelSequence
    af_period: int = DEFAULT_AF_PERIOD_TU * TU_US
    aw_duration: int = AW_DURATION_US
    slot_aws: int = SLOT_AWS

    def __post_init__(self) -> None:
        if self.aw_duration != AW_DURATION_US:
            raise InvariantViolation(f"aw_duration must be {AW_DURATION_US} us")
        if self.af_period <= 0:
            raise InvariantViolation("af_period must be positive")
        object.__setattr__(self, "channel_sequence", self.channel_sequence.padded())
        object.__setattr__(self, "anchor_seq", self.anchor_seq % SEQ_MODULUS)

    @classmethod
    def initial(cls, now: int, seq: int, channel: int, af_period_tu: int = DEFAULT_AF_PERIOD_TU) -> "SyncState":
        return cls(
            anchor_time=now,
            anchor_seq=seq,
            channel_sequence=ChannelSequence.uniform(channel),
            af_period=af_period_tu * TU_US,
        )


def aw_seq_at(s: SyncState, t: int) -> Tuple[int, int]:
    """Return ``(aw sequence number, microseconds elapsed in that AW)`` at local time ``t``."""
    aws, elapsed = divmod(t - s.anchor_time, s.aw_duration)
    return (s.anchor_seq + aws) % SEQ_MODULUS, elapsed


def channel_for_seq(s: SyncState, seq: int) -> int:
    """Advisory channel for AW ``seq``; the engine stays on its configured channel."""
    return s.channel_sequence.entries[(seq % CHANNEL_SEQ_PERIOD_AWS) // s.slot_aws][1]


def adopt_timing(s: SyncState, sp: SyncParams, frame_target_tx: int) -> SyncState:
    """Re-anchor ``s`` on the master clock described by ``sp``.

    Args:
        s: Local sync state.
        sp: Sync parameters received from this node's sync master.
        frame_target_tx: Local time the frame is taken to have been sent at.

    Raises:
        InvariantViolation: ``sp`` claims more remaining than common AW length.
    """
    if sp.remaining_aw_length > sp.aw_common_length:
        raise InvariantViolation(
            f"remaining_aw_length {sp.remaining_aw_length} > aw_common_length {sp.aw_common_length}"
        )
    elapsed = (sp.aw_common_length - sp.remaining_aw_length) * TU_US
    return replace(
        s,
        anchor_time=frame_target_tx - elapsed,
        anchor_seq=sp.aw_seq_number,
        channel_sequence=sp.channel_sequence.padded(),
    )


def build_sync_params(s: SyncState, e: ElectionState, now: int, next_af: int) -> SyncParams:
    """Describe ``s`` as seen at ``next_af``, the frame's target transmit time."""
    seq, elapsed = aw_seq_at(s, next_af)
    remaining_tu = (s.aw_duration - elapsed) // TU_US
    aw_tu = s.aw_duration // TU_US
    channel = channel_for_seq(s, seq)
    tx_counter = max(0, -(-(next_af - now) // TU_US))
    return SyncParams(
        next_aw_channel=channel,
        tx_counter=min(tx_counter, 0xFFFF),
        master_channel=channel,
        guard_time=0,
        aw_period=aw_tu,
        af_period=s.af_period // TU_US,
        flags=0,
        aw_ext_length=aw_tu,
        aw_common_length=aw_tu,
        remaining_aw_length=remaining_tu,
        ext_counts=(0, 0, 0, 0),
        master_address=e.top_master,
        presence_mode=0,
        aw_seq_number=seq,
        ap_alignment_delta=0,
        channel_sequence=s.channel_sequence,
    )


def next_af_time(s: SyncState, now: int) -> int:
    """Smallest ``t > now`` on the action-frame grid anchored at ``s.anchor_time``."""
    periods = (now - s.anchor_time) // s.af_period + 1
    return s.anchor_time + periods * s.af_period


def predicted_next_aw_start(
    capture_time: int,
    aw_common_length: int,
    remaining_aw_length: int,
    aw_duration: int = AW_DURATION_US,
) -> int:
    """Next AW start implied by a frame's AW lengths (in TU), observed at ``capture_time``."""
    elapsed = (aw_common_length - remaining_aw_length) * TU_US
    return capture_time - elapsed + aw_duration


def sync_error(a_pred: int, b_pred: int, aw_duration: int = AW_DURATION_US) -> int:
    """Phase distance between two predicted AW starts, in ``[0, aw_duration/2]``."""
    d = abs(a_pred - b_pred) % aw_duration
    return min(d, aw_duration - d)


def local_time(t: int, ppm: int) -> int:
    """Local clock reading at global time ``t`` for a clock skewed by ``ppm``."""
    return t + (t * ppm) // 1_000_000


def global_time(local: int, ppm: int) -> int:
    """Earliest global time at which the skewed clock reads at least ``local``."""
    t = (local * 1_000_000) // (1_000_000 + ppm)
    while local_time(t, ppm) < local:
        t += 1
    while local_time(t - 1, ppm) >= local:
        t -= 1
    return t
