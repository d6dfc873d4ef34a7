"""Ethernet <-> AWDL data translation."""

import random

import pytest

from app.codec.frames import FrameClass, classify_frame, parse_data_frame
from app.core.errors import BadMagic, OversizeFrame, TruncatedFrame
from app.protocol.datapath import (
    DatapathState,
    EthernetFrame,
    awdl_to_ethernet,
    count_rx,
    ethernet_to_awdl,
)
from tests.conftest import mac

IPV6 = 0x86DD


def _eth(payload: bytes = b"\x60" + bytes(39), dst=None) -> EthernetFrame:
    return EthernetFrame(dst=dst or mac(2), src=mac(1), ethertype=IPV6, payload=payload)


class TestEthernetFrame:
    def test_pack_unpack(self):
        frame = _eth(b"abc")
        raw = frame.pack()
        assert len(raw) == 14 + 3
        assert EthernetFrame.unpack(raw) == frame

    def test_short_input(self):
        with pytest.raises(ValueError):
            EthernetFrame.unpack(bytes(13))


class TestEthernetToAwdl:
    def test_round_trip_random(self):
        rng = random.Random(21)
        st = DatapathState()
        for _ in range(1000):
            frame = EthernetFrame(
                dst=mac(rng.randrange(1, 1 << 40)),
                src=mac(rng.randrange(1, 1 << 40)),
                ethertype=rng.randrange(0x0600, 0x10000),
                payload=rng.randbytes(rng.randrange(0, 1500)),
            )
            raw, st = ethernet_to_awdl(frame, st)
            assert classify_frame(raw) is FrameClass.AWDL_DATA
            assert awdl_to_ethernet(raw) == frame

    def test_mtu_sized_payload(self):
        frame = _eth(bytes(range(256)) * 5)
        raw, _ = ethernet_to_awdl(frame, DatapathState())
        assert awdl_to_ethernet(raw).payload == frame.payload

    def test_sequence_increments(self):
        st = DatapathState(seq_counter=41)
        first, st = ethernet_to_awdl(_eth(), st)
        second, st = ethernet_to_awdl(_eth(), st)
        assert parse_data_frame(first).hdr.sequence == 41
        assert parse_data_frame(second).hdr.sequence == 42
        assert st.seq_counter == 43
        assert st.tx_frames == 2

    def test_sequence_wraps(self):
        raw, st = ethernet_to_awdl(_eth(), DatapathState(seq_counter=65535))
        assert parse_data_frame(raw).hdr.sequence == 65535
        assert st.seq_counter == 0

    def test_multicast_destination_kept(self):
        group = mac(0x3333_0000_0001 - 0x020000000000)
        raw, _ = ethernet_to_awdl(_eth(dst=group), DatapathState())
        assert awdl_to_ethernet(raw).dst == group

    def test_oversize(self):
        with pytest.raises(OversizeFrame):
            ethernet_to_awdl(_eth(bytes(2300)), DatapathState())


class TestAwdlToEthernet:
    def test_truncated(self):
        raw, _ = ethernet_to_awdl(_eth(b""), DatapathState())
        with pytest.raises(TruncatedFrame):
            awdl_to_ethernet(raw[:-1])

    def test_bad_magic(self):
        raw, _ = ethernet_to_awdl(_eth(), DatapathState())
        broken = raw[:32] + b"\x00\x00" + raw[34:]
        with pytest.raises(BadMagic):
            awdl_to_ethernet(broken)

    def test_receive_does_not_touch_sequence(self):
        st = DatapathState(seq_counter=7, tx_frames=3)
        after = count_rx(st)
        assert after.seq_counter == 7
        assert after.tx_frames == 3
        assert after.rx_frames == 1
