"""Link layer: simulated channel, pcap files and frame ports."""

import io
import random
import struct

import pytest

from app.core.errors import (
    BadPcapMagic,
    BadRecord,
    PortClosed,
    TruncatedRecord,
    UnknownNode,
    UnsupportedLinktype,
)
from app.linklayer.frame import LinkFrame
from app.linklayer.pcap import MINIMAL_RADIOTAP, PcapReader, PcapWriter, pcap_open_writer, strip_radiotap
from app.linklayer.ports import (
    LoopbackPort,
    MemoryHostPort,
    PcapReplayPort,
    RecordingPort,
    ScriptedPort,
    SimPort,
    open_frame_port,
    open_host_port,
)
from app.linklayer.sim_channel import SimChannel, SimChannelConfig, blocked_pairs
from app.protocol.datapath import EthernetFrame
from tests.conftest import mac


def _channel(nodes=("a", "b", "c"), **config) -> SimChannel:
    ch = SimChannel(SimChannelConfig(**config))
    for node in nodes:
        ch.register(node)
    return ch


def _be_pcap(linktype: int, records) -> bytes:
    out = struct.pack(">IHHiIII", 0xA1B2C3D4, 2, 4, 0, 0, 65535, linktype)
    for ts, data in records:
        sec, usec = divmod(ts, 1_000_000)
        out += struct.pack(">IIII", sec, usec, len(data), len(data)) + data
    return out


def _le_pcap(linktype: int, records) -> bytes:
    out = struct.pack("<IHHiIII", 0xA1B2C3D4, 2, 4, 0, 0, 65535, linktype)
    for ts, data in records:
        sec, usec = divmod(ts, 1_000_000)
        out += struct.pack("<IIII", sec, usec, len(data), len(data)) + data
    return out


class TestSimChannel:
    def test_lossless_delivers_to_every_other_node(self):
        ch = _channel(propagation_delay=5)
        ch.send("a", LinkFrame(100, b"x"))
        deliveries = ch.advance(105)
        assert [node for node, _ in deliveries] == ["b", "c"]
        assert all(f.timestamp == 105 for _, f in deliveries)
        assert ch.pending() == 0

    def test_not_due_yet(self):
        ch = _channel(propagation_delay=5)
        ch.send("a", LinkFrame(100, b"x"))
        assert ch.advance(104) == []
        assert ch.next_time() == 105

    def test_total_loss(self):
        ch = _channel(loss_probability=1.0)
        for t in range(50):
            ch.send("a", LinkFrame(t, b"x"))
        assert ch.advance(10**6) == []
        assert ch.dropped == 100

    def test_seeded_loss_matches_rng_replay(self):
        ch = _channel(nodes=("tx", "rx"), loss_probability=0.5, rng_seed=42)
        for t in range(1000):
            ch.send("tx", LinkFrame(t, b"x"))
        delivered = [f.timestamp for _, f in ch.advance(10**6)]

        rng = random.Random(42)
        expected = [t for t in range(1000) if not rng.random() < 0.5]
        assert delivered == expected
        assert 400 < len(delivered) < 600

    def test_delivery_order_is_time_then_node(self):
        ch = _channel()
        ch.send("c", LinkFrame(20, b"late"))
        ch.send("b", LinkFrame(10, b"early"))
        order = [(node, f.data) for node, f in ch.advance(100)]
        assert order == [("a", b"early"), ("c", b"early"), ("a", b"late"), ("b", b"late")]

    def test_blocked_pair(self):
        ch = SimChannel(SimChannelConfig(blocked=blocked_pairs([("a", "c")])))
        for node in "abc":
            ch.register(node)
        ch.send("a", LinkFrame(0, b"x"))
        assert [node for node, _ in ch.advance(0)] == ["b"]
        ch.unblock("c", "a")
        ch.send("a", LinkFrame(1, b"x"))
        assert [node for node, _ in ch.advance(1)] == ["b", "c"]

    def test_unknown_sender(self):
        with pytest.raises(UnknownNode):
            _channel().send("z", LinkFrame(0, b"x"))

    def test_invalid_loss(self):
        with pytest.raises(ValueError):
            SimChannelConfig(loss_probability=1.5)


class TestRadiotap:
    def test_minimal_header_stripped(self):
        assert strip_radiotap(MINIMAL_RADIOTAP + b"frame") == b"frame"

    def test_longer_header_uses_length_field(self):
        header = struct.pack("<BBH", 0, 0, 24) + bytes(20)
        assert strip_radiotap(header + b"frame") == b"frame"

    def test_length_beyond_record(self):
        with pytest.raises(BadRecord):
            strip_radiotap(struct.pack("<BBH", 0, 0, 200) + bytes(10))

    def test_short_record(self):
        with pytest.raises(BadRecord):
            strip_radiotap(b"\x00\x00")


class TestPcapFiles:
    def test_writer_layout(self):
        out = io.BytesIO()
        writer = PcapWriter(out)
        writer.write(LinkFrame(2_000_005, b"\xd0\x00abc"))
        raw = out.getvalue()
        assert raw[:24] == bytes.fromhex("d4c3b2a1" "0200" "0400" "00000000" "00000000" "ffff0000" "7f000000")
        assert raw[24:40] == struct.pack("<IIII", 2, 5, 13, 13)
        assert raw[40:48] == MINIMAL_RADIOTAP
        assert raw[48:] == b"\xd0\x00abc"

    def test_round_trip(self, pcap_path):
        frames = [LinkFrame(t * 1000 + 7, bytes([t]) * (t + 1)) for t in range(1, 20)]
        with pcap_open_writer(pcap_path) as writer:
            for f in frames:
                writer.write(f)
        with open(pcap_path, "rb") as stream:
            assert list(PcapReader(stream)) == frames

    def test_big_endian_bare_80211(self):
        reader = PcapReader(io.BytesIO(_be_pcap(105, [(3_500_000, b"frame")])))
        assert reader.linktype == 105
        assert reader.next() == LinkFrame(3_500_000, b"frame")
        assert reader.next() is None

    def test_bad_magic(self):
        with pytest.raises(BadPcapMagic):
            PcapReader(io.BytesIO(b"\x0a\x0d\x0d\x0a" + bytes(20)))

    def test_ethernet_linktype_rejected(self):
        with pytest.raises(UnsupportedLinktype):
            PcapReader(io.BytesIO(_le_pcap(1, [])))

    def test_truncated_record(self):
        raw = _le_pcap(105, [(0, b"frame")])
        reader = PcapReader(io.BytesIO(raw[:-2]))
        with pytest.raises(TruncatedRecord):
            reader.next()

    def test_bad_record_is_skippable(self):
        bad = struct.pack("<BBH", 0, 0, 99) + b"xx"
        reader = PcapReader(io.BytesIO(_le_pcap(127, [(1, bad), (2, MINIMAL_RADIOTAP + b"ok")])))
        with pytest.raises(BadRecord) as info:
            reader.next()
        assert info.value.timestamp == 1
        assert reader.next() == LinkFrame(2, b"ok")


class TestFramePorts:
    def test_loopback_fifo(self):
        port = LoopbackPort()
        port.send(LinkFrame(1, b"a"))
        port.send(LinkFrame(2, b"b"))
        assert port.poll(0) is None
        assert port.poll(5).data == b"a"
        assert port.recv().data == b"b"
        port.close()
        with pytest.raises(PortClosed):
            port.poll(10)

    def test_scripted_port_delivers_by_timestamp(self):
        port = ScriptedPort([LinkFrame(30, b"c"), LinkFrame(10, b"a"), LinkFrame(20, b"b")])
        assert port.next_time() == 10
        assert [port.poll(100).data for _ in range(3)] == [b"a", b"b", b"c"]
        with pytest.raises(PortClosed):
            port.poll(100)

    def test_scripted_port_can_stay_open(self):
        port = ScriptedPort([], close_when_empty=False)
        assert port.poll(10) is None
        port.send(LinkFrame(1, b"x"))
        assert port.sent == [LinkFrame(1, b"x")]

    def test_pcap_replay_skips_bad_records(self, pcap_path):
        bad = struct.pack("<BBH", 0, 0, 99) + b"xx"
        records = [(1, MINIMAL_RADIOTAP + b"one"), (2, bad), (3, MINIMAL_RADIOTAP + b"two")]
        pcap_path.write_bytes(_le_pcap(127, records))
        port = PcapReplayPort(pcap_path)
        assert port.poll(1).data == b"one"
        assert port.skipped == 1
        assert port.poll(2) is None
        assert port.poll(3).data == b"two"
        with pytest.raises(PortClosed):
            port.poll(4)

    def test_sim_port_sends_through_channel(self):
        ch = SimChannel(SimChannelConfig())
        a, b = SimPort(ch, 1), SimPort(ch, 2)
        a.send(LinkFrame(5, b"hello"))
        for node, frame in ch.advance(5):
            (a if node == 1 else b).deliver(frame)
        assert b.poll(5).data == b"hello"
        assert a.poll(5) is None

    def test_recording_port(self):
        out = io.BytesIO()
        inner = ScriptedPort([], close_when_empty=False)
        port = RecordingPort(inner, PcapWriter(out))
        port.send(LinkFrame(9, b"frame"))
        assert inner.sent == [LinkFrame(9, b"frame")]
        assert PcapReader(io.BytesIO(out.getvalue())).next() == LinkFrame(9, b"frame")

    def test_open_frame_port(self, pcap_path):
        pcap_path.write_bytes(_le_pcap(127, []))
        assert isinstance(open_frame_port("loopback"), LoopbackPort)
        assert isinstance(open_frame_port(f"pcap:{pcap_path}"), PcapReplayPort)
        with pytest.raises(ValueError):
            open_frame_port("carrier-pigeon")
        with pytest.raises(ValueError):
            open_frame_port("pcap:")


class TestHostPorts:
    def test_memory_host(self):
        frame = EthernetFrame(mac(2), mac(1), 0x86DD, b"payload")
        port = MemoryHostPort([(50, frame)])
        assert port.next_time() == 50
        assert port.poll(49) is None
        assert port.poll(50) == frame
        port.send(frame)
        assert port.outbound == [frame]

    def test_open_host_port(self):
        assert isinstance(open_host_port(None), MemoryHostPort)
        assert isinstance(open_host_port("none"), MemoryHostPort)
        with pytest.raises(ValueError):
            open_host_port("tun:awdl0")
