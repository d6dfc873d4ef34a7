"""Capture dissection and the election/sync analyses built on it."""

import io
import random

import pytest

from app.analyzer.analysis import analyze, election_timeline, peer_set, sync_accuracy
from app.analyzer.dissect import dissect_bytes, dissect_capture, format_record
from app.codec.constants import TU_US
from app.codec.frames import DataHeader, build_data_frame, serialize_action_frame
from app.core.errors import InsufficientData
from app.engine.node import build_mif, create_node
from app.linklayer.frame import LinkFrame
from app.linklayer.pcap import PcapWriter
from app.simulator.runner import TraceKind, run_scenario
from tests.conftest import mac, make_scenario, node_config

AF_PERIOD_US = 110 * TU_US


def _capture(frames) -> bytes:
    out = io.BytesIO()
    writer = PcapWriter(out)
    for f in frames:
        writer.write(f)
    return out.getvalue()


def _mif_bytes(n: int = 2, t: int = 0) -> bytes:
    return serialize_action_frame(build_mif(create_node(node_config(n, metric=50 + n), 0), t))


class TestDissect:
    def test_one_record_per_frame(self):
        frames = [
            LinkFrame(0, _mif_bytes()),
            LinkFrame(10, build_data_frame(mac(1), mac(2), DataHeader(sequence=4, ethertype=0x86DD), b"x" * 60)),
            LinkFrame(20, bytes.fromhex("8000") + bytes(40)),
        ]
        records = dissect_bytes(_capture(frames))
        assert [r.frame_class for r in records] == ["AwdlAction", "AwdlData", "Other"]
        assert [r.t_us for r in records] == [0, 10, 20]
        assert records[1].data.sequence == 4
        assert records[1].data.length == 60

    def test_action_summary(self):
        (record,) = dissect_bytes(_capture([LinkFrame(5, _mif_bytes(3))]))
        assert record.src == str(mac(3))
        assert record.action.tlv_types == [0x04, 0x18, 0x12, 0x10, 0x15]
        assert record.action.election.master == str(mac(3))
        assert record.action.election.distance == 0
        assert record.action.sync.channels == [6] * 16
        assert record.action.hostname == "node3"
        assert record.parse_errors == []

    def test_corrupted_tlv_length(self):
        raw = bytearray(_mif_bytes())
        raw[41:43] = b"\xff\xff"
        (record,) = dissect_bytes(_capture([LinkFrame(0, bytes(raw))]))
        assert record.frame_class == "Other"
        assert record.parse_errors[0].startswith("TruncatedTlv")
        assert record.src == str(mac(2))

    def test_random_frames_always_dissect(self):
        rng = random.Random(8)
        prefix = _mif_bytes()[:40]
        frames = []
        for i in range(2000):
            body = rng.randbytes(rng.randrange(1, 100))
            frames.append(LinkFrame(i, prefix + body if i % 2 else body))
        records = dissect_bytes(_capture(frames))
        assert len(records) == 2000

    def test_format_record(self):
        (record,) = dissect_bytes(_capture([LinkFrame(5, _mif_bytes(3))]))
        line = format_record(record)
        assert "AwdlAction" in line
        assert "tlvs=[sync_params,election_params,channel_sequence,hostname,version]" in line
        assert "master=02:00:00:00:00:03 dist=0" in line
        assert "host=node3" in line

    def test_capture_file(self, pcap_path):
        pcap_path.write_bytes(_capture([LinkFrame(1, _mif_bytes())]))
        assert len(dissect_capture(pcap_path)) == 1


class TestElectionTimeline:
    def test_matches_simulator_trace(self, two_node_scenario):
        result = run_scenario(two_node_scenario)
        timeline = election_timeline(dissect_bytes(result.pcap))
        initial = [e for e in timeline if e.initial]
        changes = [e for e in timeline if not e.initial]
        assert {(e.node, e.master, e.distance) for e in initial} == {
            (str(mac(1)), str(mac(1)), 0),
            (str(mac(2)), str(mac(2)), 0),
        }
        assert [(e.node, e.master, e.distance) for e in changes] == [(str(mac(1)), str(mac(2)), 1)]
        (traced,) = result.events(TraceKind.MASTER_CHANGED)
        assert changes[0].t_us >= traced.t

    def test_line_of_three_matches_trace_exactly(self):
        scenario = make_scenario(
            [
                {"mac": str(mac(1)), "metric": 100},
                {"mac": str(mac(2)), "metric": 101, "join_at_ms": 300},
                {"mac": str(mac(3)), "metric": 102, "join_at_ms": 1200},
            ],
            duration_ms=3000,
            channel={"blocked": [[str(mac(1)), str(mac(3))]]},
        )
        result = run_scenario(scenario)
        timeline = election_timeline(dissect_bytes(result.pcap))
        changes = [e for e in timeline if not e.initial]
        traced = result.events(TraceKind.MASTER_CHANGED)
        assert [(e.node, e.master, e.distance) for e in changes] == [
            (str(t.node), t.detail["new"], t.detail["distance"]) for t in traced
        ]
        assert [(e.node, e.master, e.distance) for e in changes] == [
            (str(mac(1)), str(mac(2)), 1),
            (str(mac(2)), str(mac(3)), 1),
            (str(mac(1)), str(mac(3)), 2),
        ]
        # A change shows up in the node's next action frame.
        for entry, event in zip(changes, traced):
            assert event.t <= entry.t_us <= event.t + AF_PERIOD_US

    def test_lone_node_has_only_initial_entry(self):
        result = run_scenario(make_scenario([{"mac": str(mac(1))}]))
        timeline = election_timeline(dissect_bytes(result.pcap))
        assert len(timeline) == 1
        assert timeline[0].initial


class TestSyncAccuracy:
    def test_needs_two_nodes(self):
        result = run_scenario(make_scenario([{"mac": str(mac(1))}]))
        with pytest.raises(InsufficientData):
            sync_accuracy(dissect_bytes(result.pcap))

    def test_aligned_clocks(self, two_node_scenario):
        result = run_scenario(two_node_scenario)
        (adopted,) = result.events(TraceKind.SYNC_ADOPTED)
        report = sync_accuracy(dissect_bytes(result.pcap), since_us=adopted.t)
        (pair,) = report.pairs
        assert pair.samples > 0
        assert pair.median_error_us <= 1024

    def test_skewed_clocks_stay_within_two_tu(self):
        scenario = make_scenario(
            [
                {"mac": str(mac(1)), "metric": 100, "ppm": 5},
                {"mac": str(mac(2)), "metric": 200, "ppm": -5},
            ],
            duration_ms=3000,
        )
        result = run_scenario(scenario)
        (adopted,) = result.events(TraceKind.SYNC_ADOPTED)
        (pair,) = sync_accuracy(dissect_bytes(result.pcap), since_us=adopted.t).pairs
        assert pair.median_error_us <= 1024
        assert pair.max_error_us <= 2048

    def test_errors_bounded_by_half_aw(self):
        nodes = [{"mac": str(mac(i + 1)), "metric": 10 + i} for i in range(10)]
        result = run_scenario(make_scenario(nodes, duration_ms=1500, channel={"loss": 0.2, "seed": 3}))
        report = sync_accuracy(dissect_bytes(result.pcap))
        assert report.pairs
        assert all(p.max_error_us <= 8192 for p in report.pairs)


class TestAnalyze:
    def test_report(self, two_node_scenario):
        result = run_scenario(two_node_scenario)
        records = dissect_bytes(result.pcap)
        report = analyze(records)
        assert report.frames == len(records) == result.frames_sent
        assert report.counts == {"AwdlAction": len(records)}
        assert report.peers == peer_set(records) == [str(mac(1)), str(mac(2))]
        assert report.sync_accuracy is not None
        assert report.sync_error is None

    def test_lone_node_reports_missing_sync_data(self):
        result = run_scenario(make_scenario([{"mac": str(mac(1))}]))
        report = analyze(dissect_bytes(result.pcap))
        assert report.sync_accuracy is None
        assert "at least 2" in report.sync_error
