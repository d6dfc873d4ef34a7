"""Command-line surface and configuration validation."""

import importlib.util
import json
from pathlib import Path

import pytest
from pydantic import ValidationError

from app.core.config import Settings
from app.main import EXIT_ERROR, main
from app.schemas.schemas import NodeConfig
from tests.conftest import mac

pytestmark = pytest.mark.integration

SCENARIO = """\
duration_ms = 1500

[channel]
seed = 7

[[nodes]]
mac = "02:00:00:00:00:01"
metric = 100

[[nodes]]
mac = "02:00:00:00:00:02"
metric = 200

[[traffic]]
kind = "ping"
src = "02:00:00:00:00:01"
dst = "02:00:00:00:00:02"
at_ms = 400
count = 3
"""


def _read_jsonl(path):
    return [json.loads(line) for line in path.read_text().splitlines()]


@pytest.fixture
def scenario_file(tmp_path):
    path = tmp_path / "two.toml"
    path.write_text(SCENARIO)
    return path


@pytest.fixture
def sim_capture(tmp_path, scenario_file):
    pcap = tmp_path / "sim.pcap"
    assert main(["sim", "--scenario", str(scenario_file), "--pcap-out", str(pcap), "--trace-out", str(tmp_path / "t.jsonl")]) == 0
    return pcap


class TestSim:
    def test_writes_trace_and_capture(self, tmp_path, scenario_file):
        trace, pcap = tmp_path / "trace.jsonl", tmp_path / "out.pcap"
        code = main(["sim", "--scenario", str(scenario_file), "--pcap-out", str(pcap), "--trace-out", str(trace)])
        assert code == 0
        records = _read_jsonl(trace)
        kinds = {r["kind"] for r in records}
        assert {"AfSent", "PeerAdded", "MasterChanged", "EchoReplied"} <= kinds
        assert all(set(r) >= {"t_us", "node", "kind"} for r in records)
        assert pcap.read_bytes()[:4] == bytes.fromhex("d4c3b2a1")

    def test_trace_to_stdout(self, scenario_file, capsys):
        assert main(["sim", "--scenario", str(scenario_file)]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines
        assert json.loads(lines[0])["kind"] == "AfSent"

    def test_invalid_scenario(self, tmp_path):
        path = tmp_path / "bad.toml"
        path.write_text('duration_ms = 100\n[[nodes]]\nmac = "zz"\n')
        assert main(["sim", "--scenario", str(path)]) == EXIT_ERROR

    def test_missing_scenario(self, tmp_path):
        assert main(["sim", "--scenario", str(tmp_path / "none.toml")]) == EXIT_ERROR


class TestDissect:
    def test_text_lines(self, sim_capture, capsys):
        assert main(["dissect", str(sim_capture)]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines
        assert any("AwdlAction" in line for line in lines)
        assert any("AwdlData" in line for line in lines)

    def test_json_lines(self, sim_capture, capsys):
        assert main(["dissect", "--json", str(sim_capture)]) == 0
        records = [json.loads(line) for line in capsys.readouterr().out.splitlines()]
        assert {r["frame_class"] for r in records} == {"AwdlAction", "AwdlData"}

    def test_not_a_capture(self, tmp_path):
        path = tmp_path / "junk.pcap"
        path.write_bytes(b"not a pcap file at all, really not")
        assert main(["dissect", str(path)]) == EXIT_ERROR


class TestAnalyze:
    def test_json_report(self, sim_capture, capsys):
        assert main(["analyze", "--json", str(sim_capture)]) == 0
        report = json.loads(capsys.readouterr().out)
        assert report["peers"] == [str(mac(1)), str(mac(2))]
        assert report["sync_accuracy"]["pairs"]

    def test_text_report(self, sim_capture, capsys):
        assert main(["analyze", str(sim_capture), "--since-us", "200000"]) == 0
        out = capsys.readouterr().out
        assert "election timeline:" in out
        assert f"{mac(1)} -> master {mac(2)} distance 1 (change)" in out


class TestDaemon:
    def test_pcap_replay(self, tmp_path, sim_capture):
        stats, peers = tmp_path / "stats.jsonl", tmp_path / "peers.jsonl"
        code = main([
            "daemon",
            "--iface", f"pcap:{sim_capture}",
            "--mac", "02:00:00:00:00:09",
            "--metric", "5",
            "--stats-out", str(stats),
            "--peers-out", str(peers),
        ])
        assert code == 0
        events = [r["event"] for r in _read_jsonl(stats)]
        assert events.count("peer_added") == 2
        assert events[-1] == "shutdown"
        assert [row["mac"] for row in _read_jsonl(peers)] == [str(mac(1)), str(mac(2))]

    def test_loopback_for_a_fixed_duration(self, tmp_path):
        stats, capture = tmp_path / "stats.jsonl", tmp_path / "tx.pcap"
        code = main([
            "daemon",
            "--iface", "loopback",
            "--mac", "02:00:00:00:00:09",
            "--duration-ms", "500",
            "--stats-out", str(stats),
            "--pcap-out", str(capture),
        ])
        assert code == 0
        records = _read_jsonl(stats)
        assert sum(r["event"] == "af_sent" for r in records) == 5
        assert records[-1]["counters"]["own_frames"] == 5
        assert main(["dissect", str(capture)]) == 0

    def test_loopback_needs_duration(self):
        assert main(["daemon", "--iface", "loopback"]) == EXIT_ERROR

    def test_unknown_port(self):
        assert main(["daemon", "--iface", "wire:eth0", "--duration-ms", "10"]) == EXIT_ERROR

    def test_channel_choices(self):
        with pytest.raises(SystemExit):
            main(["daemon", "--iface", "loopback", "--channel", "7"])


class TestConfiguration:
    def test_default_channel_must_be_social(self):
        with pytest.raises(ValidationError):
            Settings(DEFAULT_CHANNEL=7)

    def test_positive_periods(self):
        with pytest.raises(ValidationError):
            Settings(AF_PERIOD_TU=0)

    def test_multicast_node_address_rejected(self):
        with pytest.raises(ValidationError):
            NodeConfig(mac="01:00:5e:00:00:01")

    def test_node_channel_validated(self):
        with pytest.raises(ValidationError):
            NodeConfig(mac=mac(1), channel=7)

    def test_node_defaults_come_from_settings(self):
        config = NodeConfig(mac=str(mac(1)))
        assert config.mac == mac(1)
        assert config.channel == 6
        assert config.af_period_tu == 110


def _validate_startup():
    path = Path(__file__).parent.parent / "scripts" / "validate_startup.py"
    spec = importlib.util.spec_from_file_location("validate_startup", path)
    module = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(module)
    return module


class TestStartupChecks:
    def test_warnings_keep_the_node_ready(self, capsys):
        checks = _validate_startup()
        report = checks.StartupReport()
        report.section("settings")
        report.add_pass("Default channel 6")
        report.add_warning("AWDL_LOG_LEVEL", "Unknown level 'LOUD'")
        assert report.print_summary()
        out = capsys.readouterr().out
        assert "settings                 1 ok, 1 warn, 0 failed" in out
        assert "settings: [warn] AWDL_LOG_LEVEL: Unknown level 'LOUD'" in out
        assert out.rstrip().endswith("node is ready to start")

    def test_failure_is_reported_under_its_section(self, capsys):
        checks = _validate_startup()
        report = checks.StartupReport()
        report.section("link port")
        report.add_fail("Monitor interface", "wlan9mon does not exist")
        report.section("host port")
        report.add_pass("In-memory host")
        assert not report.print_summary()
        assert [(c.section, c.status) for c in report.checks] == [
            ("link port", checks.Status.FAIL),
            ("host port", checks.Status.OK),
        ]
        assert "node is NOT ready to start" in capsys.readouterr().out

    def test_simulation_smoke_check_passes(self):
        checks = _validate_startup()
        report = checks.StartupReport()
        checks.validate_simulation(report)
        assert report.ready
        assert report.checks[0].name.startswith("One-node simulation sent")
