"""Startup validation script for the AWDL daemon.

Checks configuration, imports and the privileges a live node needs before
it is started on real hardware.
Run before deployment: python daemon/scripts/validate_startup.py [--iface monitor:wlan0] [--host tap:awdl0]
"""

import argparse
import os
import sys
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, List, Optional

# Add daemon to path
daemon_path = Path(__file__).parent.parent
sys.path.insert(0, str(daemon_path))


class Status(str, Enum):
    OK = "ok"
    WARN = "warn"
    FAIL = "fail"


_MARKS = {Status.OK: "ok  ", Status.WARN: "warn", Status.FAIL: "FAIL"}


@dataclass
class Check:
    section: str
    name: str
    status: Status
    detail: str = ""

    def line(self) -> str:
        text = f"[{_MARKS[self.status]}] {self.name}"
        return f"{text}: {self.detail}" if self.detail else text


@dataclass
class StartupReport:
    """Checks grouped by the part of the node they cover (settings, link port, ...)."""

    checks: List[Check] = field(default_factory=list)
    current: str = "general"

    def section(self, title: str) -> None:
        self.current = title
        print(f"\n{title}")

    def _record(self, status: Status, name: str, detail: str) -> None:
        check = Check(self.current, name, status, detail)
        self.checks.append(check)
        print(f"  {check.line()}")

    def add_pass(self, name: str, detail: str = "") -> None:
        self._record(Status.OK, name, detail)

    def add_warning(self, name: str, detail: str) -> None:
        self._record(Status.WARN, name, detail)

    def add_fail(self, name: str, detail: str) -> None:
        self._record(Status.FAIL, name, detail)

    @property
    def ready(self) -> bool:
        return not any(c.status is Status.FAIL for c in self.checks)

    def print_summary(self) -> bool:
        """Print one line per section, then every problem; return ``ready``."""
        by_section: Dict[str, List[Check]] = {}
        for check in self.checks:
            by_section.setdefault(check.section, []).append(check)
        print("\nsummary")
        for title, checks in by_section.items():
            counts = {s: sum(c.status is s for c in checks) for s in Status}
            print(f"  {title:<24} {counts[Status.OK]} ok, {counts[Status.WARN]} warn, {counts[Status.FAIL]} failed")
        problems = [c for c in self.checks if c.status is not Status.OK]
        for check in problems:
            print(f"  {check.section}: {check.line()}")
        print("node is ready to start" if self.ready else "node is NOT ready to start")
        return self.ready


def validate_python_version(report: StartupReport):
    """tomllib needs Python 3.11 or newer."""
    report.section("python version")
    version = sys.version_info
    if version < (3, 11):
        report.add_fail("Python version", f"{version.major}.{version.minor} found, 3.11+ required")
    else:
        report.add_pass(f"Python {version.major}.{version.minor}.{version.micro}")


def validate_settings(report: StartupReport):
    """Load the settings singleton; AWDL_* variables and .env are validated here."""
    report.section("settings")
    try:
        from app.core.config import settings
    except Exception as e:
        report.add_fail("Settings", str(e).splitlines()[0])
        return
    report.add_pass(f"Default channel {settings.DEFAULT_CHANNEL}")
    report.add_pass(f"Action frame period {settings.AF_PERIOD_TU} TU")
    if settings.ELECTION_FRESH_MS > settings.PEER_TIMEOUT_MS:
        report.add_warning(
            "AWDL_ELECTION_FRESH_MS",
            f"{settings.ELECTION_FRESH_MS} ms outlives the peer timeout ({settings.PEER_TIMEOUT_MS} ms)",
        )
    if settings.LOG_LEVEL.upper() not in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"):
        report.add_warning("AWDL_LOG_LEVEL", f"Unknown level '{settings.LOG_LEVEL}'")


def validate_imports(report: StartupReport):
    """Validate that all critical modules can be imported."""
    report.section("module imports")

    imports = [
        ("app.main", "CLI"),
        ("dpkt", "Packet headers (dpkt)"),
        ("netaddr", "Address types (netaddr)"),
        ("app.codec.frames", "Frame codec"),
        ("app.protocol.election", "Election"),
        ("app.protocol.sync", "Synchronization"),
        ("app.engine.loop", "Run loop"),
        ("app.linklayer.ports", "Frame ports"),
        ("app.simulator.runner", "Simulator"),
        ("app.analyzer.analysis", "Analyzer"),
    ]
    for module, description in imports:
        try:
            __import__(module)
            report.add_pass(f"{description} ({module})")
        except Exception as e:
            report.add_fail(description, f"Cannot import {module}: {e}")


def validate_simulation(report: StartupReport):
    """A lone simulated node must put frames on the air."""
    report.section("simulation smoke test")
    try:
        from app.simulator.runner import run_scenario
        from app.simulator.scenario import parse_scenario

        scenario = parse_scenario({"duration_ms": 200, "nodes": [{"mac": "02:00:00:00:00:01"}]})
        sent = run_scenario(scenario, record_pcap=False).frames_sent
    except Exception as e:
        report.add_fail("One-node simulation", str(e))
        return
    if sent:
        report.add_pass(f"One-node simulation sent {sent} action frames")
    else:
        report.add_fail("One-node simulation", "no action frames sent")


def validate_link(report: StartupReport, iface: Optional[str]):
    """A monitor interface must exist and the process needs CAP_NET_RAW (root)."""
    report.section("link port")
    if iface is None:
        report.add_pass("No link port given; skipping")
        return
    kind, _, name = iface.partition(":")
    if kind == "pcap":
        if Path(name).is_file():
            report.add_pass(f"Capture file {name}")
        else:
            report.add_fail("Capture file", f"{name} does not exist")
        return
    if kind != "monitor":
        report.add_pass(f"Virtual port '{iface}'")
        return
    sysfs = Path("/sys/class/net") / name
    if not sysfs.exists():
        report.add_fail("Monitor interface", f"{name} does not exist")
        return
    report.add_pass(f"Interface {name} present")
    link_type = (sysfs / "type").read_text().strip() if (sysfs / "type").exists() else ""
    # ARPHRD_IEEE80211_RADIOTAP
    if link_type != "803":
        report.add_warning("Monitor interface", f"{name} is not in monitor mode with radiotap (type {link_type or '?'})")
    if os.geteuid() != 0:
        report.add_warning("Privileges", "not running as root; raw sockets need CAP_NET_RAW")


def validate_host(report: StartupReport, host: Optional[str]):
    report.section("host port")
    if host is None or not host.startswith("tap:"):
        report.add_pass("In-memory host")
        return
    if not Path("/dev/net/tun").exists():
        report.add_fail("TAP device", "/dev/net/tun is missing (load the tun module)")
    elif not os.access("/dev/net/tun", os.R_OK | os.W_OK):
        report.add_fail("TAP device", "/dev/net/tun is not accessible; needs CAP_NET_ADMIN")
    else:
        report.add_pass("TAP clone device accessible")


def main():
    parser = argparse.ArgumentParser(description="Validate the daemon environment")
    parser.add_argument("--iface", default=None)
    parser.add_argument("--host", default=None)
    args = parser.parse_args()

    print("awdl daemon: startup checks")

    report = StartupReport()
    validate_python_version(report)
    validate_settings(report)
    validate_imports(report)
    validate_simulation(report)
    validate_link(report, args.iface)
    validate_host(report, args.host)

    sys.exit(0 if report.print_summary() else 1)


if __name__ == "__main__":
    main()
