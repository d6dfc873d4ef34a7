"""Command-line entry point: ``awdl daemon|sim|dissect|analyze``."""

from __future__ import annotations

import argparse
import signal
import sys
from pathlib import Path
from typing import List, Optional

from dotenv import load_dotenv
from pydantic import ValidationError

# Load environment variables from .env file before settings are imported
env_path = Path(__file__).parent.parent.parent / ".env"
if env_path.exists():
    load_dotenv(env_path)

from app.analyzer.analysis import analyze  # noqa: E402
from app.analyzer.dissect import dissect_capture, format_record  # noqa: E402
from app.codec.mac import MacAddress  # noqa: E402
from app.core.config import SOCIAL_CHANNELS, settings  # noqa: E402
from app.core.errors import AwdlError  # noqa: E402
from app.engine.loop import MonotonicClock, VirtualClock, run_loop  # noqa: E402
from app.engine.node import create_node  # noqa: E402
from app.linklayer.pcap import pcap_open_writer  # noqa: E402
from app.linklayer.ports import (  # noqa: E402
    FramePort,
    MonitorPort,
    RecordingPort,
    TapHostPort,
    open_frame_port,
    open_host_port,
)
from app.protocol.peers import peer_records  # noqa: E402
from app.schemas.schemas import NodeConfig  # noqa: E402
from app.simulator.runner import run_scenario  # noqa: E402
from app.simulator.scenario import load_scenario  # noqa: E402
from app.utils.file_utils import JsonLinesWriter, dumps_line, save_jsonl  # noqa: E402
from app.utils.logger import configure_logging, log, warn  # noqa: E402

EXIT_ERROR = 2


def _default_mac(port_spec: str, seed: int) -> MacAddress:
    """Interface address for monitor ports, else a locally administered one from the seed."""
    kind, _, iface = port_spec.partition(":")
    if kind == "monitor":
        address = Path("/sys/class/net") / iface / "address"
        if address.exists():
            return MacAddress.parse(address.read_text().strip())
    return MacAddress(bytes([0x02, 0x00]) + (seed & 0xFFFFFFFF).to_bytes(4, "big"))


class _StopFlag:
    def __init__(self) -> None:
        self.stop = False

    def __call__(self) -> bool:
        return self.stop

    def install(self) -> None:
        def handler(signum, frame) -> None:
            log(f"received signal {signum}, shutting down")
            self.stop = True

        self.previous = {sig: signal.signal(sig, handler) for sig in (signal.SIGINT, signal.SIGTERM)}

    def restore(self) -> None:
        for sig, previous in self.previous.items():
            signal.signal(sig, previous)


def cmd_daemon(args: argparse.Namespace) -> int:
    config = NodeConfig(
        mac=args.mac or _default_mac(args.iface, args.seed),
        metric=args.metric,
        channel=args.channel,
        rng_seed=args.seed,
        hostname=args.hostname,
    )
    if args.iface == "loopback" and not args.duration_ms:
        raise ValueError("the loopback port never closes; pass --duration-ms")
    link: FramePort = open_frame_port(args.iface)
    host = open_host_port(args.host)
    live = isinstance(link, MonitorPort) or isinstance(host, TapHostPort)
    if live:
        clock = MonotonicClock()
    else:
        clock = VirtualClock(link.next_time() or 0)
    if args.pcap_out:
        link = RecordingPort(link, pcap_open_writer(args.pcap_out))

    start = clock.now()
    state = create_node(config, start)
    until = start + args.duration_ms * 1000 if args.duration_ms else None
    stop = _StopFlag()
    stop.install()
    log(f"node {config.mac} on channel {config.channel} via {args.iface} (metric {state.election.self_metric})")

    stats = JsonLinesWriter.open(args.stats_out, settings.STATS_FLUSH_EVERY)
    try:
        result = run_loop(state, link, host, clock, stats=stats, until=until, should_stop=stop)
    finally:
        stop.restore()
        link.close()
        host.close()
    if args.peers_out:
        save_jsonl(peer_records(result.state.peers, clock.now()), args.peers_out)
    return 0


def cmd_sim(args: argparse.Namespace) -> int:
    scenario = load_scenario(args.scenario)
    result = run_scenario(scenario, record_pcap=bool(args.pcap_out))
    if args.pcap_out:
        Path(args.pcap_out).write_bytes(result.pcap)
    writer = JsonLinesWriter.open(args.trace_out)
    for event in result.trace:
        writer.write(event.to_record())
    writer.close()
    for ping in result.pings:
        log(f"ping {ping.src} -> {ping.dst}: {len(ping.received)}/{len(ping.sent)} replies")
    for stream in result.streams:
        log(f"stream {stream.src} -> {stream.dst}: {len(stream.received)}/{stream.size} bytes, complete={stream.complete}")
    return 0


def cmd_dissect(args: argparse.Namespace) -> int:
    for record in dissect_capture(args.file):
        if args.json:
            print(dumps_line(record.model_dump(exclude_none=True)))
        else:
            print(format_record(record))
    return 0


def cmd_analyze(args: argparse.Namespace) -> int:
    report = analyze(dissect_capture(args.file), since_us=args.since_us)
    if args.json:
        print(report.model_dump_json(indent=2))
        return 0
    print(f"frames: {report.frames}  " + "  ".join(f"{k}={v}" for k, v in report.counts.items()))
    print(f"peers ({len(report.peers)}): " + " ".join(report.peers))
    print("election timeline:")
    for entry in report.timeline:
        marker = "initial" if entry.initial else "change"
        print(f"  {entry.t_us:>12} {entry.node} -> master {entry.master} distance {entry.distance} ({marker})")
    if report.sync_accuracy is None:
        print(f"sync accuracy: {report.sync_error}")
    else:
        print("sync accuracy:")
        for pair in report.sync_accuracy.pairs:
            print(
                f"  {pair.a} ~ {pair.b}: {pair.samples} samples, "
                f"median {pair.median_error_us:.0f} us, max {pair.max_error_us} us"
            )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="awdl", description="AWDL protocol engine, simulator and capture analyzer")
    parser.add_argument("--log-level", default=None, help="Override AWDL_LOG_LEVEL")
    sub = parser.add_subparsers(dest="command", required=True)

    daemon = sub.add_parser("daemon", help="Run one node over a link port")
    daemon.add_argument("--iface", required=True, help="loopback | pcap:FILE | monitor:IFACE")
    daemon.add_argument("--host", default=None, help="Host side: tap:NAME (default: none)")
    daemon.add_argument("--channel", type=int, choices=SOCIAL_CHANNELS, default=settings.DEFAULT_CHANNEL)
    daemon.add_argument("--mac", type=MacAddress.parse, default=None)
    daemon.add_argument("--metric", type=int, default=None)
    daemon.add_argument("--seed", type=int, default=settings.DEFAULT_SEED)
    daemon.add_argument("--hostname", default=settings.DEFAULT_HOSTNAME)
    daemon.add_argument("--stats-out", default=None, help="JSON-lines event log (default: stdout)")
    daemon.add_argument("--pcap-out", default=None, help="Record transmitted frames")
    daemon.add_argument("--peers-out", default=None, help="Write the final neighbour table")
    daemon.add_argument("--duration-ms", type=int, default=None)
    daemon.set_defaults(func=cmd_daemon)

    sim = sub.add_parser("sim", help="Run a scenario file")
    sim.add_argument("--scenario", required=True)
    sim.add_argument("--pcap-out", default=None)
    sim.add_argument("--trace-out", default=None, help="JSON-lines trace (default: stdout)")
    sim.set_defaults(func=cmd_sim)

    dissect = sub.add_parser("dissect", help="Print one record per captured frame")
    dissect.add_argument("file")
    dissect.add_argument("--json", action="store_true")
    dissect.set_defaults(func=cmd_dissect)

    analyze_cmd = sub.add_parser("analyze", help="Election timeline and sync accuracy of a capture")
    analyze_cmd.add_argument("file")
    analyze_cmd.add_argument("--json", action="store_true")
    analyze_cmd.add_argument("--since-us", type=int, default=None)
    analyze_cmd.set_defaults(func=cmd_analyze)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.log_level)
    try:
        return args.func(args)
    except AwdlError as exc:
        warn(f"{type(exc).__name__}: {exc}")
        return EXIT_ERROR
    except (ValidationError, ValueError, OSError) as exc:
        warn(str(exc).splitlines()[0])
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
