"""Frame ports: where the engine's link and host traffic comes from and goes to.

Every port is polled without blocking. Virtual ports (loopback, scripted,
pcap replay, simulator) know when their next item is due and report it from
``next_time``; live ports (monitor socket, TAP device) return None there and
expose a file descriptor for the run loop to wait on instead.
"""

from __future__ import annotations

import fcntl
import os
import select
import socket
import struct
from abc import ABC, abstractmethod
from collections import deque
from pathlib import Path
from typing import Deque, Iterable, List, Optional, Tuple

from app.core.errors import BadRecord, PortClosed, TruncatedRecord
from app.linklayer.frame import LinkFrame
from app.linklayer.pcap import MINIMAL_RADIOTAP, PcapReader, PcapWriter, pcap_open_reader, strip_radiotap
from app.linklayer.sim_channel import NodeId, SimChannel
from app.protocol.datapath import EthernetFrame
from app.utils.logger import debug, warn

# linux/if_tun.h
TUNSETIFF = 0x400454CA
IFF_TAP = 0x0002
IFF_NO_PI = 0x1000
TAP_CLONE_DEV = "/dev/net/tun"

ETH_P_ALL = 0x0003
MAX_FRAME = 65535


class FramePort(ABC):
    """Link-side port carrying raw 802.11 frames."""

    closed: bool = False

    @abstractmethod
    def poll(self, now: int) -> Optional[LinkFrame]:
        """Return the next frame due at or before ``now``, or None.

        Raises:
            PortClosed: the port will never deliver another frame.
        """

    @abstractmethod
    def send(self, f: LinkFrame) -> None:
        """Best-effort transmit."""

    def next_time(self) -> Optional[int]:
        return None

    def fileno(self) -> Optional[int]:
        return None

    def recv(self) -> LinkFrame:
        """Return the next frame, waiting for it on live ports.

        Raises:
            PortClosed: nothing more will arrive.
        """
        due = self.next_time()
        frame = self.poll(due) if due is not None else None
        if frame is None:
            raise PortClosed(f"{type(self).__name__} has no frame to deliver")
        return frame

    def close(self) -> None:
        self.closed = True


class LoopbackPort(FramePort):
    """Echoes sent frames back in FIFO order."""

    def __init__(self) -> None:
        self.queue: Deque[LinkFrame] = deque()

    def send(self, f: LinkFrame) -> None:
        if self.closed:
            raise PortClosed("loopback port is closed")
        self.queue.append(f)

    def poll(self, now: int) -> Optional[LinkFrame]:
        if self.queue and self.queue[0].timestamp <= now:
            return self.queue.popleft()
        if self.closed and not self.queue:
            raise PortClosed("loopback port is closed")
        return None

    def next_time(self) -> Optional[int]:
        return self.queue[0].timestamp if self.queue else None


class ScriptedPort(FramePort):
    """Delivers a fixed list of timestamped frames and records what is sent.

    Args:
        frames: Frames to deliver, in any order; delivery is by timestamp.
        close_when_empty: Raise ``PortClosed`` once the script is used up.
    """

    def __init__(self, frames: Iterable[LinkFrame], close_when_empty: bool = True) -> None:
        self.pending: Deque[LinkFrame] = deque(sorted(frames, key=lambda f: f.timestamp))
        self.close_when_empty = close_when_empty
        self.sent: List[LinkFrame] = []

    def poll(self, now: int) -> Optional[LinkFrame]:
        if self.pending:
            if self.pending[0].timestamp <= now:
                return self.pending.popleft()
            return None
        if self.close_when_empty or self.closed:
            raise PortClosed("script exhausted")
        return None

    def send(self, f: LinkFrame) -> None:
        self.sent.append(f)

    def next_time(self) -> Optional[int]:
        return self.pending[0].timestamp if self.pending else None


class PcapReplayPort(FramePort):
    """Replays a capture file in timestamp order (``pcap:FILE``).

    Unusable records are skipped with a warning; a truncated tail ends the
    replay. Sent frames are kept in ``sent``.
    """

    def __init__(self, path: str | Path) -> None:
        self.path = Path(path)
        self.reader: PcapReader = pcap_open_reader(self.path)
        self.sent: List[LinkFrame] = []
        self.skipped = 0
        self._head: Optional[LinkFrame] = None
        self._eof = False
        self._fill()

    def _fill(self) -> None:
        while self._head is None and not self._eof:
            try:
                self._head = self.reader.next()
            except BadRecord as exc:
                self.skipped += 1
                warn(f"{self.path}: skipping record: {exc}")
                continue
            except TruncatedRecord as exc:
                warn(f"{self.path}: {exc}; replay ends here")
                self._head = None
            if self._head is None:
                self._eof = True
                self.reader.close()

    def poll(self, now: int) -> Optional[LinkFrame]:
        if self._head is None:
            raise PortClosed(f"{self.path} replayed to the end")
        if self._head.timestamp > now:
            return None
        frame, self._head = self._head, None
        self._fill()
        return frame

    def send(self, f: LinkFrame) -> None:
        self.sent.append(f)

    def next_time(self) -> Optional[int]:
        return self._head.timestamp if self._head else None

    def close(self) -> None:
        super().close()
        if not self._eof:
            self.reader.close()
            self._eof = True


class SimPort(FramePort):
    """The simulated channel seen from one node.

    The simulator drains the channel and hands each delivery to the
    receiver's port with ``deliver``.
    """

    def __init__(self, channel: SimChannel, node_id: NodeId) -> None:
        self.channel = channel
        self.node_id = node_id
        self.inbox: Deque[LinkFrame] = deque()
        channel.register(node_id)

    def deliver(self, f: LinkFrame) -> None:
        self.inbox.append(f)

    def poll(self, now: int) -> Optional[LinkFrame]:
        if self.inbox and self.inbox[0].timestamp <= now:
            return self.inbox.popleft()
        return None

    def send(self, f: LinkFrame) -> None:
        if self.closed:
            raise PortClosed(f"node {self.node_id} left the channel")
        self.channel.send(self.node_id, f)

    def next_time(self) -> Optional[int]:
        return self.inbox[0].timestamp if self.inbox else None


class RecordingPort(FramePort):
    """Wraps a port and appends every sent frame to a pcap writer."""

    def __init__(self, inner: FramePort, writer: PcapWriter) -> None:
        self.inner = inner
        self.writer = writer

    def poll(self, now: int) -> Optional[LinkFrame]:
        return self.inner.poll(now)

    def send(self, f: LinkFrame) -> None:
        self.writer.write(f)
        self.inner.send(f)

    def next_time(self) -> Optional[int]:
        return self.inner.next_time()

    def fileno(self) -> Optional[int]:
        return self.inner.fileno()

    def close(self) -> None:
        self.inner.close()
        self.writer.close()


class MonitorPort(FramePort):
    """Monitor-mode interface through an AF_PACKET raw socket (``monitor:IFACE``).

    The interface must already be in monitor mode with radiotap headers;
    needs CAP_NET_RAW. Received frames are stamped with the poll time.
    """

    def __init__(self, iface: str) -> None:
        self.iface = iface
        self.sock = socket.socket(socket.AF_PACKET, socket.SOCK_RAW, socket.htons(ETH_P_ALL))
        self.sock.bind((iface, 0))
        self.sock.setblocking(False)

    def poll(self, now: int) -> Optional[LinkFrame]:
        if self.closed:
            raise PortClosed(f"monitor port {self.iface} is closed")
        while True:
            try:
                data = self.sock.recv(MAX_FRAME)
            except BlockingIOError:
                return None
            try:
                body = strip_radiotap(data)
            except BadRecord as exc:
                debug(f"{self.iface}: {exc}")
                continue
            if body:
                return LinkFrame(now, body)

    def send(self, f: LinkFrame) -> None:
        try:
            self.sock.send(MINIMAL_RADIOTAP + f.data)
        except OSError as exc:
            warn(f"{self.iface}: injection failed: {exc}")

    def fileno(self) -> Optional[int]:
        return self.sock.fileno()

    def recv(self) -> LinkFrame:
        while True:
            select.select([self.sock], [], [])
            frame = self.poll(0)
            if frame is not None:
                return frame

    def close(self) -> None:
        super().close()
        self.sock.close()


class HostPort(ABC):
    """Host-side port carrying Ethernet frames."""

    closed: bool = False

    @abstractmethod
    def poll(self, now: int) -> Optional[EthernetFrame]:
        """Return the next frame from the host due at or before ``now``."""

    @abstractmethod
    def send(self, f: EthernetFrame) -> None:
        """Hand a received frame to the host."""

    def next_time(self) -> Optional[int]:
        return None

    def fileno(self) -> Optional[int]:
        return None

    def close(self) -> None:
        self.closed = True


class MemoryHostPort(HostPort):
    """In-memory host: scripted inbound frames, collected outbound frames."""

    def __init__(self, inbound: Iterable[Tuple[int, EthernetFrame]] = ()) -> None:
        self.inbound: Deque[Tuple[int, EthernetFrame]] = deque(sorted(inbound, key=lambda item: item[0]))
        self.outbound: List[EthernetFrame] = []

    def push(self, t: int, f: EthernetFrame) -> None:
        self.inbound.append((t, f))

    def poll(self, now: int) -> Optional[EthernetFrame]:
        if self.inbound and self.inbound[0][0] <= now:
            return self.inbound.popleft()[1]
        return None

    def send(self, f: EthernetFrame) -> None:
        self.outbound.append(f)

    def next_time(self) -> Optional[int]:
        return self.inbound[0][0] if self.inbound else None


class TapHostPort(HostPort):
    """Linux TAP device (``tap:NAME``); needs CAP_NET_ADMIN."""

    def __init__(self, name: str, clone_dev: str = TAP_CLONE_DEV) -> None:
        self.name = name
        self.fd = os.open(clone_dev, os.O_RDWR | os.O_NONBLOCK)
        try:
            ifreq = struct.pack("16sH", name.encode(), IFF_TAP | IFF_NO_PI)
            fcntl.ioctl(self.fd, TUNSETIFF, ifreq)
        except OSError:
            os.close(self.fd)
            raise

    def poll(self, now: int) -> Optional[EthernetFrame]:
        if self.closed:
            return None
        try:
            raw = os.read(self.fd, MAX_FRAME)
        except BlockingIOError:
            return None
        try:
            return EthernetFrame.unpack(raw)
        except ValueError as exc:
            debug(f"tap {self.name}: {exc}")
            return None

    def send(self, f: EthernetFrame) -> None:
        try:
            os.write(self.fd, f.pack())
        except OSError as exc:
            warn(f"tap {self.name}: write failed: {exc}")

    def fileno(self) -> Optional[int]:
        return self.fd

    def close(self) -> None:
        if not self.closed:
            super().close()
            os.close(self.fd)


def open_frame_port(spec: str) -> FramePort:
    """Build a link port from ``loopback``, ``pcap:FILE`` or ``monitor:IFACE``."""
    kind, _, arg = spec.partition(":")
    if kind == "loopback":
        return LoopbackPort()
    if kind == "pcap" and arg:
        return PcapReplayPort(arg)
    if kind == "monitor" and arg:
        return MonitorPort(arg)
    raise ValueError(f"unknown link port '{spec}' (expected loopback, pcap:FILE or monitor:IFACE)")


def open_host_port(spec: Optional[str]) -> HostPort:
    """Build a host port from ``tap:NAME``; anything else gives an in-memory host."""
    if spec is None or spec in ("none", "memory"):
        return MemoryHostPort()
    kind, _, arg = spec.partition(":")
    if kind == "tap" and arg:
        return TapHostPort(arg)
    raise ValueError(f"unknown host port '{spec}' (expected tap:NAME or none)")
