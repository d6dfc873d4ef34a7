"""Event loop driving one node over a link port and a host port."""

from __future__ import annotations

import select
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional

from app.core.errors import PortClosed
from app.engine.node import (
    EngineAction,
    EngineEvent,
    HostFrameIn,
    HostFrameOut,
    LinkFrameIn,
    LinkFrameOut,
    Log,
    NodeState,
    SetTimer,
    Timer,
    step,
)
from app.linklayer.ports import FramePort, HostPort
from app.utils.file_utils import JsonLinesWriter
from app.utils.logger import debug, log


class VirtualClock:
    """Clock that only moves when the loop has nothing due."""

    def __init__(self, start: int = 0) -> None:
        self._now = start

    def now(self) -> int:
        return self._now

    def wait(self, deadline: Optional[int], fds: List[int]) -> bool:
        """Jump to ``deadline``; False when there is nothing left to wait for."""
        if deadline is None:
            return False
        self._now = max(self._now, deadline)
        return True


class MonotonicClock:
    """Wall clock in microseconds since construction plus ``start``."""

    def __init__(self, start: int = 0) -> None:
        self._origin = time.monotonic_ns() // 1000 - start

    def now(self) -> int:
        return time.monotonic_ns() // 1000 - self._origin

    def wait(self, deadline: Optional[int], fds: List[int]) -> bool:
        timeout = None if deadline is None else max(0, deadline - self.now()) / 1_000_000
        if not fds and timeout is None:
            return False
        if fds:
            select.select(fds, [], [], timeout)
        else:
            time.sleep(timeout)
        return True


Clock = VirtualClock | MonotonicClock


@dataclass
class LoopResult:
    state: NodeState
    steps: int = 0
    records: List[Dict] = field(default_factory=list)
    reason: str = "stopped"


def _execute(
    actions: List[EngineAction],
    link: FramePort,
    host: HostPort,
    now: int,
    sink: Callable[[Dict], None],
) -> Optional[int]:
    timer: Optional[int] = None
    for action in actions:
        if isinstance(action, LinkFrameOut):
            link.send(action.frame)
        elif isinstance(action, HostFrameOut):
            host.send(action.frame)
        elif isinstance(action, SetTimer):
            timer = action.at
        elif isinstance(action, Log):
            sink({"t_us": now, **action.record})
    return timer


def run_loop(
    state: NodeState,
    link: FramePort,
    host: HostPort,
    clock: Clock,
    stats: Optional[JsonLinesWriter] = None,
    until: Optional[int] = None,
    should_stop: Callable[[], bool] = lambda: False,
    keep_records: bool = False,
) -> LoopResult:
    """Run ``step`` until the link port closes, ``until`` passes or ``should_stop``.

    Due timers run before due link frames, which run before due host
    frames. Actions are executed in emission order and every ``Log``
    record is stamped with ``t_us``. A final ``shutdown`` record carries
    the node's counters.

    Args:
        state: Initial node state; its ``next_af`` is the first timer.
        link: Link-side port.
        host: Host-side port.
        clock: ``VirtualClock`` for virtual ports, ``MonotonicClock`` for live ones.
        stats: Optional JSON-lines writer for log records.
        until: Stop once the clock reaches this local time.
        should_stop: Polled once per iteration (signal handlers set it).
        keep_records: Also collect the records in the result.
    """
    result = LoopResult(state=state)

    def sink(record: Dict) -> None:
        if stats is not None:
            stats.write(record)
        if keep_records:
            result.records.append(record)

    def apply(event: EngineEvent, now: int, timer: Optional[int]) -> Optional[int]:
        result.state, actions = step(result.state, event, now)
        result.steps += 1
        new_timer = _execute(actions, link, host, now, sink)
        return timer if new_timer is None else new_timer

    timer: Optional[int] = state.next_af
    fds = [fd for fd in (link.fileno(), host.fileno()) if fd is not None]
    while True:
        if should_stop():
            result.reason = "signal"
            break
        now = clock.now()
        if until is not None and now >= until:
            result.reason = "duration"
            break

        if timer is not None and timer <= now:
            timer = apply(Timer(timer), now, None)
            continue
        try:
            frame = link.poll(now)
        except PortClosed as exc:
            debug(f"link port closed: {exc}")
            result.reason = "port_closed"
            break
        if frame is not None:
            timer = apply(LinkFrameIn(frame), now, timer)
            continue
        eth = host.poll(now)
        if eth is not None:
            timer = apply(HostFrameIn(eth), now, timer)
            continue

        deadline = _earliest(timer, link.next_time(), host.next_time(), until)
        if not clock.wait(deadline, fds):
            result.reason = "idle"
            break

    now = clock.now()
    sink({"t_us": now, "event": "shutdown", "reason": result.reason, "counters": dict(result.state.counters)})
    if stats is not None:
        stats.close()
    log(f"node {result.state.addr} stopped ({result.reason}) after {result.steps} steps")
    return result


def _earliest(*times: Optional[int]) -> Optional[int]:
    present = [t for t in times if t is not None]
    return min(present) if present else None
