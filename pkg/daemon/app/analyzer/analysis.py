"""Election timelines, synchronization accuracy and peer sets from dissected frames."""

from __future__ import annotations

import bisect
import statistics
from collections import Counter
from itertools import combinations
from typing import Dict, List, Optional, Sequence, Tuple

from app.codec.constants import TU_US
from app.codec.frames import FrameClass
from app.core.errors import InsufficientData
from app.protocol.sync import predicted_next_aw_start, sync_error
from app.schemas.schemas import (
    AnalysisReport,
    FrameRecord,
    SyncAccuracyReport,
    SyncPairStats,
    TimelineEntry,
)


def _action_records(records: Sequence[FrameRecord]) -> List[FrameRecord]:
    return [r for r in records if r.frame_class == FrameClass.AWDL_ACTION.value and r.action is not None]


def election_timeline(records: Sequence[FrameRecord]) -> List[TimelineEntry]:
    """Each node's first advertised ``(master, distance)`` and every change to it."""
    last: Dict[str, Tuple[str, int]] = {}
    timeline: List[TimelineEntry] = []
    for r in _action_records(records):
        election = r.action.election
        if election is None or r.src is None:
            continue
        current = (election.master, election.distance)
        previous = last.get(r.src)
        if previous == current:
            continue
        last[r.src] = current
        timeline.append(TimelineEntry(
            t_us=r.t_us,
            node=r.src,
            master=election.master,
            distance=election.distance,
            initial=previous is None,
        ))
    timeline.sort(key=lambda e: e.t_us)
    return timeline


def predicted_aw_start(r: FrameRecord) -> int:
    """Next AW start implied by a frame's sync TLV, using its capture time."""
    sync = r.action.sync
    return predicted_next_aw_start(r.t_us, sync.aw_common_length, sync.remaining_aw_length)


def sync_accuracy(records: Sequence[FrameRecord], since_us: Optional[int] = None) -> SyncAccuracyReport:
    """Pairwise AW phase error between nodes.

    Frames of two nodes captured within one action-frame period of each
    other form a sample; the period is the one advertised by the first
    frame with sync parameters.

    Args:
        records: Output of ``dissect_capture``.
        since_us: Ignore frames captured before this time.

    Raises:
        InsufficientData: fewer than two nodes sent sync parameters.
    """
    by_node: Dict[str, List[Tuple[int, int]]] = {}
    window: Optional[int] = None
    for r in _action_records(records):
        if r.action.sync is None or r.src is None:
            continue
        if since_us is not None and r.t_us < since_us:
            continue
        if window is None:
            window = r.action.sync.af_period * TU_US
        by_node.setdefault(r.src, []).append((r.t_us, predicted_aw_start(r)))

    if len(by_node) < 2:
        raise InsufficientData(f"sync parameters from {len(by_node)} node(s); at least 2 are needed")

    report = SyncAccuracyReport()
    for a, b in combinations(sorted(by_node), 2):
        frames_b = sorted(by_node[b])
        times_b = [t for t, _ in frames_b]
        samples: List[int] = []
        for t_a, pred_a in by_node[a]:
            lo = bisect.bisect_left(times_b, t_a - window)
            hi = bisect.bisect_right(times_b, t_a + window)
            samples.extend(sync_error(pred_a, pred_b) for _, pred_b in frames_b[lo:hi])
        if samples:
            report.pairs.append(SyncPairStats(
                a=a,
                b=b,
                samples=len(samples),
                median_error_us=statistics.median(samples),
                max_error_us=max(samples),
            ))
    return report


def peer_set(records: Sequence[FrameRecord]) -> List[str]:
    """Source addresses of every successfully parsed action frame."""
    return sorted({r.src for r in _action_records(records) if r.src is not None})


def analyze(records: Sequence[FrameRecord], since_us: Optional[int] = None) -> AnalysisReport:
    counts = Counter(r.frame_class for r in records)
    report = AnalysisReport(
        frames=len(records),
        counts=dict(sorted(counts.items())),
        peers=peer_set(records),
        timeline=election_timeline(records),
    )
    try:
        report.sync_accuracy = sync_accuracy(records, since_us)
    except InsufficientData as exc:
        report.sync_error = str(exc)
    return report
