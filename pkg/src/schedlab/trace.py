"""Schedule traces: per-slot assignments plus a chronological decision log.

Both the simulator and the offline solver emit this structure, and the text
export is shared by the two.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, TextIO

import numpy as np

from .model import Scenario

TRACE_HEADER = "# schedlab-trace v1"


class EventKind(str, Enum):
    COMPLETE = "complete"
    EXPIRE = "expire"
    PREEMPT = "preempt"
    RESUME = "resume"
    SCHEDULE = "schedule"
    ARRIVAL_SCHEDULE = "arrival-schedule"
    ARRIVAL_REJECT = "arrival-reject"


_KIND_RANK = {kind: k for k, kind in enumerate(EventKind)}
START_KINDS = frozenset({EventKind.SCHEDULE, EventKind.ARRIVAL_SCHEDULE, EventKind.RESUME})


@dataclass(frozen=True, order=True)
class Event:
    time: int
    kind: EventKind
    job: int
    server: int = -1

    def sort_key(self):
        return (self.time, _KIND_RANK[self.kind], self.job, self.server)


@dataclass(frozen=True)
class Segment:
    """Job ``job`` ran on ``server`` during slots ``start .. end - 1``."""

    server: int
    job: int
    start: int
    end: int


@dataclass
class ScheduleTrace:
    segments: list[Segment] = field(default_factory=list)
    events: list[Event] = field(default_factory=list)

    def canonical(self) -> "ScheduleTrace":
        segs = sorted(self.segments, key=lambda s: (s.start, s.server, s.job))
        evs = sorted(self.events, key=Event.sort_key)
        return ScheduleTrace(segs, evs)

    def assignments(self) -> list[tuple[int, int, int]]:
        """One ``(t, server, job)`` record per executed slot, sorted."""
        out = [(t, s.server, s.job) for s in self.segments for t in range(s.start, s.end)]
        out.sort()
        return out

    def allocation(self, scenario: Scenario) -> np.ndarray:
        """Boolean ``y[i, t - t_min, j]`` allocation tensor."""
        span = scenario.t_max - scenario.t_min + 1
        y = np.zeros((scenario.num_servers, span, scenario.num_jobs), dtype=bool)
        for s in self.segments:
            y[s.server, s.start - scenario.t_min : s.end - scenario.t_min, s.job] = True
        return y

    def completed(self) -> dict[int, int]:
        return {e.job: e.server for e in self.events if e.kind is EventKind.COMPLETE}

    def value(self, scenario: Scenario) -> float:
        cv = scenario.completion_value
        return math.fsum(cv[i, j] for j, i in self.completed().items())

    def preemptions(self) -> list[Event]:
        return [e for e in self.events if e.kind is EventKind.PREEMPT]


def segments_from_allocation(y: np.ndarray, t_min: int) -> list[Segment]:
    segs = []
    num_servers, span, num_jobs = y.shape
    for i in range(num_servers):
        for j in range(num_jobs):
            col = y[i, :, j]
            if not col.any():
                continue
            padded = np.concatenate([[False], col, [False]]).astype(np.int8)
            diff = np.diff(padded)
            starts = np.flatnonzero(diff == 1)
            ends = np.flatnonzero(diff == -1)
            segs.extend(Segment(i, j, int(a) + t_min, int(b) + t_min) for a, b in zip(starts, ends))
    segs.sort(key=lambda s: (s.start, s.server, s.job))
    return segs


def dump_trace(trace: ScheduleTrace, fh: TextIO) -> None:
    fh.write(TRACE_HEADER + "\n")
    fh.write("record\ttime\tserver\tjob\n")
    for t, i, j in trace.assignments():
        fh.write(f"run\t{t}\t{i}\t{j}\n")
    for e in trace.canonical().events:
        fh.write(f"{e.kind.value}\t{e.time}\t{e.server}\t{e.job}\n")


def load_trace(lines: Iterable[str]) -> ScheduleTrace:
    it = iter(lines)
    header = next(it, "").strip()
    if header != TRACE_HEADER:
        raise ValueError(f"not a trace file (header {header!r})")
    columns = next(it, "").strip().split("\t")
    if columns != ["record", "time", "server", "job"]:
        raise ValueError(f"unexpected trace columns {columns}")
    runs: dict[tuple[int, int], list[int]] = {}
    events = []
    for line in it:
        line = line.strip()
        if not line:
            continue
        rec, t, i, j = line.split("\t")
        t, i, j = int(t), int(i), int(j)
        if rec == "run":
            runs.setdefault((i, j), []).append(t)
        else:
            events.append(Event(t, EventKind(rec), j, i))
    segments = []
    for (i, j), slots in runs.items():
        slots.sort()
        start = prev = slots[0]
        for t in slots[1:]:
            if t != prev + 1:
                segments.append(Segment(i, j, start, prev + 1))
                start = t
            prev = t
        segments.append(Segment(i, j, start, prev + 1))
    return ScheduleTrace(segments, events).canonical()
