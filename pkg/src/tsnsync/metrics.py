"""Synchronization-error sampling, loss-sync detection and summary statistics."""

from __future__ import annotations

import csv
import io
import math
from collections import Counter
from dataclasses import dataclass, field

from .engine import PS_PER_S


@dataclass(frozen=True)
class SyncSample:
    t: int
    max_abs_offset_ns: int
    worst_node_id: str


@dataclass(frozen=True)
class LossSyncRecord:
    node_id: str
    interval_start: int
    interval_end: int

    @property
    def duration(self) -> int:
        return self.interval_end - self.interval_start


@dataclass
class Summary:
    mean_ns: float
    stddev_ns: float
    max_ns: float
    loss_sync_proportion: float
    samples: int

    def as_dict(self) -> dict:
        return {
            "mean_ns": self.mean_ns,
            "stddev_ns": self.stddev_ns,
            "max_ns": self.max_ns,
            "loss_sync_proportion": self.loss_sync_proportion,
            "samples": self.samples,
        }


def sample_sync_error(global_times: dict[str, int], master_id: str, t: int) -> SyncSample:
    """Largest |G_node - G_master| over every node other than the master.

    Ties go to the node listed first, so the result does not depend on
    anything but the input order.
    """
    ref = global_times[master_id]
    worst, worst_id = -1, ""
    for node_id, g in global_times.items():
        if node_id == master_id:
            continue
        err = abs(g - ref)
        if err > worst:
            worst, worst_id = err, node_id
    return SyncSample(t, max(worst, 0), worst_id)


class MetricsRecorder:
    """Counters, offset applications and error samples collected during a run."""

    def __init__(self, track: str | None = None):
        self.counters: Counter[str] = Counter()
        self.success_times: dict[str, list[int]] = {}
        self.samples: list[SyncSample] = []
        self.track = track
        self.tracked: list[tuple[int, int]] = []  # (t, signed error) of ``track``
        self.events: list[tuple[int, str, str]] = []  # (t, node, what) for notable events

    def count(self, name: str, n: int = 1) -> None:
        self.counters[name] += n

    def note(self, t: int, node: str, what: str) -> None:
        self.count(what)
        self.events.append((t, node, what))

    def register(self, node_id: str) -> None:
        self.success_times.setdefault(node_id, [])

    def record_success(self, node_id: str, t: int) -> None:
        self.success_times.setdefault(node_id, []).append(t)

    def add_sample(self, global_times: dict[str, int], master_id: str, t: int) -> SyncSample:
        s = sample_sync_error(global_times, master_id, t)
        self.samples.append(s)
        if self.track is not None:
            self.tracked.append((t, global_times[self.track] - global_times[master_id]))
        return s


def loss_sync_records(
    success_times: dict[str, list[int]],
    sync_interval: int,
    start: int,
    end: int,
    intervals: int = 3,
) -> list[LossSyncRecord]:
    """Spans in which a node went ``intervals`` sync intervals without success.

    A record opens ``intervals * sync_interval`` after the last success (or
    after ``start`` when monitoring begins) and closes at the next success or
    at ``end``.
    """
    limit = intervals * sync_interval
    out = []
    for node_id in sorted(success_times):
        last = start
        for t in success_times[node_id]:
            if t <= start:
                continue
            if t >= end:
                break
            if t - last > limit:
                out.append(LossSyncRecord(node_id, last + limit, t))
            last = t
        if end - last > limit:
            out.append(LossSyncRecord(node_id, last + limit, end))
    return out


def loss_sync_proportion(records: list[LossSyncRecord], duration: int, node_count: int) -> float:
    if duration <= 0 or node_count <= 0:
        raise ValueError("duration and node_count must be positive")
    return sum(r.duration for r in records) / (duration * node_count)


def summarize(
    samples: list[SyncSample],
    warmup: int = 5 * PS_PER_S,
    loss_sync: float = 0.0,
) -> Summary:
    kept = [s.max_abs_offset_ns for s in samples if s.t >= warmup]
    if not kept:
        raise ValueError("no samples after the warm-up cut")
    n = len(kept)
    mean = sum(kept) / n
    var = sum((x - mean) ** 2 for x in kept) / n
    return Summary(mean, math.sqrt(var), float(max(kept)), loss_sync, n)


def peak_envelope(samples: list[SyncSample], window: int, warmup: int = 0) -> list[tuple[int, int]]:
    """Maximum error in consecutive windows of length ``window``."""
    out: list[tuple[int, int]] = []
    for s in samples:
        if s.t < warmup:
            continue
        k = (s.t - warmup) // window
        start = warmup + k * window
        if out and out[-1][0] == start:
            if s.max_abs_offset_ns > out[-1][1]:
                out[-1] = (start, s.max_abs_offset_ns)
        else:
            out.append((start, s.max_abs_offset_ns))
    return out


def error_episodes(
    samples: list[SyncSample],
    threshold_ns: float,
    window: int,
    warmup: int = 0,
) -> list[tuple[int, int]]:
    """Runs of consecutive windows whose peak error exceeds ``threshold_ns``.

    Returns ``(start, end)`` pairs.  Working on the per-window peak rather
    than raw samples keeps the sawtooth dips between syncs from splitting an
    episode.
    """
    episodes = []
    cur = None
    for start, peak in peak_envelope(samples, window, warmup):
        if peak > threshold_ns:
            if cur is not None and cur[1] == start:
                cur[1] = start + window
            else:
                if cur is not None:
                    episodes.append(tuple(cur))
                cur = [start, start + window]
        elif cur is not None:
            episodes.append(tuple(cur))
            cur = None
    if cur is not None:
        episodes.append(tuple(cur))
    return episodes


def _header(lines: list[str]) -> str:
    return "".join(f"# {line}\n" for line in lines)


def samples_csv(samples: list[SyncSample], header: list[str] = ()) -> str:
    buf = io.StringIO()
    buf.write(_header(list(header)))
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t_s", "max_offset_ns", "worst_node"])
    for s in samples:
        w.writerow([f"{s.t / PS_PER_S:.6f}", s.max_abs_offset_ns, s.worst_node_id])
    return buf.getvalue()


def loss_sync_csv(records: list[LossSyncRecord], header: list[str] = ()) -> str:
    buf = io.StringIO()
    buf.write(_header(list(header)))
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["node", "start_s", "end_s"])
    for r in records:
        w.writerow([r.node_id, f"{r.interval_start / PS_PER_S:.6f}", f"{r.interval_end / PS_PER_S:.6f}"])
    return buf.getvalue()


def summary_text(summary: Summary, counters: dict | None = None, header: list[str] = ()) -> str:
    lines = [_header(list(header))]
    lines.append(f"mean_ns = {summary.mean_ns:.3f}\n")
    lines.append(f"stddev_ns = {summary.stddev_ns:.3f}\n")
    lines.append(f"max_ns = {summary.max_ns:.3f}\n")
    lines.append(f"loss_sync_proportion = {summary.loss_sync_proportion:.6f}\n")
    lines.append(f"samples = {summary.samples}\n")
    for key in sorted(counters or {}):
        lines.append(f"count.{key} = {counters[key]}\n")
    return "".join(lines)
