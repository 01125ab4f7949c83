"""Deterministic discrete-event kernel.

Simulated time is an integer count of picoseconds.  Events with equal fire
times are dequeued in insertion order, so a run is fully determined by the
scenario and the seed.
"""

from __future__ import annotations

import hashlib
import heapq
import random
from dataclasses import dataclass, field
from typing import Any, Callable

PS_PER_NS = 1_000
PS_PER_US = 1_000_000
PS_PER_MS = 1_000_000_000
PS_PER_S = 1_000_000_000_000


def seconds(value: float) -> int:
    """Convert seconds to integer picoseconds (round half to even)."""
    return int(round(value * PS_PER_S))


def to_seconds(ps: int) -> float:
    return ps / PS_PER_S


class SimulationError(RuntimeError):
    """A logic error or invariant violation inside a running simulation."""


@dataclass(order=True)
class Event:
    fire_at: int
    seq: int
    kind: str = field(compare=False)
    target: str = field(compare=False)
    action: Callable[..., Any] = field(compare=False, repr=False)
    args: tuple = field(compare=False, default=(), repr=False)
    traced: bool = field(compare=False, default=True)
    cancelled: bool = field(compare=False, default=False)

    def cancel(self) -> None:
        self.cancelled = True


class RngStreams:
    """Named pseudo-random streams derived from one run seed.

    Each stochastic consumer draws from its own ``random.Random`` so adding
    a consumer never shifts the draws seen by another.
    """

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._streams: dict[str, random.Random] = {}

    def stream(self, stream_id: str) -> random.Random:
        rng = self._streams.get(stream_id)
        if rng is None:
            digest = hashlib.sha256(f"{self.seed}/{stream_id}".encode()).digest()
            rng = random.Random(int.from_bytes(digest[:8], "big"))
            self._streams[stream_id] = rng
        return rng


class Engine:
    def __init__(self, seed: int = 0):
        self.now = 0
        self.rng = RngStreams(seed)
        self._queue: list[Event] = []
        self._seq = 0
        self._trace = hashlib.blake2b(digest_size=16)
        self.processed = 0

    def schedule(
        self,
        fire_at: int,
        action: Callable[..., Any],
        *args: Any,
        kind: str = "event",
        target: str = "",
        traced: bool = True,
    ) -> Event:
        if fire_at < self.now:
            raise SimulationError(
                f"cannot schedule {kind!r} for {target!r} at {fire_at} ps; "
                f"current time is {self.now} ps"
            )
        ev = Event(int(fire_at), self._seq, kind, target, action, args, traced)
        self._seq += 1
        heapq.heappush(self._queue, ev)
        return ev

    def schedule_in(self, delay: int, action: Callable[..., Any], *args: Any, **kw: Any) -> Event:
        return self.schedule(self.now + delay, action, *args, **kw)

    def pending(self) -> int:
        return sum(1 for ev in self._queue if not ev.cancelled)

    def peek_time(self) -> int | None:
        while self._queue and self._queue[0].cancelled:
            heapq.heappop(self._queue)
        return self._queue[0].fire_at if self._queue else None

    def run_until(self, end: int) -> int:
        """Process every event with ``fire_at <= end``; return how many ran."""
        count = 0
        queue = self._queue
        trace = self._trace
        while queue and queue[0].fire_at <= end:
            ev = heapq.heappop(queue)
            if ev.cancelled:
                continue
            self.now = ev.fire_at
            if ev.traced:
                trace.update(f"{ev.fire_at}|{ev.kind}|{ev.target};".encode())
            ev.action(*ev.args)
            count += 1
        if end > self.now:
            self.now = end
        self.processed += count
        return count

    def trace_digest(self) -> str:
        return self._trace.hexdigest()
