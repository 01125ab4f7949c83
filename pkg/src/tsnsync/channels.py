"""Wired and 5G wireless link models.

Wired egress ports are FIFO queues fed by PTP frames and by background
traffic.  Background traffic is carried as a piecewise-constant bit rate and
the queue tracks unfinished work exactly as a fluid, which is what a
work-conserving FIFO sees; a frame enqueued at ``t`` starts transmission
after ``backlog(t) / bandwidth``.

The wireless hop is modelled per frame: every transmission attempt fails
independently with probability ``target_bler``; failed attempts are retried
one HARQ round trip later up to ``harq_max_retx`` times.  Frames leave the
receiving MAC in order, as RLC/PDCP reordering would deliver them.
"""

from __future__ import annotations

import bisect
import enum
import random
from dataclasses import dataclass, field

from .engine import PS_PER_NS, PS_PER_S, PS_PER_US
from .mobility import Trajectory, distance, relative_velocity_along_los
from .ptp import SPEED_OF_LIGHT


def propagation_delay(distance_m: float, v_rel_along_c_mps: float = 0.0) -> float:
    """Free-space delay in seconds for a link whose length changes at ``v``."""
    if distance_m < 0:
        raise ValueError("distance must be non-negative")
    return distance_m / abs(SPEED_OF_LIGHT + v_rel_along_c_mps)


class LoadPattern(enum.Enum):
    PERIODIC = "periodic"
    RANDOM_BURST = "random"


@dataclass
class LoadGenerator:
    """Background traffic source.

    ``PERIODIC`` offers ``rate_bps`` continuously.  ``RANDOM_BURST`` redraws
    its rate uniformly from ``burst_range_bps`` every ``epoch_s``.  Draws come
    in antithetic pairs ``(u, lo + hi - u)`` so that every two epochs offer
    exactly the mean rate and a 10 s window does not wander off it.
    """

    rate_bps: float = 0.0
    frame_size_bytes: int = 1500
    pattern: LoadPattern = LoadPattern.PERIODIC
    burst_range_bps: tuple[float, float] = (0.0, 0.0)
    epoch_s: float = 0.5
    rng: random.Random | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        if self.pattern is LoadPattern.RANDOM_BURST and self.rng is None:
            self.rng = random.Random(0)
        self._epoch_ps = int(round(self.epoch_s * PS_PER_S))
        self._rates: list[float] = []

    @property
    def mean_rate_bps(self) -> float:
        if self.pattern is LoadPattern.PERIODIC:
            return self.rate_bps
        lo, hi = self.burst_range_bps
        return (lo + hi) / 2

    def _epoch_rate(self, k: int) -> float:
        lo, hi = self.burst_range_bps
        while len(self._rates) <= k:
            if len(self._rates) % 2:
                self._rates.append(lo + hi - self._rates[-1])
            else:
                self._rates.append(self.rng.uniform(lo, hi))
        return self._rates[k]

    def segments(self, t0: int, t1: int):
        """Yield ``(start, end, rate_bps)`` pieces covering ``[t0, t1)``."""
        if t1 <= t0:
            return
        if self.pattern is LoadPattern.PERIODIC:
            yield t0, t1, self.rate_bps
            return
        k = t0 // self._epoch_ps
        t = t0
        while t < t1:
            end = min(t1, (k + 1) * self._epoch_ps)
            yield t, end, self._epoch_rate(k)
            t = end
            k += 1

    def offered_bits(self, t0: int, t1: int) -> float:
        return sum(rate * (b - a) / PS_PER_S for a, b, rate in self.segments(t0, t1))

    def frames(self, t0: int, t1: int) -> list[int]:
        """Discrete frame arrival times: evenly spaced at the current rate."""
        out = []
        frame_bits = self.frame_size_bytes * 8
        credit = 0.0
        for a, b, rate in self.segments(t0, t1):
            if rate <= 0:
                continue
            spacing = frame_bits / rate * PS_PER_S
            t = a + (1.0 - credit) * spacing
            while t < b:
                out.append(int(t))
                t += spacing
            credit = 1.0 - (t - b) / spacing
        return out


class EgressQueue:
    """FIFO egress port shared by PTP frames and background load."""

    def __init__(
        self,
        bandwidth_bps: float,
        capacity_bytes: int = 512_000,
        loads: list[LoadGenerator] | None = None,
        rng: random.Random | None = None,
    ):
        if bandwidth_bps <= 0:
            raise ValueError("bandwidth must be positive")
        self.bandwidth_bps = bandwidth_bps
        self.capacity_bits = capacity_bytes * 8
        self.loads = list(loads or [])
        self.rng = rng or random.Random(0)
        self.backlog_bits = 0.0
        self._t = 0
        self._full_rate = 0.0  # offered rate while pinned at capacity
        self.dropped = 0
        self.enqueued = 0

    def _advance(self, t: int) -> None:
        if t <= self._t:
            return
        if not self.loads:
            drained = self.bandwidth_bps * (t - self._t) / PS_PER_S
            self.backlog_bits = max(0.0, self.backlog_bits - drained)
            self._full_rate = 0.0
            self._t = t
            return
        # merge the piecewise-constant rates of all generators
        cuts = {self._t, t}
        pieces = []
        for gen in self.loads:
            segs = list(gen.segments(self._t, t))
            pieces.append(segs)
            cuts.update(a for a, _, _ in segs)
        edges = sorted(cuts)
        backlog = self.backlog_bits
        full_rate = 0.0
        for a, b in zip(edges, edges[1:]):
            rate = 0.0
            for segs in pieces:
                starts = [s[0] for s in segs]
                i = bisect.bisect_right(starts, a) - 1
                if i >= 0:
                    rate += segs[i][2]
            dt = (b - a) / PS_PER_S
            backlog += (rate - self.bandwidth_bps) * dt
            if backlog <= 0.0:
                backlog = 0.0
                full_rate = 0.0
            elif backlog >= self.capacity_bits:
                backlog = float(self.capacity_bits)
                full_rate = rate
            else:
                full_rate = 0.0
        self.backlog_bits = backlog
        self._full_rate = full_rate
        self._t = t

    def enqueue(self, t: int, size_bytes: int) -> int | None:
        """Return the transmission start time, or None if the frame is dropped."""
        if size_bytes <= 0:
            raise ValueError("frame size must be positive")
        self._advance(t)
        bits = size_bytes * 8
        if self.backlog_bits + bits > self.capacity_bits:
            # at saturation space frees at the line rate and is claimed by
            # whichever arrival comes next
            rate = self._full_rate
            if rate <= 0 or self.rng.random() >= self.bandwidth_bps / rate:
                self.dropped += 1
                return None
            start = t + int(round((self.capacity_bits - bits) * PS_PER_S / self.bandwidth_bps))
            self.enqueued += 1
            return start
        start = t + int(round(self.backlog_bits * PS_PER_S / self.bandwidth_bps))
        self.backlog_bits += bits
        self.enqueued += 1
        return start

    def serialization_ps(self, size_bytes: int) -> int:
        return int(round(size_bytes * 8 * PS_PER_S / self.bandwidth_bps))


@dataclass
class Delivery:
    tx_time: int  # first bit leaves the MAC (transmit timestamp point)
    rx_time: int  # first bit reaches the peer (receive timestamp point)
    deliver_time: int  # whole frame handed to the peer


class WiredLink:
    """Full-duplex Ethernet link; ``end`` 0 transmits a -> b, 1 transmits b -> a."""

    kind = "wired"

    def __init__(
        self,
        name: str,
        bandwidth_bps: float = 1e9,
        propagation_delay_ns: float = 50.0,
        capacity_bytes: int = 512_000,
        loads: tuple[list[LoadGenerator], list[LoadGenerator]] | None = None,
        rng: random.Random | None = None,
    ):
        self.name = name
        self.bandwidth_bps = bandwidth_bps
        self.propagation_ps = int(round(propagation_delay_ns * PS_PER_NS))
        rng = rng or random.Random(0)
        loads = loads or ([], [])
        self.queues = (
            EgressQueue(bandwidth_bps, capacity_bytes, loads[0], rng),
            EgressQueue(bandwidth_bps, capacity_bytes, loads[1], rng),
        )

    def transmit(self, end: int, size_bytes: int, t_enqueue: int) -> Delivery | None:
        queue = self.queues[end]
        start = queue.enqueue(t_enqueue, size_bytes)
        if start is None:
            return None
        rx = start + self.propagation_ps
        return Delivery(start, rx, rx + queue.serialization_ps(size_bytes))

    @property
    def dropped(self) -> int:
        return self.queues[0].dropped + self.queues[1].dropped


def wired_transmit(link: WiredLink, size_bytes: int, t_enqueue: int, end: int = 0) -> Delivery | None:
    return link.transmit(end, size_bytes, t_enqueue)


@dataclass
class Attempt:
    tx_time: int
    ok: bool
    rx_time: int | None  # None for a failed attempt


@dataclass
class HarqOutcome:
    attempts: list[Attempt]
    delivered: bool
    feedback_time: int  # HARQ-ACK of the good attempt, or the final NACK
    rx_time: int | None = None
    deliver_time: int | None = None

    @property
    def good_attempt(self) -> Attempt | None:
        return self.attempts[-1] if self.delivered else None


class WirelessLink:
    """gNB <-> UE radio hop. ``end`` 0 is downlink (gNB transmits), 1 uplink."""

    kind = "wireless"

    def __init__(
        self,
        name: str,
        gnb: Trajectory,
        ue: Trajectory,
        target_bler: float = 1e-6,
        harq_max_retx: int = 4,
        harq_rtt_us: float = 500.0,
        base_latency_us: float = 200.0,
        rng: random.Random | None = None,
    ):
        if not 0.0 <= target_bler <= 1.0:
            raise ValueError("target_bler must be a probability")
        self.name = name
        self.gnb = gnb
        self.ue = ue
        self.target_bler = target_bler
        self.harq_max_retx = harq_max_retx
        self.harq_rtt_ps = int(round(harq_rtt_us * PS_PER_US))
        self.base_latency_ps = int(round(base_latency_us * PS_PER_US))
        self.rng = rng or random.Random(0)
        self._last_delivery = [0, 0]
        self.attempts = 0
        self.lost = 0

    def propagation_ps(self, t: int) -> int:
        d = distance(self.gnb.position_at(t), self.ue.position_at(t))
        v = relative_velocity_along_los(self.ue, self.gnb, t)
        return int(round(propagation_delay(d, v) * PS_PER_S))

    def transmit(self, end: int, t_start: int) -> HarqOutcome:
        attempts = []
        for i in range(self.harq_max_retx + 1):
            tx = t_start + i * self.harq_rtt_ps
            self.attempts += 1
            ok = self.rng.random() >= self.target_bler
            if ok:
                rx = tx + self.base_latency_ps + self.propagation_ps(tx)
                attempts.append(Attempt(tx, True, rx))
                deliver = max(rx, self._last_delivery[end])
                self._last_delivery[end] = deliver
                return HarqOutcome(attempts, True, tx + self.harq_rtt_ps, rx, deliver)
            attempts.append(Attempt(tx, False, None))
        self.lost += 1
        return HarqOutcome(attempts, False, attempts[-1].tx_time + self.harq_rtt_ps)


def wireless_transmit(link: WirelessLink, t_start: int, end: int = 0) -> HarqOutcome:
    return link.transmit(end, t_start)
