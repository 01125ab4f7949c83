"""Drifting oscillator clocks with single- or dual-counter operation.

A clock owns a free-running oscillator counter (local time).  In dual-counter
mode a second, software-maintained counter (global time) is derived from the
local counter through a frequency ratio and an offset; synchronization only
ever touches the global counter, and message timestamps come from the local
one.  In single-counter mode there is one register: it counts oscillator
ticks and synchronization steps it directly, so every later timestamp moves
with the step.

All arithmetic on the oscillator is exact integer arithmetic: drift is held
in parts-per-trillion and phase in units of 1e-24 s.
"""

from __future__ import annotations

import enum
import logging
import math
import random
from dataclasses import dataclass

from .engine import PS_PER_NS, PS_PER_S

log = logging.getLogger(__name__)

_PPT = 10**12  # parts-per-trillion denominator


class CounterMode(enum.Enum):
    SINGLE = "single"
    DUAL = "dual"

    @classmethod
    def parse(cls, value: "str | CounterMode") -> "CounterMode":
        if isinstance(value, cls):
            return value
        v = str(value).strip().lower()
        for mode in cls:
            if v in (mode.value, mode.value + "counter", mode.value + "_counter"):
                return mode
        raise ValueError(f"unknown counter mode {value!r}")


@dataclass
class DriftWalk:
    """Mean-reverting wander of the oscillator frequency.

    ``sigma_ppm`` is the stationary standard deviation of the deviation from
    the nominal drift draw; ``tau_s`` its correlation time.  The frequency is
    piecewise constant over ``step_s`` segments.
    """

    sigma_ppm: float = 0.0
    tau_s: float = 10.0
    step_s: float = 0.05

    @property
    def enabled(self) -> bool:
        return self.sigma_ppm > 0.0


class OscillatorClock:
    def __init__(
        self,
        drift_ppm: float = 0.0,
        nominal_freq_hz: float = 200e6,
        mode: CounterMode = CounterMode.DUAL,
        origin_ps: int = 0,
        initial_ns: int = 0,
        drift_bound_ppm: float | None = None,
        walk: DriftWalk | None = None,
        rng: random.Random | None = None,
    ):
        if drift_bound_ppm is not None and abs(drift_ppm) > drift_bound_ppm:
            raise ValueError(f"drift {drift_ppm} ppm exceeds bound {drift_bound_ppm} ppm")
        tick_ps = PS_PER_S / nominal_freq_hz
        if abs(tick_ps - round(tick_ps)) > 1e-9:
            raise ValueError("clock tick must be a whole number of picoseconds")
        self.nominal_freq_hz = nominal_freq_hz
        self.tick_ps = int(round(tick_ps))
        self.drift_ppm = drift_ppm
        self.drift_bound_ppm = drift_bound_ppm
        self.mode = CounterMode.parse(mode)
        self.origin_ps = origin_ps
        self.initial_ns = initial_ns
        self.walk = walk if walk is not None and walk.enabled else None
        self._rng = rng if rng is not None else random.Random(0)

        base_ppt = int(round(drift_ppm * 1e6))
        self._seg_ppt = [base_ppt]
        self._seg_phase = [0]  # phase at segment start, units of ps * 1e-12
        if self.walk is not None:
            self._seg_len = int(round(self.walk.step_s * PS_PER_S))
            self._walk_a = math.exp(-self.walk.step_s / self.walk.tau_s)
            self._walk_dev = 0.0
        else:
            self._seg_len = 0

        # dual counter: global = base_global + (local - base_local) * ratio
        self._base_local = 0
        self._base_global = 0
        self.freq_ratio = 1.0
        # single counter: accumulated steps
        self._steps_ns = 0
        self.global_offset_ns = 0
        self.offsets_applied = 0

    # -- oscillator ---------------------------------------------------------

    def _extend_to(self, index: int) -> None:
        walk = self.walk
        bound = self.drift_bound_ppm
        while len(self._seg_ppt) <= index:
            k = len(self._seg_ppt)
            prev_ppt = self._seg_ppt[-1]
            self._seg_phase.append(self._seg_phase[-1] + self._seg_len * (_PPT + prev_ppt))
            a = self._walk_a
            self._walk_dev = a * self._walk_dev + walk.sigma_ppm * math.sqrt(1 - a * a) * self._rng.gauss(0.0, 1.0)
            ppm = self.drift_ppm + self._walk_dev
            if bound is not None:
                ppm = max(-bound, min(bound, ppm))
            self._seg_ppt.append(int(round(ppm * 1e6)))
            assert len(self._seg_ppt) == k + 1

    def _phase(self, elapsed_ps: int) -> int:
        if self._seg_len == 0:
            return elapsed_ps * (_PPT + self._seg_ppt[0])
        k = elapsed_ps // self._seg_len
        if k >= len(self._seg_ppt):
            self._extend_to(k)
        return self._seg_phase[k] + (elapsed_ps - k * self._seg_len) * (_PPT + self._seg_ppt[k])

    def current_drift_ppm(self, now: int) -> float:
        if self._seg_len == 0:
            return self._seg_ppt[0] / 1e6
        k = max(0, now - self.origin_ps) // self._seg_len
        self._extend_to(k)
        return self._seg_ppt[k] / 1e6

    def local_time(self, now: int) -> int:
        """Oscillator counter in ns, floored to the clock tick."""
        elapsed = now - self.origin_ps
        if elapsed < 0:
            raise ValueError("clock read before its counter started")
        local_ps = self._phase(elapsed) // _PPT
        local_ps -= local_ps % self.tick_ps
        return self.initial_ns + local_ps // PS_PER_NS

    def true_time_for_local(self, local_ns: int) -> int:
        """Earliest simulated time at which ``local_time`` reaches ``local_ns``."""
        target = (local_ns - self.initial_ns) * PS_PER_NS
        if target <= 0:
            return self.origin_ps
        target = -(-target // self.tick_ps) * self.tick_ps
        target_phase = target * _PPT
        if self._seg_len == 0:
            rate = _PPT + self._seg_ppt[0]
            return self.origin_ps + -(-target_phase // rate)
        # jump near the answer, then walk segment by segment
        k = max(0, int(target // self._seg_len) - 1)
        self._extend_to(k + 1)
        while k > 0 and self._seg_phase[k] > target_phase:
            k -= 1
        while True:
            self._extend_to(k + 1)
            if self._seg_phase[k + 1] >= target_phase:
                rate = _PPT + self._seg_ppt[k]
                offset = -(-(target_phase - self._seg_phase[k]) // rate)
                return self.origin_ps + k * self._seg_len + offset
            k += 1

    # -- synchronized time --------------------------------------------------

    def global_time(self, now: int) -> int:
        local = self.local_time(now)
        if self.mode is CounterMode.SINGLE:
            return local + self._steps_ns
        return self._base_global + int((local - self._base_local) * self.freq_ratio)

    def read(self, now: int) -> tuple[int, int]:
        """Latch (local, global) at one instant."""
        local = self.local_time(now)
        if self.mode is CounterMode.SINGLE:
            return local, local + self._steps_ns
        return local, self._base_global + int((local - self._base_local) * self.freq_ratio)

    def timestamp(self, now: int) -> int:
        """Value written into PTP timestamps by this clock."""
        if self.mode is CounterMode.SINGLE:
            return self.local_time(now) + self._steps_ns
        return self.local_time(now)

    def apply_offset(self, offset_ns: int, now: int) -> None:
        """Move global time by ``-offset_ns`` (positive offset: we are ahead)."""
        offset_ns = int(offset_ns)
        if self.mode is CounterMode.SINGLE:
            self._steps_ns -= offset_ns
        else:
            local, glob = self.read(now)
            self._base_local = local
            self._base_global = glob - offset_ns
        self.global_offset_ns -= offset_ns
        self.offsets_applied += 1

    def set_frequency_ratio(self, ratio: float, now: int) -> bool:
        """Rate-correct global time; a single counter cannot be rate-adjusted."""
        if self.mode is CounterMode.SINGLE:
            return False
        local, glob = self.read(now)
        self._base_local = local
        self._base_global = glob
        self.freq_ratio = ratio
        return True


@dataclass
class RateRatioEstimator:
    """Frequency ratio of a remote clock to ours from paired timestamps.

    ``ratio = (send[n+1] - send[n]) / (recv[n+1] - recv[n])`` where ``send``
    is read on the remote clock and ``recv`` on ours.  A pair closer than
    ``min_span_ns`` to the reference is skipped rather than used, which keeps
    timestamp noise from dominating short baselines.
    """

    bound: float = 50e-6
    min_span_ns: int = 0
    prev_send_ts: int | None = None
    prev_recv_ts: int | None = None
    current_ratio: float = 1.0
    updates: int = 0
    rejected: int = 0

    def update(self, send_ts: int, recv_ts: int) -> float:
        if self.prev_send_ts is None:
            self.prev_send_ts, self.prev_recv_ts = send_ts, recv_ts
            return self.current_ratio
        d_send = send_ts - self.prev_send_ts
        d_recv = recv_ts - self.prev_recv_ts
        if d_send <= 0 or d_recv <= 0:
            self.rejected += 1
            log.debug("rate ratio rejected: non-increasing timestamps (%d, %d)", d_send, d_recv)
            self.prev_send_ts, self.prev_recv_ts = send_ts, recv_ts
            return self.current_ratio
        if d_recv < self.min_span_ns:
            return self.current_ratio
        ratio = d_send / d_recv
        self.prev_send_ts, self.prev_recv_ts = send_ts, recv_ts
        if abs(ratio - 1.0) > self.bound:
            self.rejected += 1
            log.debug("rate ratio rejected: %.9f outside bound", ratio)
            return self.current_ratio
        self.current_ratio = ratio
        self.updates += 1
        return ratio

    def reset(self) -> None:
        self.prev_send_ts = self.prev_recv_ts = None
        self.current_ratio = 1.0


def update_rate_ratio(est: RateRatioEstimator, send_ts: int, recv_ts: int) -> float:
    return est.update(send_ts, recv_ts)
