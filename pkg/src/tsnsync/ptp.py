"""PTP messages and the synchronization arithmetic.

Everything here is a pure function of timestamps.  Sign conventions:

* an *offset* is ``slave_time - master_time``; a positive offset means the
  slave is ahead and is corrected by stepping its global time back;
* a *step* is the change written into a counter, ``new - old``, so applying
  offset ``o`` is a step of ``-o``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

SPEED_OF_LIGHT = 299_792_458.0  # m/s
SEQ_MODULUS = 1 << 16


class MeasurementFault(ValueError):
    """A delay measurement that cannot be physical (negative)."""


class MessageKind(enum.Enum):
    SYNC = "Sync"
    FOLLOW_UP = "Follow_Up"
    PDELAY_REQ = "Pdelay_Req"
    PDELAY_RESP = "Pdelay_Resp"
    PDELAY_RESP_FOLLOW_UP = "Pdelay_Resp_Follow_Up"

    @property
    def is_event(self) -> bool:
        """Event messages are timestamped on transmit and receive."""
        return self in (MessageKind.SYNC, MessageKind.PDELAY_REQ, MessageKind.PDELAY_RESP)


# on-wire frame sizes in bytes, Ethernet overhead included
FRAME_BYTES = {
    MessageKind.SYNC: 86,
    MessageKind.FOLLOW_UP: 90,
    MessageKind.PDELAY_REQ: 68,
    MessageKind.PDELAY_RESP: 68,
    MessageKind.PDELAY_RESP_FOLLOW_UP: 68,
}


def next_seq(seq: int) -> int:
    return (seq + 1) % SEQ_MODULUS


@dataclass
class PtpMessage:
    kind: MessageKind
    seq_id: int
    source_port: str
    origin_ts_ns: int | None = None
    correction_field_ns: int = 0
    # Follow_Up: cumulative frequency ratio grandmaster / sender
    rate_ratio: float = 1.0
    # Pdelay_Resp: t2.  Pdelay_Resp_Follow_Up: t3 in origin_ts_ns.
    request_receipt_ts_ns: int | None = None
    # Pdelay_Resp_Follow_Up: responder counter step between t2 and t3
    responder_step_ns: int = 0
    # filled in by the transmitting MAC; never read by protocol logic
    meta: dict = field(default_factory=dict, repr=False)

    @property
    def size_bytes(self) -> int:
        return FRAME_BYTES[self.kind]


@dataclass(frozen=True)
class PdelayTimestamps:
    t1: int  # Pdelay_Req sent, requester clock
    t2: int  # Pdelay_Req received, responder clock
    t3: int  # Pdelay_Resp sent, responder clock
    t4: int  # Pdelay_Resp received, requester clock


@dataclass(frozen=True)
class SyncTimestamps:
    t5: int  # Sync origin at the grandmaster (carried by Follow_Up)
    t6: int  # Sync receipt at the slave
    cf_sync: int = 0
    cf_followup: int = 0

    @property
    def correction(self) -> int:
        return self.cf_sync + self.cf_followup


class DelayMode(enum.Enum):
    STANDARD = "standard"
    DIRECT_AFTER_CONVERGENCE = "direct"


@dataclass
class PeerDelayState:
    measured_delay_ns: int | None = None
    measured_at: int = 0
    mode: DelayMode = DelayMode.STANDARD
    converged: bool = False
    stable_count: int = 0
    faults: int = 0

    def record(self, delay_ns: int, now: int) -> None:
        self.measured_delay_ns = delay_ns
        self.measured_at = now

    def observe_offset(self, offset_ns: int, threshold_ns: int = 100, required: int = 8) -> bool:
        """Track the convergence criterion; returns True once converged."""
        if self.converged:
            return True
        if abs(offset_ns) < threshold_ns:
            self.stable_count += 1
        else:
            self.stable_count = 0
        if self.stable_count >= required:
            self.converged = True
        return self.converged


def peer_delay(ts: PdelayTimestamps, rate_ratio: float = 1.0) -> int:
    """Link delay from one Pdelay exchange, in ns (responder time base)."""
    delay = (rate_ratio * (ts.t4 - ts.t1) - (ts.t3 - ts.t2)) / 2.0
    if delay < 0:
        raise MeasurementFault(f"negative peer delay {delay:.1f} ns")
    return int(round(delay))


def peer_delay_base(ts: PdelayTimestamps) -> int:
    return peer_delay(ts, 1.0)


def sync_offset(ts: SyncTimestamps, peer_delay_ns: int) -> int:
    return ts.t6 - ts.t5 - peer_delay_ns - ts.correction


def direct_peer_delay(t5: int, t6_global: int, correction_ns: int = 0) -> int:
    """Link delay read straight off a synchronized receiver's global clock."""
    delay = t6_global - t5 - correction_ns
    if delay < 0:
        raise MeasurementFault(f"negative direct peer delay {delay} ns")
    return delay


def collision_compensation_s1(offset_parent_ns: float, offset_child_ns: float, rate_ratio: float = 1.0) -> float:
    """Peer-delay error when both ends stepped mid-exchange (responder replied late).

    Offsets here are counter steps (new - old).  Subtract the result from the
    measured delay to recover the undisturbed value.
    """
    return 0.5 * rate_ratio * offset_child_ns - 0.5 * offset_parent_ns


def collision_error_s2(offset_parent_ns: float, offset_child_ns: float, rate_ratio: float = 1.0) -> float:
    """Expected error when the responder replied before forwarding Sync."""
    return rate_ratio * offset_child_ns - 0.5 * offset_parent_ns


def mobility_error(d_at_t9_ns: float, d_at_t5_ns: float) -> float:
    """Offset error caused by using a delay measured at T9 for a Sync sent at T5.

    ``d(t)`` is the true-minus-measured peer delay at time ``t``.
    """
    return d_at_t9_ns - d_at_t5_ns
