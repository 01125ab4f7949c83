"""Grandmaster, transparent-clock and slave behaviour on top of the channels.

Every non-grandmaster node has exactly one slave port (toward its parent in
the synchronization tree) and zero or more master ports.  A node that has
master ports forwards Sync/Follow_Up as a peer-to-peer transparent clock and
also disciplines its own clock from them; a node without master ports is a
plain slave endpoint.

Timestamps are captured at the MAC/PHY boundary: on transmit when the first
bit leaves, on receive when the first bit arrives.  Wireless transmissions
report every HARQ attempt; with ``harq_gated_followup`` the upper layer waits
for the HARQ-ACK and uses the timestamp of the attempt that got through.
"""

from __future__ import annotations

import enum
import logging
import random
from dataclasses import dataclass, field

from .channels import HarqOutcome, WiredLink, WirelessLink
from .clock import CounterMode, OscillatorClock, RateRatioEstimator
from .engine import PS_PER_NS, PS_PER_S, PS_PER_US, Engine
from .metrics import MetricsRecorder
from .ptp import (
    DelayMode,
    MeasurementFault,
    MessageKind,
    PdelayTimestamps,
    PeerDelayState,
    PtpMessage,
    SyncTimestamps,
    collision_compensation_s1,
    direct_peer_delay,
    next_seq,
    peer_delay,
    sync_offset,
)

log = logging.getLogger(__name__)


class NodeKind(enum.Enum):
    GRANDMASTER = "grandmaster"
    TRANSPARENT_CLOCK = "transparent_clock"
    SLAVE_ENDPOINT = "slave_endpoint"


@dataclass
class NodeConfig:
    sync_interval_s: float = 0.125
    pdelay_interval_s: float = 1.0
    pdelay_timeout_s: float = 0.1
    harq_gated_followup: bool = True
    mobility_fix: DelayMode = DelayMode.STANDARD
    binding_mode: str = "auto"  # auto | on | off
    direct_delay_lag: bool = False
    direct_reanchor: bool = True
    collision_compensation: bool = True
    convergence_threshold_ns: int = 100
    convergence_count: int = 8
    residence_us: tuple[float, float] = (5.0, 20.0)
    turnaround_us: tuple[float, float] = (10.0, 1000.0)
    followup_delay_us: float = 10.0
    rate_ratio_min_span_s: float = 0.0
    sync_enabled: bool = True
    # after this many silent sync intervals the node stops following the
    # grandmaster's rate unless holdover is kept
    sync_receipt_timeout: int = 3
    holdover: bool = False

    def __post_init__(self) -> None:
        if self.sync_interval_s <= 0 or self.pdelay_interval_s <= 0:
            raise ValueError("sync and pdelay intervals must be positive")
        if self.binding_mode not in ("auto", "on", "off"):
            raise ValueError("binding_mode must be auto, on or off")


class Port:
    """One end of a link as seen by a node."""

    def __init__(self, node: "PtpNode", link: WiredLink | WirelessLink, end: int, jitter_ns: float = 0.0):
        self.node = node
        self.link = link
        self.end = end
        self.peer: Port | None = None
        self.jitter_ps = int(round(jitter_ns * PS_PER_NS))
        self.name = f"{node.name}:{link.name}"

    @property
    def wireless(self) -> bool:
        return self.link.kind == "wireless"


@dataclass
class _SyncRecord:
    seq: int
    t6: int  # timestamp-counter value at receipt
    t6_global: int
    rx_time: int
    cf_sync: int
    followup: PtpMessage | None = None
    # set once this node has processed the pair: (CF to forward, ratio to forward)
    forward: tuple[int, float] | None = None
    egress: dict = field(default_factory=dict)  # port name -> [timestamps]
    sent: dict = field(default_factory=dict)  # port name -> Follow_Ups sent
    waiting_binding: bool = False


@dataclass
class _PdelayExchange:
    seq: int
    started: int
    t1: int | None = None
    t2: int | None = None
    t3: int | None = None
    t4: int | None = None
    step_t1: int = 0  # own accumulated step when t1 was latched
    step_t4: int = 0
    responder_step: int = 0
    binding: bool = False
    timeout: object = None


class PtpNode:
    def __init__(
        self,
        name: str,
        clock: OscillatorClock,
        network: "Network",
        config: NodeConfig | None = None,
        rng: random.Random | None = None,
        ts_rng: random.Random | None = None,
    ):
        self.name = name
        self.clock = clock
        self.net = network
        self.cfg = config or NodeConfig()
        self.rng = rng or random.Random(0)
        self.ts_rng = ts_rng or random.Random(1)
        self.ports: dict[str, Port] = {}
        self.slave_port: Port | None = None
        self.master_ports: list[Port] = []
        self.is_grandmaster = False
        self.cum_ratio = 1.0

        self.pdelay = PeerDelayState(mode=self.cfg.mobility_fix)
        self.estimator = RateRatioEstimator(min_span_ns=int(2 * self.cfg.rate_ratio_min_span_s * 1e9))
        self._exchange: _PdelayExchange | None = None
        self._pdelay_seq = 0
        self._pending: _SyncRecord | None = None
        self._sync_seq = 0
        self._tx_attempts: dict[int, list[tuple[int, int]]] = {}  # id(msg) -> [(ts, step)]
        self._responder: dict[tuple[str, int], int] = {}  # (port, seq) -> step at t2
        self._direct_prev: int | None = None
        self._receipt_timer = None
        self._anchor_delay: int | None = None  # fresh exchange result awaiting the next Sync

    # -- setup --------------------------------------------------------------

    @property
    def kind(self) -> NodeKind:
        if self.is_grandmaster:
            return NodeKind.GRANDMASTER
        return NodeKind.TRANSPARENT_CLOCK if self.master_ports else NodeKind.SLAVE_ENDPOINT

    def add_port(self, port: Port) -> None:
        self.ports[port.name] = port

    @property
    def binding(self) -> bool:
        if self.slave_port is None:
            return False
        mode = self.cfg.binding_mode
        if mode == "auto":
            return self.slave_port.wireless and self.cfg.mobility_fix is DelayMode.STANDARD
        return mode == "on"

    @property
    def direct_mode(self) -> bool:
        return (
            self.cfg.mobility_fix is DelayMode.DIRECT_AFTER_CONVERGENCE
            and self.slave_port is not None
            and self.slave_port.wireless
        )

    def start(self) -> None:
        eng = self.net.engine
        if not self.cfg.sync_enabled:
            return
        if self.is_grandmaster:
            eng.schedule(self._gm_fire_time(1), self._gm_tick, 1, kind="sync_timer", target=self.name)
        if self.slave_port is not None:
            period = int(round(self.cfg.pdelay_interval_s * PS_PER_S))
            phase = int(self.rng.random() * period)
            eng.schedule(phase, self._pdelay_timer, kind="pdelay_timer", target=self.name)

    # -- timestamping -------------------------------------------------------

    def _capture(self, port: Port, t: int) -> tuple[int, int]:
        if port.jitter_ps:
            t += int(self.ts_rng.random() * port.jitter_ps)
        return self.clock.timestamp(t), self.clock.global_time(t)

    def _delay(self, bounds_us: tuple[float, float]) -> int:
        lo, hi = bounds_us
        return int(round(self.rng.uniform(lo, hi) * PS_PER_US))

    @property
    def _fu_delay(self) -> int:
        return int(round(self.cfg.followup_delay_us * PS_PER_US))

    @property
    def _interval_ps(self) -> int:
        return int(round(self.cfg.sync_interval_s * PS_PER_S))

    # -- grandmaster --------------------------------------------------------

    def _gm_fire_time(self, k: int) -> int:
        step_ns = int(round(self.cfg.sync_interval_s * 1e9))
        return max(self.net.engine.now, self.clock.true_time_for_local(self.clock.initial_ns + k * step_ns))

    def _gm_tick(self, k: int) -> None:
        self._sync_seq = next_seq(self._sync_seq)
        now = self.net.engine.now
        for port in self.master_ports:
            msg = PtpMessage(MessageKind.SYNC, self._sync_seq, port.name)
            msg.meta["sent_at"] = now
            self.net.send(port, msg)
        self.net.engine.schedule(self._gm_fire_time(k + 1), self._gm_tick, k + 1, kind="sync_timer", target=self.name)

    # -- transmit side ------------------------------------------------------

    def on_tx(self, port: Port, msg: PtpMessage, t: int, attempt: int) -> None:
        ts, _ = self._capture(port, t)
        self._tx_attempts.setdefault(id(msg), []).append((ts, self.clock.global_offset_ns))
        if port.wireless and self.cfg.harq_gated_followup:
            return
        if port.wireless and attempt > 0:
            return  # without the gate the first reported timestamp is final
        self._tx_done(port, msg, ts, self.clock.global_offset_ns)
        if not port.wireless:
            self._tx_attempts.pop(id(msg), None)

    def on_harq_feedback(self, port: Port, msg: PtpMessage, outcome: HarqOutcome) -> None:
        attempts = self._tx_attempts.pop(id(msg), [])
        now = self.net.engine.now
        if not outcome.delivered:
            return  # already counted as lost when it was sent
        good = len(outcome.attempts) - 1
        if not self.cfg.harq_gated_followup:
            if good > 0 and msg.kind in (MessageKind.SYNC, MessageKind.PDELAY_RESP):
                log.warning("%s: %s seq %d delivered on attempt %d, Follow_Up carried attempt 0",
                            self.name, msg.kind.value, msg.seq_id, good)
                self.net.metrics.note(now, self.name, "followup_origin_mismatch")
            return
        if msg.kind is MessageKind.SYNC:
            sent = msg.meta.get("sent_at", now)
            if now - sent > self._interval_ps:
                self.net.metrics.note(now, self.name, "followup_timeout")
                return
        ts, step = attempts[good]
        self._tx_done(port, msg, ts, step)

    def _tx_done(self, port: Port, msg: PtpMessage, ts: int, step: int) -> None:
        kind = msg.kind
        if kind is MessageKind.SYNC:
            if self.is_grandmaster:
                fu = PtpMessage(MessageKind.FOLLOW_UP, msg.seq_id, port.name, origin_ts_ns=ts)
                self.net.send_later(self._fu_delay, port, fu)
            else:
                rec = msg.meta.get("record")
                if rec is not None:
                    rec.egress.setdefault(port.name, []).append(ts)
                    self._forward_followups(rec)
        elif kind is MessageKind.PDELAY_REQ:
            ex = self._exchange
            if ex is not None and ex.seq == msg.seq_id and ex.t1 is None:
                ex.t1, ex.step_t1 = ts, step
                self._try_complete_pdelay()
        elif kind is MessageKind.PDELAY_RESP:
            step_t2 = self._responder.get((port.name, msg.seq_id))
            moved = 0
            if step_t2 is not None and self.clock.mode is CounterMode.SINGLE:
                moved = step - step_t2
            rfu = PtpMessage(
                MessageKind.PDELAY_RESP_FOLLOW_UP, msg.seq_id, port.name,
                origin_ts_ns=ts, responder_step_ns=moved,
            )
            self.net.send_later(self._fu_delay, port, rfu)

    # -- receive side -------------------------------------------------------

    def on_receive(self, port: Port, msg: PtpMessage, rx_time: int) -> None:
        kind = msg.kind
        if kind is MessageKind.PDELAY_REQ:
            self._respond(port, msg, rx_time)
            return
        if port is not self.slave_port:
            return
        if kind is MessageKind.SYNC:
            self._on_sync(port, msg, rx_time)
        elif kind is MessageKind.FOLLOW_UP:
            self._on_followup(msg)
        elif kind is MessageKind.PDELAY_RESP:
            ex = self._exchange
            if ex is None or ex.seq != msg.seq_id or ex.t4 is not None:
                self.net.metrics.count("pdelay_seq_mismatch")
                return
            ex.t4, _ = self._capture(port, rx_time)
            ex.step_t4 = self.clock.global_offset_ns
            ex.t2 = msg.request_receipt_ts_ns
            self._try_complete_pdelay()
        elif kind is MessageKind.PDELAY_RESP_FOLLOW_UP:
            ex = self._exchange
            if ex is None or ex.seq != msg.seq_id or ex.t3 is not None:
                self.net.metrics.count("pdelay_seq_mismatch")
                return
            ex.t3 = msg.origin_ts_ns
            ex.responder_step = msg.responder_step_ns
            self._try_complete_pdelay()

    def _on_sync(self, port: Port, msg: PtpMessage, rx_time: int) -> None:
        old = self._pending
        if old is not None and old.waiting_binding:
            self.net.metrics.note(self.net.engine.now, self.name, "binding_failure")
        t6, t6g = self._capture(port, rx_time)
        rec = _SyncRecord(msg.seq_id, t6, t6g, rx_time, msg.correction_field_ns)
        self._pending = rec
        if self.master_ports:
            self.net.engine.schedule_in(
                self._delay(self.cfg.residence_us), self._forward_sync, rec, kind="forward", target=self.name
            )

    def _forward_sync(self, rec: _SyncRecord) -> None:
        now = self.net.engine.now
        for p in self.master_ports:
            out = PtpMessage(MessageKind.SYNC, rec.seq, p.name, correction_field_ns=rec.cf_sync)
            out.meta["record"] = rec
            out.meta["sent_at"] = now
            self.net.send(p, out)

    def _on_followup(self, msg: PtpMessage) -> None:
        rec = self._pending
        if rec is None or rec.seq != msg.seq_id or rec.followup is not None:
            self.net.metrics.count("followup_seq_mismatch")
            return
        rec.followup = msg
        if self.binding:
            rec.waiting_binding = True
            self._start_pdelay(binding=True)
        else:
            self._finish_sync(rec)

    def _finish_sync(self, rec: _SyncRecord) -> None:
        now = self.net.engine.now
        fu = rec.followup
        cf = rec.cf_sync + fu.correction_field_ns
        st = self.pdelay
        if self.direct_mode and st.converged:
            try:
                fresh = direct_peer_delay(fu.origin_ts_ns, rec.t6_global, cf)
            except MeasurementFault:
                st.faults += 1
                self.net.metrics.count("pdelay_fault")
                fresh = st.measured_delay_ns
            if self.cfg.direct_reanchor and self._anchor_delay is not None:
                delay = self._anchor_delay
                self.net.metrics.count("direct_reanchor")
            elif self.cfg.direct_delay_lag and self._direct_prev is not None:
                delay = self._direct_prev
            else:
                delay = fresh
            self._anchor_delay = None
            self._direct_prev = fresh
            st.record(fresh, now)
        else:
            delay = st.measured_delay_ns
        if delay is None:
            self.net.metrics.count("no_peer_delay")
            return
        ts = SyncTimestamps(fu.origin_ts_ns, rec.t6_global, rec.cf_sync, fu.correction_field_ns)
        offset = sync_offset(ts, delay)
        self.cum_ratio = fu.rate_ratio * self.estimator.current_ratio
        self.clock.set_frequency_ratio(self.cum_ratio, now)
        self.clock.apply_offset(offset, now)
        self.net.metrics.record_success(self.name, now)
        self._arm_receipt_timer()
        if self.direct_mode and not st.converged:
            st.observe_offset(offset, self.cfg.convergence_threshold_ns, self.cfg.convergence_count)
        if self.master_ports:
            rec.forward = (cf + int(round(delay * fu.rate_ratio)), self.cum_ratio)
            self._forward_followups(rec)

    def _arm_receipt_timer(self) -> None:
        if self.cfg.holdover or self.cfg.sync_receipt_timeout <= 0:
            return
        if self._receipt_timer is not None:
            self._receipt_timer.cancel()
        self._receipt_timer = self.net.engine.schedule_in(
            self.cfg.sync_receipt_timeout * self._interval_ps, self._receipt_timeout,
            kind="receipt_timeout", target=self.name,
        )

    def _receipt_timeout(self) -> None:
        now = self.net.engine.now
        self._receipt_timer = None
        self.cum_ratio = 1.0
        self.clock.set_frequency_ratio(1.0, now)
        self.net.metrics.note(now, self.name, "sync_receipt_timeout")

    def _forward_followups(self, rec: _SyncRecord) -> None:
        if rec.forward is None:
            return
        cf_in, ratio = rec.forward
        fu_in = rec.followup
        for port_name, stamps in rec.egress.items():
            done = rec.sent.get(port_name, 0)
            for ts in stamps[done:]:
                residence = ts - rec.t6
                out = PtpMessage(
                    MessageKind.FOLLOW_UP, rec.seq, port_name,
                    origin_ts_ns=fu_in.origin_ts_ns,
                    correction_field_ns=cf_in + int(round(residence * ratio)),
                    rate_ratio=ratio,
                )
                self.net.send_later(self._fu_delay, self.ports[port_name], out)
            rec.sent[port_name] = len(stamps)

    # -- peer delay ---------------------------------------------------------

    def _pdelay_timer(self) -> None:
        self._start_pdelay(binding=False)
        self.net.engine.schedule_in(
            int(round(self.cfg.pdelay_interval_s * PS_PER_S)), self._pdelay_timer,
            kind="pdelay_timer", target=self.name,
        )

    def _start_pdelay(self, binding: bool) -> None:
        if self._exchange is not None:
            self._exchange.binding |= binding
            return
        eng = self.net.engine
        self._pdelay_seq = next_seq(self._pdelay_seq)
        ex = _PdelayExchange(self._pdelay_seq, eng.now, binding=binding)
        self._exchange = ex
        ex.timeout = eng.schedule_in(
            int(round(self.cfg.pdelay_timeout_s * PS_PER_S)), self._pdelay_timeout, ex,
            kind="pdelay_timeout", target=self.name,
        )
        self.net.send(self.slave_port, PtpMessage(MessageKind.PDELAY_REQ, ex.seq, self.slave_port.name))

    def _pdelay_timeout(self, ex: _PdelayExchange) -> None:
        if self._exchange is not ex:
            return
        self._exchange = None
        self.net.metrics.note(self.net.engine.now, self.name, "pdelay_timeout")
        self._end_binding(success=False)

    def _try_complete_pdelay(self) -> None:
        ex = self._exchange
        if ex is None or None in (ex.t1, ex.t2, ex.t3, ex.t4):
            return
        self._exchange = None
        ex.timeout.cancel()
        ratio = self.estimator.update(ex.t2 + ex.t3, ex.t1 + ex.t4)
        ok = True
        try:
            delay = peer_delay(PdelayTimestamps(ex.t1, ex.t2, ex.t3, ex.t4), ratio)
        except MeasurementFault as err:
            log.debug("%s: %s", self.name, err)
            ok = False
            delay = 0
        if ok and self.cfg.collision_compensation and ex.responder_step:
            own = ex.step_t4 - ex.step_t1
            delay -= int(round(collision_compensation_s1(ex.responder_step, own, ratio)))
            self.net.metrics.count("collision_compensated")
            ok = delay >= 0
        if not ok:
            self.pdelay.faults += 1
            self.net.metrics.count("pdelay_fault")
        elif not (self.direct_mode and self.pdelay.converged):
            self.pdelay.record(delay, self.net.engine.now)
        else:
            self._anchor_delay = delay
        if ex.binding:
            self._end_binding(success=ok)

    def _end_binding(self, success: bool) -> None:
        rec = self._pending
        if rec is None or not rec.waiting_binding:
            return
        rec.waiting_binding = False
        if success:
            self._finish_sync(rec)
        else:
            self.net.metrics.note(self.net.engine.now, self.name, "binding_failure")

    def _respond(self, port: Port, req: PtpMessage, rx_time: int) -> None:
        t2, _ = self._capture(port, rx_time)
        key = (port.name, req.seq_id)
        self._responder[key] = self.clock.global_offset_ns
        resp = PtpMessage(MessageKind.PDELAY_RESP, req.seq_id, port.name, request_receipt_ts_ns=t2)
        self.net.send_later(self._delay(self.cfg.turnaround_us), port, resp)
        if len(self._responder) > 64:
            # keep the table small; only recent requests can still be answered
            for old in list(self._responder)[:-16]:
                del self._responder[old]


class Network:
    """Moves PTP frames between node ports and reports MAC events back."""

    def __init__(self, engine: Engine, metrics: MetricsRecorder | None = None):
        self.engine = engine
        self.metrics = metrics or MetricsRecorder()
        self.nodes: dict[str, PtpNode] = {}
        self.links: dict[str, WiredLink | WirelessLink] = {}
        self.frames_sent: dict[MessageKind, int] = {k: 0 for k in MessageKind}

    def add_node(self, node: PtpNode) -> PtpNode:
        if node.name in self.nodes:
            raise ValueError(f"duplicate node {node.name!r}")
        self.nodes[node.name] = node
        self.metrics.register(node.name)
        return node

    def connect(self, a: PtpNode, b: PtpNode, link, jitter_a: float = 0.0, jitter_b: float = 0.0) -> tuple[Port, Port]:
        """Attach ``link``; for a wireless link ``a`` must be the gNB side."""
        if link.name in self.links:
            raise ValueError(f"duplicate link {link.name!r}")
        self.links[link.name] = link
        pa, pb = Port(a, link, 0, jitter_a), Port(b, link, 1, jitter_b)
        pa.peer, pb.peer = pb, pa
        a.add_port(pa)
        b.add_port(pb)
        return pa, pb

    def send_later(self, delay: int, port: Port, msg: PtpMessage) -> None:
        self.engine.schedule_in(delay, self.send, port, msg, kind="send", target=port.node.name)

    def send(self, port: Port, msg: PtpMessage) -> None:
        eng = self.engine
        node, peer = port.node, port.peer
        now = eng.now
        self.frames_sent[msg.kind] += 1
        if port.link.kind == "wired":
            d = port.link.transmit(port.end, msg.size_bytes, now)
            if d is None:
                self.metrics.note(now, node.name, f"dropped_{msg.kind.value}")
                return
            if msg.kind.is_event:
                eng.schedule(d.tx_time, node.on_tx, port, msg, d.tx_time, 0, kind="tx", target=node.name)
            eng.schedule(d.deliver_time, peer.node.on_receive, peer, msg, d.rx_time, kind="rx", target=peer.node.name)
            return
        out = port.link.transmit(port.end, now)
        if msg.kind.is_event:
            for i, a in enumerate(out.attempts):
                eng.schedule(a.tx_time, node.on_tx, port, msg, a.tx_time, i, kind="tx", target=node.name)
            eng.schedule(out.feedback_time, node.on_harq_feedback, port, msg, out, kind="harq", target=node.name)
        if out.delivered:
            eng.schedule(out.deliver_time, peer.node.on_receive, peer, msg, out.rx_time, kind="rx", target=peer.node.name)
        else:
            self.metrics.note(now, node.name, f"lost_{msg.kind.value}")
