"""Topology builders and the simulated world that runs one scenario."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

from .channels import LoadGenerator, LoadPattern, WiredLink, WirelessLink
from .clock import CounterMode, DriftWalk, OscillatorClock
from .config import ScenarioConfig
from .engine import PS_PER_S, Engine, RngStreams
from .metrics import (
    LossSyncRecord,
    MetricsRecorder,
    Summary,
    loss_sync_proportion,
    loss_sync_records,
    summarize,
)
from .mobility import Fixed, Trajectory, UniformLinear, factory_layout, rectangle_patrol
from .nodes import Network, NodeConfig, PtpNode
from .ptp import DelayMode

# link classes: "tsn" (TSN bandwidth), "core" (5G core bandwidth), "radio"
WIRED = ("tsn", "core")


@dataclass
class Topology:
    kinds: dict[str, str]  # node -> tsn | switch | core | gnb | ue
    links: list[tuple[str, str, str]]  # (a, b, class); radio links list the gNB first
    trajectories: dict[str, Trajectory] = field(default_factory=dict)
    grandmaster: str = ""

    def neighbours(self) -> dict[str, list[tuple[str, int]]]:
        adj: dict[str, list[tuple[str, int]]] = {n: [] for n in self.kinds}
        for i, (a, b, _) in enumerate(self.links):
            adj[a].append((b, i))
            adj[b].append((a, i))
        return adj

    def validate(self) -> None:
        if self.grandmaster not in self.kinds:
            raise ValueError(f"grandmaster {self.grandmaster!r} is not a node")
        for a, b, cls in self.links:
            if a not in self.kinds or b not in self.kinds:
                raise ValueError(f"link {a}-{b} references an unknown node")
            if cls == "radio" and (self.kinds[a] != "gnb" or self.kinds[b] != "ue"):
                raise ValueError(f"radio link {a}-{b} must join a gNB to a UE")
        if len(spanning_tree(self)) != len(self.kinds):
            raise ValueError("topology is not connected")


def spanning_tree(topo: Topology) -> dict[str, tuple[str, int] | None]:
    """Breadth-first parent map from the grandmaster: node -> (parent, link index)."""
    adj = topo.neighbours()
    parent: dict[str, tuple[str, int] | None] = {topo.grandmaster: None}
    queue = deque([topo.grandmaster])
    while queue:
        n = queue.popleft()
        for m, i in adj[n]:
            if m not in parent:
                parent[m] = (n, i)
                queue.append(m)
    return parent


def _wired_backbone(cfg: ScenarioConfig, kinds: dict, links: list) -> str:
    kinds["tsn_gm"] = "tsn"
    prev = "tsn_gm"
    for i in range(1, cfg.tsn_switches + 1):
        kinds[f"sw{i}"] = "switch"
        links.append((prev, f"sw{i}", "tsn"))
        prev = f"sw{i}"
    for i in range(1, cfg.tsn_endpoints + 1):
        kinds[f"es{i}"] = "tsn"
        links.append((prev, f"es{i}", "tsn"))
    kinds["core"] = "core"
    links.append((prev, "core", "core"))
    return "core"


def _ue_trajectory(cfg: ScenarioConfig, gnb_xy: tuple[float, float], k: int) -> Trajectory:
    gx, gy = gnb_xy
    z = cfg.ue_antenna_height_m
    if cfg.trajectory == "fixed":
        return Fixed((gx + cfg.ue_distance_m, gy, z))
    if cfg.trajectory == "linear":
        return UniformLinear((gx + cfg.ue_distance_m, gy + 5.0 * k, z), (cfg.ue_speed_mps, 0.0, 0.0), cfg.mobility_start_s)
    grow = 10.0 * k  # nested rectangles so UEs of one gNB do not overlap
    return rectangle_patrol(
        (gx, gy), cfg.rect_width_m + grow, cfg.rect_height_m + grow, cfg.ue_speed_mps, z, cfg.mobility_start_s
    )


def desk_topology(cfg: ScenarioConfig) -> Topology:
    """TSN master and bridges, a 5G core, gNBs and their UEs."""
    kinds: dict[str, str] = {}
    links: list = []
    core = _wired_backbone(cfg, kinds, links)
    traj: dict[str, Trajectory] = {}
    for g in range(1, cfg.gnb_count + 1):
        gnb = f"gnb{g}"
        kinds[gnb] = "gnb"
        links.append((core, gnb, "core"))
        xy = ((g - 1) * cfg.gnb_spacing_m, 0.0)
        traj[gnb] = Fixed((xy[0], xy[1], cfg.gnb_antenna_height_m))
        for k in range(1, cfg.ues_per_gnb + 1):
            ue = f"ue{g}_{k}"
            kinds[ue] = "ue"
            links.append((gnb, ue, "radio"))
            traj[ue] = _ue_trajectory(cfg, xy, k - 1)
    gm = {"tsn": "tsn_gm", "gnb": "gnb1", "ue": "ue1_1"}[cfg.master]
    return Topology(kinds, links, traj, gm)


def chain_topology(cfg: ScenarioConfig) -> Topology:
    """Wired line of ``chain_hops`` links starting at the grandmaster."""
    kinds = {"n0": "tsn"}
    links = []
    for i in range(1, cfg.chain_hops + 1):
        kinds[f"n{i}"] = "switch" if i < cfg.chain_hops else "tsn"
        links.append((f"n{i - 1}", f"n{i}", "tsn"))
    return Topology(kinds, links, {}, "n0")


def factory_topology(cfg: ScenarioConfig, streams: RngStreams) -> Topology:
    """Task and transport robots served by a grid of gNBs behind one core."""
    kinds: dict[str, str] = {}
    links: list = []
    core = _wired_backbone(cfg, kinds, links)
    layout = factory_layout(
        cfg.cells_per_side,
        speed_range=(cfg.ue_speed_min_mps, cfg.ue_speed_max_mps),
        rng_for=lambda name: streams.stream(f"mobility/{name}"),
        start_s=cfg.mobility_start_s,
    )
    traj: dict[str, Trajectory] = {}
    cols = math.ceil(math.sqrt(cfg.factory_gnbs))
    rows = math.ceil(cfg.factory_gnbs / cols)
    gnbs = []
    for i in range(cfg.factory_gnbs):
        r, c = divmod(i, cols)
        x = (c + 0.5) * layout.size_m / cols
        y = (r + 0.5) * layout.size_m / rows
        name = f"gnb{i + 1}"
        kinds[name] = "gnb"
        links.append((core, name, "core"))
        traj[name] = Fixed((x, y, cfg.gnb_antenna_height_m))
        gnbs.append((name, x, y))
    robots = [(f"robot{i + 1}", t) for i, t in enumerate(layout.task)]
    robots += [(f"hshuttle{i + 1}", t) for i, t in enumerate(layout.horizontal)]
    robots += [(f"vshuttle{i + 1}", t) for i, t in enumerate(layout.vertical)]
    for name, t in robots:
        p = t.position_at(0)
        # static association with the nearest gNB; no handover
        gnb = min(gnbs, key=lambda g: (g[1] - p[0]) ** 2 + (g[2] - p[1]) ** 2)[0]
        kinds[name] = "ue"
        links.append((gnb, name, "radio"))
        traj[name] = t
    ue_names = [n for n, _ in robots]
    gm = {"tsn": "tsn_gm", "gnb": "gnb1", "ue": ue_names[0]}[cfg.master]
    return Topology(kinds, links, traj, gm)


def build_topology(cfg: ScenarioConfig, streams: RngStreams) -> Topology:
    if cfg.topology == "chain":
        topo = chain_topology(cfg)
    elif cfg.topology == "factory":
        topo = factory_topology(cfg, streams)
    else:
        topo = desk_topology(cfg)
    topo.validate()
    return topo


@dataclass
class RunResult:
    config: ScenarioConfig
    samples: list
    summary: Summary
    loss_records: list[LossSyncRecord]
    counters: dict
    trace_digest: str
    tracked: list[tuple[int, int]]
    grandmaster: str
    node_kinds: dict[str, str]
    events_processed: int


class World:
    """Everything needed to run one scenario with one seed."""

    def __init__(self, cfg: ScenarioConfig):
        cfg.validate()
        self.cfg = cfg
        self.engine = Engine(cfg.seed)
        streams = self.engine.rng
        self.metrics = MetricsRecorder(track=cfg.track_node or None)
        self.net = Network(self.engine, self.metrics)
        self.topology = build_topology(cfg, streams)
        if self.metrics.track is not None and self.metrics.track not in self.topology.kinds:
            raise ValueError(f"track_node {self.metrics.track!r} is not a node")
        self.grandmaster = self.topology.grandmaster

        node_cfg = NodeConfig(
            sync_interval_s=cfg.sync_interval_s,
            pdelay_interval_s=cfg.pdelay_interval_s,
            pdelay_timeout_s=cfg.pdelay_timeout_s,
            harq_gated_followup=cfg.harq_gated_followup,
            mobility_fix=DelayMode(cfg.mobility_fix),
            binding_mode=cfg.binding_mode,
            direct_delay_lag=cfg.direct_delay_lag,
            direct_reanchor=cfg.direct_reanchor,
            collision_compensation=cfg.collision_compensation,
            residence_us=(cfg.residence_min_us, cfg.residence_max_us),
            turnaround_us=(cfg.turnaround_min_us, cfg.turnaround_max_us),
            followup_delay_us=cfg.followup_delay_us,
            rate_ratio_min_span_s=cfg.rate_ratio_min_span_s,
            sync_enabled=cfg.sync_enabled,
            sync_receipt_timeout=cfg.sync_receipt_timeout,
            holdover=cfg.holdover,
        )
        for name in self.topology.kinds:
            is_gm = name == self.grandmaster
            bound = cfg.drift_master_ppm if is_gm else cfg.drift_others_ppm
            drift = streams.stream(f"drift/{name}").uniform(-bound, bound)
            clock = OscillatorClock(
                drift_ppm=drift,
                nominal_freq_hz=cfg.clock_frequency_hz,
                mode=CounterMode.parse(cfg.counter_mode),
                drift_bound_ppm=bound,
                walk=DriftWalk(cfg.drift_wander_ppm, cfg.drift_wander_tau_s),
                rng=streams.stream(f"wander/{name}"),
            )
            node = PtpNode(
                name, clock, self.net, node_cfg,
                rng=streams.stream(f"proc/{name}"),
                ts_rng=streams.stream(f"ts/{name}"),
            )
            node.is_grandmaster = is_gm
            self.net.add_node(node)

        ports = []
        for a, b, cls in self.topology.links:
            name = f"{a}-{b}"
            if cls == "radio":
                link = WirelessLink(
                    name,
                    self.topology.trajectories[a],
                    self.topology.trajectories[b],
                    target_bler=cfg.target_bler,
                    harq_max_retx=cfg.harq_max_retx,
                    harq_rtt_us=cfg.harq_rtt_us,
                    base_latency_us=cfg.base_latency_us,
                    rng=streams.stream(f"link/{name}"),
                )
                jitter = cfg.wireless_ts_jitter_ns
            else:
                bw = cfg.tsn_bandwidth_bps if cls == "tsn" else cfg.core_bandwidth_bps
                loaded = cls == "tsn" or cfg.load_links == "all"
                loads = (self._loads(name, 0), self._loads(name, 1)) if loaded else None
                link = WiredLink(
                    name, bw, cfg.propagation_delay_ns, cfg.queue_capacity_bytes, loads,
                    rng=streams.stream(f"link/{name}"),
                )
                jitter = cfg.wired_ts_jitter_ns
            ports.append(self.net.connect(self.net.nodes[a], self.net.nodes[b], link, jitter, jitter))

        for node_name, up in spanning_tree(self.topology).items():
            if up is None:
                continue
            parent, i = up
            pa, pb = ports[i]
            child_port, parent_port = (pb, pa) if pa.node.name == parent else (pa, pb)
            self.net.nodes[node_name].slave_port = child_port
            self.net.nodes[parent].master_ports.append(parent_port)

    def _loads(self, link: str, direction: int) -> list[LoadGenerator]:
        cfg = self.cfg
        periodic = cfg.load_periodic_mbps * 1e6
        # load_mbps is the mean of a burst source redrawn every epoch
        burst = (cfg.load_burst_max_mbps + 2 * cfg.load_mbps) * 1e6
        gens = []
        if periodic > 0:
            gens.append(LoadGenerator(periodic, cfg.frame_size_bytes))
        if burst > 0:
            gens.append(LoadGenerator(
                frame_size_bytes=cfg.frame_size_bytes,
                pattern=LoadPattern.RANDOM_BURST,
                burst_range_bps=(0.0, burst),
                epoch_s=cfg.load_epoch_s,
                rng=self.engine.rng.stream(f"load/{link}/{direction}"),
            ))
        return gens

    @property
    def nodes(self) -> dict[str, PtpNode]:
        return self.net.nodes

    def global_times(self, t: int) -> dict[str, int]:
        return {name: n.clock.global_time(t) for name, n in self.net.nodes.items()}

    def _sample(self, k: int, n: int) -> None:
        t = self.engine.now
        self.metrics.add_sample(self.global_times(t), self.grandmaster, t)
        if k < n:
            self._schedule_sample(k + 1, n)

    def _schedule_sample(self, k: int, n: int) -> None:
        at = int(round(k * PS_PER_S / self.cfg.sample_rate_hz))
        self.engine.schedule(at, self._sample, k, n, kind="sample", traced=False)

    def run(self) -> RunResult:
        cfg = self.cfg
        eng = self.engine
        end = int(round(cfg.duration_s * PS_PER_S))
        for node in self.net.nodes.values():
            node.start()
        if cfg.sample_rate_hz > 0:
            n = int(cfg.duration_s * cfg.sample_rate_hz + 1e-9)
            if n > 0:
                self._schedule_sample(1, n)
        eng.run_until(end)
        return self.result()

    def result(self, end: int | None = None) -> RunResult:
        """Collect metrics up to ``end`` (the full duration by default)."""
        cfg = self.cfg
        if end is None:
            end = int(round(cfg.duration_s * PS_PER_S))
        interval = int(round(cfg.sync_interval_s * PS_PER_S))
        # nobody can synchronize before a first peer delay is in hand
        grace = min(end, int(round(cfg.pdelay_interval_s * PS_PER_S)) + 4 * interval)
        slaves = {n: ts for n, ts in self.metrics.success_times.items() if n != self.grandmaster}
        records = loss_sync_records(slaves, interval, grace, end)
        span = end - grace
        proportion = loss_sync_proportion(records, span, len(slaves)) if span > 0 and slaves else 0.0
        warmup = int(round(cfg.warmup_s * PS_PER_S))
        try:
            summary = summarize(self.metrics.samples, warmup, proportion)
        except ValueError:
            summary = Summary(float("nan"), float("nan"), float("nan"), proportion, 0)
        return RunResult(
            config=cfg,
            samples=self.metrics.samples,
            summary=summary,
            loss_records=records,
            counters=dict(self.metrics.counters),
            trace_digest=self.engine.trace_digest(),
            tracked=self.metrics.tracked,
            grandmaster=self.grandmaster,
            node_kinds=dict(self.topology.kinds),
            events_processed=self.engine.processed,
        )


def run_scenario(cfg: ScenarioConfig) -> RunResult:
    return World(cfg).run()
