"""Named scenarios, one per experiment in the evaluation matrix.

A preset is a set of config overrides plus an optional sweep.  Sweeps are
lists of ``(key, values)`` axes; the runner expands their product.
"""

from __future__ import annotations

from dataclasses import dataclass, field

KMH = 1 / 3.6

# the collision experiments need many transparent clocks but short paths:
# two TSN switches, the core bridge and 18 gNBs make 21 of them
_COLLISION = dict(gnb_count=18, ues_per_gnb=1, duration_s=200.0, collision_compensation=False)

# receding UE with a quiet clock, so the motion term is what remains
_MOBILITY = dict(
    trajectory="linear",
    ue_speed_mps=10.0,
    ues_per_gnb=1,
    binding_mode="off",
    drift_wander_ppm=0.0,
    wireless_ts_jitter_ns=0.0,
    mobility_start_s=10.0,
    warmup_s=12.0,
    duration_s=60.0,
    track_node="ue1_1",
)


@dataclass(frozen=True)
class Preset:
    name: str
    description: str
    overrides: dict = field(default_factory=dict)
    sweep: tuple[tuple[str, tuple], ...] = ()


PRESETS: dict[str, Preset] = {}


def _add(name: str, description: str, sweep=(), **overrides) -> None:
    PRESETS[name] = Preset(name, description, overrides, tuple((k, tuple(v)) for k, v in sweep))


_add("baseline", "desk topology with default parameters")
for _m in ("tsn", "gnb", "ue"):
    _add(f"baseline-{_m}-master", f"baseline with the grandmaster on the {_m.upper()} side", master=_m)

_add("collision-single-counter", "single counter, many transparent clocks", counter_mode="single", **_COLLISION)
_add("collision-dual-counter", "dual counter on the collision topology", counter_mode="dual", **_COLLISION)
_add("harq-ungated", "Follow_Up carries the first attempt's timestamp, BLER 1%",
     harq_gated_followup=False, target_bler=0.01, duration_s=200.0)
_add("harq-gated", "Follow_Up waits for the HARQ-ACK, BLER sweep",
     sweep=[("target_bler", (1e-6, 1e-4, 1e-2))], harq_gated_followup=True, duration_s=200.0)
_add("mobility-uniform-10ms", "UE receding at 10 m/s, standard vs direct peer delay",
     sweep=[("mobility_fix", ("standard", "direct"))], **_MOBILITY)
_add("sync-interval-sweep", "sync interval per grandmaster placement",
     sweep=[("master", ("tsn", "gnb", "ue")),
            ("sync_interval_s", (0.003, 0.005, 0.01, 0.05, 0.125, 0.25, 0.5))],
     duration_s=30.0)
_add("diameter-sweep", "wired chains of growing length",
     sweep=[("chain_hops", (5, 10, 15, 20, 22))], topology="chain", duration_s=60.0)
_add("speed-sweep", "receding UE from walking pace to 500 km/h with direct peer delay",
     sweep=[("ue_speed_mps", tuple(round(v * KMH, 4) for v in (1, 10, 50, 100, 200, 300, 500)))],
     **{**_MOBILITY, "mobility_fix": "direct"})
_add("load-sweep", "bursty background load on every 1 Gbps link",
     sweep=[("load_mbps", (10.0, 100.0, 400.0, 600.0, 800.0, 950.0, 1000.0))], duration_s=60.0)
_add("factory", "500 m plant scaled to a 5x5 cell grid with mobile robots",
     topology="factory", load_periodic_mbps=100.0, load_burst_max_mbps=200.0,
     ue_speed_min_mps=5.0, ue_speed_max_mps=10.0)
_add("no-sync-control", "free-running clocks, no PTP traffic", sync_enabled=False)


def get(name: str) -> Preset:
    try:
        return PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; choose from {', '.join(sorted(PRESETS))}") from None
