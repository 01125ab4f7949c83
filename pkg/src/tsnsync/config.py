"""Scenario configuration: one flat set of keys grouped into INI sections."""

from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass, field, fields


class ConfigError(ValueError):
    """Invalid scenario configuration; ``problems`` holds one line per issue."""

    def __init__(self, problems: list[str]):
        self.problems = list(problems)
        super().__init__("\n".join(self.problems))


def _f(section: str, default, choices: tuple[str, ...] = (), minimum: float | None = None, note: str = ""):
    return field(default=default, metadata={"section": section, "choices": choices, "min": minimum, "note": note})


@dataclass
class ScenarioConfig:
    # [simulation]
    duration_s: float = _f("simulation", 100.0, minimum=0.0)
    seed: int = _f("simulation", 1)
    sample_rate_hz: float = _f("simulation", 1000.0, minimum=0.0)
    warmup_s: float = _f("simulation", 5.0, minimum=0.0)
    track_node: str = _f("simulation", "", note="node whose signed error is recorded")

    # [topology]
    topology: str = _f("topology", "desk", ("desk", "chain", "factory"))
    master: str = _f("topology", "tsn", ("tsn", "gnb", "ue"))
    tsn_switches: int = _f("topology", 2, minimum=1)
    tsn_endpoints: int = _f("topology", 2, minimum=0)
    gnb_count: int = _f("topology", 1, minimum=1)
    ues_per_gnb: int = _f("topology", 2, minimum=1)
    chain_hops: int = _f("topology", 5, minimum=1)
    cells_per_side: int = _f("topology", 5, minimum=1)
    factory_gnbs: int = _f("topology", 4, minimum=1)

    # [clock]
    clock_frequency_hz: float = _f("clock", 200e6, minimum=1.0)
    drift_master_ppm: float = _f("clock", 5.0, minimum=0.0)
    drift_others_ppm: float = _f("clock", 10.0, minimum=0.0)
    drift_wander_ppm: float = _f("clock", 1.5, minimum=0.0)
    drift_wander_tau_s: float = _f("clock", 10.0, minimum=1e-3)
    counter_mode: str = _f("clock", "dual", ("single", "dual"))
    wired_ts_jitter_ns: float = _f("clock", 0.0, minimum=0.0)
    wireless_ts_jitter_ns: float = _f("clock", 10.0, minimum=0.0)

    # [ptp]
    sync_enabled: bool = _f("ptp", True)
    sync_interval_s: float = _f("ptp", 0.125, minimum=1e-6)
    pdelay_interval_s: float = _f("ptp", 1.0, minimum=1e-6)
    pdelay_timeout_s: float = _f("ptp", 0.1, minimum=1e-6)
    harq_gated_followup: bool = _f("ptp", True)
    mobility_fix: str = _f("ptp", "standard", ("standard", "direct"))
    binding_mode: str = _f("ptp", "auto", ("auto", "on", "off"))
    direct_delay_lag: bool = _f("ptp", False)
    direct_reanchor: bool = _f("ptp", True, note="direct mode: the Sync after each completed exchange uses the measured delay")
    collision_compensation: bool = _f("ptp", True)
    residence_min_us: float = _f("ptp", 5.0, minimum=0.0)
    residence_max_us: float = _f("ptp", 20.0, minimum=0.0)
    turnaround_min_us: float = _f("ptp", 10.0, minimum=0.0)
    turnaround_max_us: float = _f("ptp", 1000.0, minimum=0.0)
    followup_delay_us: float = _f("ptp", 10.0, minimum=0.0)
    rate_ratio_min_span_s: float = _f("ptp", 0.5, minimum=0.0)
    sync_receipt_timeout: int = _f("ptp", 3, minimum=0, note="silent sync intervals before syntonization is dropped")
    holdover: bool = _f("ptp", False, note="keep the last rate ratio after a receipt timeout")

    # [wired]
    tsn_bandwidth_bps: float = _f("wired", 1e9, minimum=1.0)
    core_bandwidth_bps: float = _f("wired", 10e9, minimum=1.0)
    propagation_delay_ns: float = _f("wired", 50.0, minimum=0.0)
    queue_capacity_bytes: int = _f("wired", 512_000, minimum=1)
    frame_size_bytes: int = _f("wired", 1500, minimum=1)
    load_mbps: float = _f("wired", 0.0, minimum=0.0, note="random bursts in [0, 2x] redrawn every load_epoch_s")
    load_periodic_mbps: float = _f("wired", 0.0, minimum=0.0)
    load_burst_max_mbps: float = _f("wired", 0.0, minimum=0.0)
    load_epoch_s: float = _f("wired", 0.5, minimum=1e-3)
    load_links: str = _f("wired", "tsn", ("tsn", "all"))

    # [wireless]
    target_bler: float = _f("wireless", 1e-6, minimum=0.0)
    harq_max_retx: int = _f("wireless", 4, minimum=0)
    harq_rtt_us: float = _f("wireless", 500.0, minimum=0.0)
    base_latency_us: float = _f("wireless", 200.0, minimum=0.0)
    # recorded for completeness; the frame-level radio model does not use them
    carrier_frequency_hz: float = _f("wireless", 3.5e9)
    subcarrier_spacing_hz: float = _f("wireless", 60e3)
    resource_blocks: int = _f("wireless", 135)
    gnb_tx_power_dbm: float = _f("wireless", 46.0)
    ue_tx_power_dbm: float = _f("wireless", 26.0)
    gnb_antenna_height_m: float = _f("wireless", 25.0, minimum=0.0)
    ue_antenna_height_m: float = _f("wireless", 1.5, minimum=0.0)

    # [mobility]
    trajectory: str = _f("mobility", "rectangle", ("rectangle", "linear", "fixed"))
    ue_speed_mps: float = _f("mobility", 10.0, minimum=0.0)
    ue_speed_min_mps: float = _f("mobility", 5.0, minimum=0.0)
    ue_speed_max_mps: float = _f("mobility", 10.0, minimum=0.0)
    rect_width_m: float = _f("mobility", 50.0, minimum=0.0)
    rect_height_m: float = _f("mobility", 50.0, minimum=0.0)
    ue_distance_m: float = _f("mobility", 20.0, minimum=0.0)
    gnb_spacing_m: float = _f("mobility", 200.0, minimum=0.0)
    mobility_start_s: float = _f("mobility", 0.0, minimum=0.0)

    def validate(self) -> None:
        problems = []
        for f in fields(self):
            value = getattr(self, f.name)
            meta = f.metadata
            if meta["choices"] and value not in meta["choices"]:
                problems.append(f"{f.name}: {value!r} is not one of {', '.join(meta['choices'])}")
            if meta["min"] is not None and value < meta["min"]:
                problems.append(f"{f.name}: {value!r} is below the minimum {meta['min']}")
        if self.target_bler > 1.0:
            problems.append("target_bler: must be a probability in [0, 1]")
        if self.residence_min_us > self.residence_max_us:
            problems.append("residence_min_us: exceeds residence_max_us")
        if self.turnaround_min_us > self.turnaround_max_us:
            problems.append("turnaround_min_us: exceeds turnaround_max_us")
        if self.ue_speed_min_mps > self.ue_speed_max_mps:
            problems.append("ue_speed_min_mps: exceeds ue_speed_max_mps")
        if self.warmup_s >= self.duration_s > 0:
            problems.append("warmup_s: must be shorter than duration_s")
        if self.master != "tsn" and self.topology == "chain":
            problems.append("master: a wired chain has only TSN nodes, so the master must be tsn")
        if problems:
            raise ConfigError(problems)

    def replace(self, **changes) -> "ScenarioConfig":
        cfg = dataclasses.replace(self, **changes)
        cfg.validate()
        return cfg

    def sections(self) -> dict[str, list[tuple[str, object]]]:
        out: dict[str, list[tuple[str, object]]] = {}
        for f in fields(self):
            out.setdefault(f.metadata["section"], []).append((f.name, getattr(self, f.name)))
        return out

    def to_ini(self) -> str:
        lines = []
        for section, items in self.sections().items():
            lines.append(f"[{section}]")
            lines.extend(f"{k} = {format_value(v)}" for k, v in items)
            lines.append("")
        return "\n".join(lines)

    def header_lines(self) -> list[str]:
        """Resolved configuration as ``key = value`` lines for output headers."""
        return [f"{k} = {format_value(v)}" for items in self.sections().values() for k, v in items]


FIELDS = {f.name: f for f in fields(ScenarioConfig)}


def format_value(value) -> str:
    if isinstance(value, bool):
        return "on" if value else "off"
    return repr(value) if isinstance(value, float) else str(value)


_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def coerce(name: str, text: str):
    """Convert ``text`` to the type of config key ``name``."""
    f = FIELDS.get(name)
    if f is None:
        raise KeyError(name)
    kind = type(f.default)
    raw = text.strip()
    if kind is bool:
        low = raw.lower()
        if low in _TRUE:
            return True
        if low in _FALSE:
            return False
        raise ValueError(f"expected on/off, got {raw!r}")
    if kind is int:
        try:
            return int(raw)
        except ValueError:
            v = float(raw)
            if not v.is_integer():
                raise ValueError(f"expected an integer, got {raw!r}") from None
            return int(v)
    if kind is float:
        return float(raw)
    return raw


def parse_ini(text: str, source: str = "<config>", base: ScenarioConfig | None = None) -> ScenarioConfig:
    """Parse an INI scenario; every problem is reported with its line number."""
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string(text, source=source)
    except configparser.Error as err:
        raise ConfigError([f"{source}: {err}".replace("\n", " ")]) from None

    line_of = _line_numbers(text)
    problems = []
    changes = {}
    for section in parser.sections():
        for key, value in parser.items(section):
            where = f"{source}:{line_of.get((section, key), '?')}"
            f = FIELDS.get(key)
            if f is None:
                problems.append(f"{where}: unknown key {key!r} in [{section}]")
                continue
            if f.metadata["section"] != section:
                problems.append(f"{where}: key {key!r} belongs in [{f.metadata['section']}], not [{section}]")
                continue
            try:
                changes[key] = coerce(key, value)
            except ValueError as err:
                problems.append(f"{where}: {key}: {err}")
    cfg = dataclasses.replace(base or ScenarioConfig(), **changes)
    try:
        cfg.validate()
    except ConfigError as err:
        problems += [f"{source}:{_line_for(line_of, p.split(':', 1)[0])}: {p}" for p in err.problems]
    if problems:
        raise ConfigError(problems)
    return cfg


def _line_numbers(text: str) -> dict[tuple[str, str], int]:
    out = {}
    section = None
    for n, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        if s.startswith("[") and s.endswith("]"):
            section = s[1:-1].strip()
        elif section and "=" in s and not s.startswith(("#", ";")):
            out[(section, s.split("=", 1)[0].strip())] = n
    return out


def _line_for(line_of: dict, key: str):
    for (_, k), n in line_of.items():
        if k == key:
            return n
    return "-"


def load(path: str, base: ScenarioConfig | None = None) -> ScenarioConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_ini(fh.read(), source=path, base=base)
