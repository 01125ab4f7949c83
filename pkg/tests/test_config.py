import pytest

from tsnsync import presets
from tsnsync.config import ConfigError, ScenarioConfig, coerce, format_value, parse_ini


def test_defaults_validate():
    ScenarioConfig().validate()


def test_round_trip_through_ini():
    cfg = ScenarioConfig(seed=9, master="gnb", target_bler=1e-4, harq_gated_followup=False)
    assert parse_ini(cfg.to_ini()) == cfg


def test_values_are_coerced_to_the_field_type():
    assert coerce("seed", "12") == 12
    assert coerce("seed", "3.0") == 3
    assert coerce("harq_gated_followup", "Off") is False
    assert coerce("target_bler", "1e-2") == 0.01
    with pytest.raises(ValueError):
        coerce("seed", "2.5")
    with pytest.raises(ValueError):
        coerce("sync_enabled", "maybe")
    assert format_value(True) == "on" and format_value(0.125) == "0.125"


def test_ini_problems_carry_line_numbers():
    text = "[simulation]\nduration_s = 10\nseed = x\n[ptp]\nsync_interval_s = -1\nfoo = 3\n[clock]\nsync_enabled = on\n"
    with pytest.raises(ConfigError) as info:
        parse_ini(text, source="bad.ini")
    problems = info.value.problems
    assert any(p.startswith("bad.ini:3:") and "seed" in p for p in problems)
    assert any(p.startswith("bad.ini:6:") and "unknown key 'foo'" in p for p in problems)
    assert any(p.startswith("bad.ini:8:") and "belongs in [ptp]" in p for p in problems)
    assert any(p.startswith("bad.ini:5:") and "sync_interval_s" in p for p in problems)


def test_malformed_ini_is_a_config_error():
    with pytest.raises(ConfigError):
        parse_ini("no section here\n")


@pytest.mark.parametrize("changes, key", [
    ({"master": "satellite"}, "master"),
    ({"target_bler": 1.5}, "target_bler"),
    ({"residence_min_us": 30.0}, "residence_min_us"),
    ({"warmup_s": 200.0}, "warmup_s"),
    ({"topology": "chain", "master": "ue"}, "master"),
    ({"harq_max_retx": -1}, "harq_max_retx"),
])
def test_cross_field_validation(changes, key):
    with pytest.raises(ConfigError) as info:
        ScenarioConfig(**changes).validate()
    assert any(p.startswith(key) for p in info.value.problems)


def test_every_preset_resolves_to_valid_configs():
    for name, preset in presets.PRESETS.items():
        cfg = ScenarioConfig().replace(**preset.overrides)
        for key, values in preset.sweep:
            for v in values:
                cfg.replace(**{key: v})


def test_required_presets_exist():
    required = {
        "collision-single-counter", "collision-dual-counter", "harq-ungated", "harq-gated",
        "mobility-uniform-10ms", "sync-interval-sweep", "diameter-sweep", "speed-sweep",
        "load-sweep", "factory", "no-sync-control", "baseline-tsn-master",
    }
    assert required <= set(presets.PRESETS)
    with pytest.raises(KeyError):
        presets.get("nope")


def test_header_lists_every_key():
    lines = ScenarioConfig().header_lines()
    assert "seed = 1" in lines
    assert len(lines) == len(ScenarioConfig.__dataclass_fields__)
