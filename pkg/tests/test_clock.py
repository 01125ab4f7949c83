import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tsnsync.clock import CounterMode, DriftWalk, OscillatorClock, RateRatioEstimator
from tsnsync.engine import PS_PER_S


def test_zero_drift_counts_true_time_floored_to_tick():
    clk = OscillatorClock(0.0, nominal_freq_hz=200e6)
    assert clk.local_time(0) == 0
    assert clk.local_time(4_999) == 0
    assert clk.local_time(5_000) == 5
    assert clk.local_time(PS_PER_S) == 1_000_000_000


def test_drift_is_exact_over_long_spans():
    clk = OscillatorClock(10.0, nominal_freq_hz=1e9)
    # +10 ppm over 1000 s is exactly 10 ms ahead
    assert clk.local_time(1000 * PS_PER_S) == 1000 * 10**9 + 10_000_000


def test_tick_must_be_whole_picoseconds():
    with pytest.raises(ValueError):
        OscillatorClock(0.0, nominal_freq_hz=3e8)


def test_drift_bound_is_enforced():
    with pytest.raises(ValueError):
        OscillatorClock(12.0, drift_bound_ppm=10.0)


@settings(max_examples=200, deadline=None)
@given(
    drift=st.floats(min_value=-50, max_value=50),
    local=st.integers(min_value=0, max_value=10**12),
)
def test_true_time_for_local_is_the_first_instant(drift, local):
    clk = OscillatorClock(drift, nominal_freq_hz=200e6)
    t = clk.true_time_for_local(local)
    target = -(-local // 5) * 5  # the tick that first reaches ``local``
    assert clk.local_time(t) >= local
    assert clk.local_time(t) == target
    if t > 0:
        assert clk.local_time(t - 1) < local


@settings(max_examples=100, deadline=None)
@given(drift=st.floats(min_value=-20, max_value=20), a=st.integers(0, 10**13), b=st.integers(0, 10**13))
def test_local_time_is_monotone(drift, a, b):
    clk = OscillatorClock(drift)
    lo, hi = sorted((a, b))
    assert clk.local_time(lo) <= clk.local_time(hi)


def test_dual_counter_keeps_timestamps_on_local_time():
    clk = OscillatorClock(5.0, mode=CounterMode.DUAL)
    t = 3 * PS_PER_S
    before = clk.timestamp(t)
    clk.apply_offset(400, t)
    assert clk.timestamp(t) == before
    assert clk.global_time(t) == clk.local_time(t) - 400


def test_single_counter_steps_the_timestamp_register():
    clk = OscillatorClock(5.0, mode="single")
    t = 3 * PS_PER_S
    before = clk.timestamp(t)
    clk.apply_offset(400, t)
    assert clk.timestamp(t) == before - 400
    assert clk.global_offset_ns == -400
    assert not clk.set_frequency_ratio(1.00001, t)


def test_frequency_ratio_scales_global_time_only_from_now_on():
    clk = OscillatorClock(10.0, nominal_freq_hz=1e9)
    t0 = PS_PER_S
    g0 = clk.global_time(t0)
    ratio = 1 / (1 + 10e-6)
    clk.set_frequency_ratio(ratio, t0)
    assert clk.global_time(t0) == g0
    # syntonized to true time: one more true second adds one second
    assert abs(clk.global_time(2 * PS_PER_S) - g0 - 10**9) <= 1


def test_counter_mode_parsing():
    assert CounterMode.parse("SingleCounter") is CounterMode.SINGLE
    assert CounterMode.parse("dual_counter") is CounterMode.DUAL
    with pytest.raises(ValueError):
        CounterMode.parse("triple")


def test_wander_stays_inside_the_drift_bound():
    walk = DriftWalk(sigma_ppm=5.0, tau_s=1.0, step_s=0.05)
    clk = OscillatorClock(9.0, drift_bound_ppm=10.0, walk=walk, rng=random.Random(3))
    seen = [clk.current_drift_ppm(k * PS_PER_S // 20) for k in range(2000)]
    assert max(seen) <= 10.0 and min(seen) >= -10.0
    assert len(set(seen)) > 100


def test_wander_keeps_true_time_for_local_consistent():
    walk = DriftWalk(sigma_ppm=2.0, tau_s=2.0, step_s=0.05)
    clk = OscillatorClock(3.0, walk=walk, rng=random.Random(1))
    for local in (0, 12_345, 10**9, 7 * 10**9 + 3):
        t = clk.true_time_for_local(local)
        assert clk.local_time(t) >= local
        assert t == 0 or clk.local_time(t - 1) < local


@settings(max_examples=200, deadline=None)
@given(
    d_remote=st.floats(min_value=-10, max_value=10),
    d_own=st.floats(min_value=-10, max_value=10),
    interval_s=st.sampled_from([0.125, 0.5, 1.0]),
)
def test_rate_ratio_converges_within_two_updates(d_remote, d_own, interval_s):
    remote = OscillatorClock(d_remote)
    own = OscillatorClock(d_own)
    est = RateRatioEstimator()
    step = int(interval_s * PS_PER_S)
    for k in range(3):
        t = 1 + k * step
        est.update(remote.local_time(t), own.local_time(t))
    truth = (1 + d_remote * 1e-6) / (1 + d_own * 1e-6)
    bound = 2 * remote.tick_ps / 1000 / (interval_s * 1e9)
    assert abs(est.current_ratio - truth) <= bound


def test_rate_ratio_rejects_out_of_bound_and_short_spans():
    est = RateRatioEstimator(bound=50e-6, min_span_ns=1_000)
    est.update(0, 0)
    assert est.update(500, 500) == 1.0  # span too short: reference kept
    assert est.update(2_000, 1_000) == 1.0  # ratio 2 is rejected
    assert est.rejected == 1
    # the rejected pair became the reference
    assert est.update(2_000 + 4_000_040, 1_000 + 4_000_000) == pytest.approx(1.00001, rel=1e-12)
    assert est.updates == 1
