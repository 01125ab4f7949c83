import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracle import C, chase_delay_s, collision_ledger, make_ledger
from tsnsync.channels import propagation_delay
from tsnsync.ptp import (
    MeasurementFault,
    MessageKind,
    PdelayTimestamps,
    PeerDelayState,
    SyncTimestamps,
    collision_compensation_s1,
    collision_error_s2,
    direct_peer_delay,
    mobility_error,
    next_seq,
    peer_delay,
    sync_offset,
)


def _pd(ledger):
    return PdelayTimestamps(ledger.t1, ledger.t2, ledger.t3, ledger.t4)


# -- hand-evaluated examples -----------------------------------------------


def test_peer_delay_examples():
    assert peer_delay(PdelayTimestamps(0, 500, 600, 1200), 1.0) == 550
    assert peer_delay(PdelayTimestamps(0, 0, 0, 0), 1.0) == 0
    assert peer_delay(PdelayTimestamps(0, 500, 600, 1200), 0.999998) == 550


def test_peer_delay_rate_ratio_term_shows_on_long_spans():
    ts = PdelayTimestamps(0, 500_000_000, 500_000_100, 1_000_000_100)
    # (0.999998 * 1e9 + 0.999998 * 100 - 100) / 2, about 2 us less than at ratio 1
    assert peer_delay(ts, 1.0) == 500_000_000
    assert peer_delay(ts, 0.999998) == 499_999_000


def test_negative_peer_delay_is_a_fault():
    with pytest.raises(MeasurementFault):
        peer_delay(PdelayTimestamps(0, 0, 1000, 10), 1.0)


def test_sync_offset_examples():
    assert sync_offset(SyncTimestamps(1000, 1600, 30, 0), 550) == 20
    assert sync_offset(SyncTimestamps(0, 0), 0) == 0
    assert sync_offset(SyncTimestamps(0, 2000, 1000, 400), 550) == 50


def test_direct_peer_delay_examples():
    assert direct_peer_delay(5_000, 6_000) == 1_000
    assert direct_peer_delay(5_000, 6_020) == 1_020  # residual error +20 ns shows up as bias
    assert direct_peer_delay(5_000, 7_000, correction_ns=1_000) == 1_000
    with pytest.raises(MeasurementFault):
        direct_peer_delay(5_000, 4_000)


def test_collision_formula_examples():
    assert collision_compensation_s1(0, 0) == 0
    assert collision_compensation_s1(40, 100, 1.0) == 30
    assert collision_compensation_s1(40, 0, 1.0) == -20
    assert collision_error_s2(40, 100, 1.0) == 80
    assert collision_error_s2(40, 0, 1.0) == -20


def test_mobility_error_is_the_delay_change():
    assert mobility_error(33.0, 0.0) == 33.0
    assert mobility_error(10.0, 10.0) == 0.0


def test_sequence_ids_wrap():
    assert next_seq(65535) == 0
    assert next_seq(7) == 8


def test_only_sync_and_pdelay_frames_are_event_messages():
    events = {k for k in MessageKind if k.is_event}
    assert events == {MessageKind.SYNC, MessageKind.PDELAY_REQ, MessageKind.PDELAY_RESP}


def test_convergence_needs_consecutive_small_offsets():
    st_ = PeerDelayState()
    for _ in range(7):
        assert not st_.observe_offset(50, 100, 8)
    st_.observe_offset(500, 100, 8)  # a large one restarts the count
    for _ in range(7):
        st_.observe_offset(-20, 100, 8)
    assert not st_.converged
    assert st_.observe_offset(0, 100, 8)


# -- ledger oracle ----------------------------------------------------------


def check_ledger(ledger, ratio=None) -> None:
    """Recovered delay and offset agree with the ledger's ground truth."""
    r = float(ledger.true_ratio) if ratio is None else ratio
    delay = peer_delay(_pd(ledger), r)
    offset = sync_offset(SyncTimestamps(ledger.t5, ledger.t6, ledger.cf_ns, 0), delay)
    tick = ledger.tick_ns
    slack = 2 * tick + abs(r - float(ledger.true_ratio)) * (ledger.t4 - ledger.t1) + 1
    assert abs(delay - float(ledger.delay_master_ns)) <= slack
    assert abs(offset - float(ledger.true_offset_ns)) <= slack + abs(delay - float(ledger.delay_master_ns))


@settings(max_examples=300, deadline=None)
@given(st.integers(min_value=0, max_value=2**32))
def test_exact_ledgers_are_recovered_exactly(seed):
    ledger = make_ledger(random.Random(seed), exact=True)
    delay = peer_delay(_pd(ledger), 1.0)
    assert delay == ledger.delay_master_ns
    offset = sync_offset(SyncTimestamps(ledger.t5, ledger.t6, ledger.cf_ns, 0), delay)
    assert offset == ledger.true_offset_ns


@settings(max_examples=300, deadline=None)
@given(st.integers(min_value=0, max_value=2**32), st.sampled_from([1, 5, 8]))
def test_drifting_ledgers_within_quantization(seed, tick):
    check_ledger(make_ledger(random.Random(seed), tick_ns=tick))


@settings(max_examples=200, deadline=None)
@given(st.integers(min_value=0, max_value=2**32), st.floats(min_value=-20e-6, max_value=20e-6))
def test_wrong_rate_ratio_costs_at_most_its_share(seed, err):
    ledger = make_ledger(random.Random(seed))
    check_ledger(ledger, float(ledger.true_ratio) + err)


@settings(max_examples=300, deadline=None)
@given(
    st.integers(min_value=0, max_value=2**32),
    st.integers(min_value=-5_000, max_value=5_000),
    st.integers(min_value=-5_000, max_value=5_000),
)
def test_scenario1_compensation_restores_the_clean_delay(seed, sp, sc):
    clean, disturbed = collision_ledger(random.Random(seed), 2 * sp, 2 * sc)
    want = peer_delay(_pd(clean), 1.0)
    raw = (1.0 * (disturbed.t4 - disturbed.t1) - (disturbed.t3 - disturbed.t2)) / 2
    fixed = raw - collision_compensation_s1(2 * sp, 2 * sc, 1.0)
    assert fixed == want


@settings(max_examples=200, deadline=None)
@given(st.floats(-1e4, 1e4), st.floats(-1e4, 1e4), st.floats(0.9999, 1.0001))
def test_scenario2_error_exceeds_scenario1_by_half_the_child_step(parent, child, r):
    gap = collision_error_s2(parent, child, r) - collision_compensation_s1(parent, child, r)
    assert gap == pytest.approx(0.5 * r * child, abs=1e-6)


@settings(max_examples=300, deadline=None)
@given(st.floats(min_value=1.0, max_value=2_000.0), st.floats(min_value=-150.0, max_value=150.0))
def test_motion_delay_matches_a_numerical_chase(distance, speed):
    ours = propagation_delay(distance, speed) * 1e9
    # the closed form counts ``speed`` as closing speed, i.e. the chase with the sign flipped
    assert abs(ours - chase_delay_s(distance, -speed) * 1e9) < 1e-6
    # against the receding-positive chase the gap is the second-order term 2dv/c^2
    gap = abs(ours - chase_delay_s(distance, speed) * 1e9)
    assert gap <= 2 * distance * abs(speed) / C**2 * 1e9 * 1.001 + 1e-9
    assert gap < 0.01  # below 10 ps


@settings(max_examples=200, deadline=None)
@given(
    st.integers(0, 10**12), st.integers(1, 10**6), st.integers(0, 10**6), st.integers(-10**4, 10**4),
)
def test_direct_delay_carries_exactly_the_residual_offset(t5, delay, cf, eps):
    # a slave whose global time is eps ahead sees t6 shifted by eps
    t6g = t5 + cf + delay + eps
    if delay + eps < 0:
        return
    d = direct_peer_delay(t5, t6g, cf)
    assert d == delay + eps
    # using that delay makes the next offset read zero: the residual is absorbed, not corrected
    assert sync_offset(SyncTimestamps(t5, t6g, cf, 0), d) == 0
