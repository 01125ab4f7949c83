import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tsnsync.engine import Engine, RngStreams, SimulationError, seconds, to_seconds


def test_events_fire_in_time_then_insertion_order():
    eng = Engine()
    fired = []
    eng.schedule(20, fired.append, "b")
    eng.schedule(10, fired.append, "a")
    eng.schedule(20, fired.append, "c")
    eng.run_until(100)
    assert fired == ["a", "b", "c"]
    assert eng.now == 100


def test_scheduling_in_the_past_is_an_error():
    eng = Engine()
    eng.schedule(50, lambda: None)
    eng.run_until(50)
    with pytest.raises(SimulationError):
        eng.schedule(49, lambda: None)


def test_run_until_stops_at_the_horizon():
    eng = Engine()
    fired = []
    eng.schedule(10, fired.append, 1)
    eng.schedule(11, fired.append, 2)
    assert eng.run_until(10) == 1
    assert eng.pending() == 1
    assert eng.peek_time() == 11


def test_cancelled_events_do_not_run():
    eng = Engine()
    fired = []
    ev = eng.schedule(5, fired.append, "x")
    ev.cancel()
    eng.run_until(10)
    assert fired == []
    assert eng.pending() == 0


def test_events_scheduled_while_running_are_ordered():
    eng = Engine()
    fired = []

    def first():
        fired.append("first")
        eng.schedule_in(0, fired.append, "same-time")
        eng.schedule_in(5, fired.append, "later")

    eng.schedule(1, first)
    eng.schedule(3, fired.append, "mid")
    eng.run_until(100)
    assert fired == ["first", "same-time", "mid", "later"]


def test_trace_digest_ignores_untraced_events():
    def build(extra: bool) -> str:
        eng = Engine()
        eng.schedule(1, lambda: None, kind="a", target="n1")
        if extra:
            eng.schedule(2, lambda: None, kind="sample", traced=False)
        eng.run_until(10)
        return eng.trace_digest()

    assert build(False) == build(True)


def test_rng_streams_are_stable_and_independent():
    a = RngStreams(7)
    b = RngStreams(7)
    x1 = [a.stream("x").random() for _ in range(3)]
    b.stream("y").random()  # touching another stream must not shift "x"
    x2 = [b.stream("x").random() for _ in range(3)]
    assert x1 == x2
    assert RngStreams(8).stream("x").random() != x1[0]


def test_time_conversions_round_trip():
    assert seconds(1.5) == 1_500_000_000_000
    assert to_seconds(seconds(0.125)) == 0.125


@settings(max_examples=200, deadline=None)
@given(st.lists(st.integers(min_value=0, max_value=10**6), min_size=1, max_size=60))
def test_fire_times_never_decrease(times):
    eng = Engine()
    seen = []
    for t in times:
        eng.schedule(t, lambda t=t: seen.append(eng.now))
    eng.run_until(10**6)
    assert seen == sorted(times)
