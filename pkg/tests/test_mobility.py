import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tsnsync.engine import PS_PER_S
from tsnsync.mobility import (
    Fixed,
    UniformLinear,
    WaypointPatrol,
    distance,
    factory_layout,
    rectangle_patrol,
    relative_velocity_along_los,
)


def test_linear_motion_waits_for_its_start():
    ue = UniformLinear((0.0, 0.0, 0.0), (10.0, 0.0, 0.0), start_s=2.0)
    assert ue.position_at(PS_PER_S) == (0.0, 0.0, 0.0)
    assert ue.position_at(5 * PS_PER_S) == pytest.approx((30.0, 0.0, 0.0))
    assert ue.max_speed == 10.0


def test_rectangle_patrol_closes_its_loop():
    patrol = rectangle_patrol((0.0, 0.0), 50.0, 50.0, speed=10.0)
    assert patrol.perimeter == 200.0
    start = patrol.position_at(0)
    assert patrol.position_at(20 * PS_PER_S) == pytest.approx(start)
    assert patrol.position_at(5 * PS_PER_S) == pytest.approx((25.0, -25.0, start[2]))


def test_shuttle_turns_back_at_the_end():
    s = WaypointPatrol([(0.0, 0.0, 0.0), (10.0, 0.0, 0.0)], speed=1.0, loop=False)
    assert s.position_at(15 * PS_PER_S)[0] == pytest.approx(5.0)
    assert s.velocity_at(15 * PS_PER_S)[0] == pytest.approx(-1.0)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32), st.floats(0.0, 300.0))
def test_patrol_speed_stays_in_range_and_path_is_continuous(seed, t_s):
    patrol = rectangle_patrol((0.0, 0.0), 25.0, 25.0, speed_range=(5.0, 10.0), rng=random.Random(seed))
    t = int(t_s * PS_PER_S)
    speed = math.hypot(*patrol.velocity_at(t))
    assert 5.0 - 1e-9 <= speed <= 10.0 + 1e-9 or speed == 0.0
    # one millisecond later the robot is at most 1 cm away
    assert distance(patrol.position_at(t), patrol.position_at(t + PS_PER_S // 1000)) <= 0.01 + 1e-9
    x, y, _ = patrol.position_at(t)
    assert abs(x) <= 12.5 + 1e-9 and abs(y) <= 12.5 + 1e-9


def test_factory_layout_counts():
    layout = factory_layout(cells_per_side=10)
    assert len(layout.task) == 100
    assert len(layout.horizontal) == len(layout.vertical) == 9
    assert layout.size_m == 500.0


def test_radial_velocity_sign():
    gnb = Fixed((0.0, 0.0, 0.0))
    away = UniformLinear((10.0, 0.0, 0.0), (3.0, 4.0, 0.0))
    toward = UniformLinear((10.0, 0.0, 0.0), (-3.0, 0.0, 0.0))
    assert relative_velocity_along_los(away, gnb, 0) == pytest.approx(0.0)  # not moving yet at t=0
    assert relative_velocity_along_los(away, gnb, 1) == pytest.approx(3.0, rel=1e-6)
    assert relative_velocity_along_los(toward, gnb, 1) == pytest.approx(-3.0)
    assert relative_velocity_along_los(gnb, gnb, 5) == 0.0
