"""UE trajectories as closed-form functions of simulated time.

Positions are in metres, ``(x, y, z)`` with ``z`` the antenna height.  Every
trajectory may hold still until ``start_s`` so that devices can synchronize
before they start moving.
"""

from __future__ import annotations

import bisect
import math
import random
from dataclasses import dataclass, field

from .engine import PS_PER_S

Vec = tuple[float, float, float]

GNB_HEIGHT_M = 25.0
UE_HEIGHT_M = 1.5


def _sub(a: Vec, b: Vec) -> Vec:
    return (a[0] - b[0], a[1] - b[1], a[2] - b[2])


def _norm(a: Vec) -> float:
    return math.sqrt(a[0] * a[0] + a[1] * a[1] + a[2] * a[2])


def distance(a: Vec, b: Vec) -> float:
    return _norm(_sub(a, b))


class Trajectory:
    start_s: float = 0.0

    def position_at(self, t: int) -> Vec:
        return self.state_at(t)[0]

    def velocity_at(self, t: int) -> Vec:
        return self.state_at(t)[1]

    def state_at(self, t: int) -> tuple[Vec, Vec]:
        raise NotImplementedError

    @property
    def max_speed(self) -> float:
        return 0.0


@dataclass
class Fixed(Trajectory):
    point: Vec

    def state_at(self, t: int) -> tuple[Vec, Vec]:
        return self.point, (0.0, 0.0, 0.0)


@dataclass
class UniformLinear(Trajectory):
    origin: Vec
    velocity: Vec
    start_s: float = 0.0

    def state_at(self, t: int) -> tuple[Vec, Vec]:
        if t < 0:
            raise ValueError("negative time")
        dt = t / PS_PER_S - self.start_s
        if dt <= 0:
            return self.origin, (0.0, 0.0, 0.0)
        o, v = self.origin, self.velocity
        return (o[0] + v[0] * dt, o[1] + v[1] * dt, o[2] + v[2] * dt), v

    @property
    def max_speed(self) -> float:
        return _norm(self.velocity)


@dataclass
class _Leg:
    t0: float
    a: Vec
    b: Vec
    speed: float

    @property
    def duration(self) -> float:
        return distance(self.a, self.b) / self.speed


@dataclass
class WaypointPatrol(Trajectory):
    """Piecewise-linear patrol through ``waypoints``.

    ``loop=True`` cycles back to the first point; otherwise the path is
    walked back and forth.  With ``speed_range`` a fresh speed is drawn from
    ``rng`` at the start of every leg.
    """

    waypoints: list[Vec]
    speed: float = 10.0
    speed_range: tuple[float, float] | None = None
    loop: bool = True
    start_s: float = 0.0
    rng: random.Random | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        if len(self.waypoints) < 2:
            raise ValueError("a patrol needs at least two waypoints")
        if self.speed_range is not None and self.rng is None:
            self.rng = random.Random(0)
        self._legs: list[_Leg] = []
        self._starts: list[float] = []
        self._idx = 0
        self._dir = 1

    def _draw_speed(self) -> float:
        if self.speed_range is None:
            return self.speed
        lo, hi = self.speed_range
        return self.rng.uniform(lo, hi)

    def _next_target(self, i: int) -> int:
        n = len(self.waypoints)
        if self.loop:
            return (i + 1) % n
        j = i + self._dir
        if j < 0 or j >= n:
            self._dir = -self._dir
            j = i + self._dir
        return j

    def _extend(self, until: float) -> None:
        while not self._legs or self._legs[-1].t0 + self._legs[-1].duration <= until:
            t0 = self._legs[-1].t0 + self._legs[-1].duration if self._legs else 0.0
            nxt = self._next_target(self._idx)
            leg = _Leg(t0, self.waypoints[self._idx], self.waypoints[nxt], self._draw_speed())
            self._idx = nxt
            if leg.duration <= 0:
                continue
            self._legs.append(leg)
            self._starts.append(t0)

    def state_at(self, t: int) -> tuple[Vec, Vec]:
        if t < 0:
            raise ValueError("negative time")
        tau = t / PS_PER_S - self.start_s
        if tau <= 0:
            return self.waypoints[0], (0.0, 0.0, 0.0)
        self._extend(tau)
        leg = self._legs[bisect.bisect_right(self._starts, tau) - 1]
        d = _sub(leg.b, leg.a)
        length = _norm(d)
        u = (d[0] / length, d[1] / length, d[2] / length)
        s = (tau - leg.t0) * leg.speed
        a = leg.a
        pos = (a[0] + u[0] * s, a[1] + u[1] * s, a[2] + u[2] * s)
        return pos, (u[0] * leg.speed, u[1] * leg.speed, u[2] * leg.speed)

    @property
    def max_speed(self) -> float:
        return self.speed_range[1] if self.speed_range else self.speed

    @property
    def perimeter(self) -> float:
        pts = self.waypoints + ([self.waypoints[0]] if self.loop else [])
        return sum(distance(p, q) for p, q in zip(pts, pts[1:]))


def rectangle_patrol(
    center: tuple[float, float],
    width: float = 50.0,
    height: float = 50.0,
    speed: float = 10.0,
    z: float = UE_HEIGHT_M,
    start_s: float = 0.0,
    speed_range: tuple[float, float] | None = None,
    rng: random.Random | None = None,
) -> WaypointPatrol:
    cx, cy = center
    hw, hh = width / 2, height / 2
    corners = [(cx - hw, cy - hh, z), (cx + hw, cy - hh, z), (cx + hw, cy + hh, z), (cx - hw, cy + hh, z)]
    return WaypointPatrol(corners, speed=speed, speed_range=speed_range, loop=True, start_s=start_s, rng=rng)


def factory_patrol(
    cell_origin: tuple[float, float],
    speed_range: tuple[float, float] = (5.0, 10.0),
    rng: random.Random | None = None,
    cell_m: float = 25.0,
    start_s: float = 0.0,
) -> WaypointPatrol:
    """Task robot confined to a ``cell_m`` square with its corner at ``cell_origin``."""
    x0, y0 = cell_origin
    return rectangle_patrol(
        (x0 + cell_m / 2, y0 + cell_m / 2), cell_m, cell_m,
        speed_range=speed_range, rng=rng, start_s=start_s,
    )


def shuttle(
    a: tuple[float, float],
    b: tuple[float, float],
    speed_range: tuple[float, float] = (5.0, 10.0),
    rng: random.Random | None = None,
    start_s: float = 0.0,
) -> WaypointPatrol:
    """Transport robot running back and forth along a straight line."""
    return WaypointPatrol(
        [(a[0], a[1], UE_HEIGHT_M), (b[0], b[1], UE_HEIGHT_M)],
        speed_range=speed_range, loop=False, start_s=start_s, rng=rng,
    )


@dataclass
class FactoryLayout:
    task: list[WaypointPatrol]
    horizontal: list[WaypointPatrol]
    vertical: list[WaypointPatrol]
    size_m: float

    @property
    def all(self) -> list[WaypointPatrol]:
        return self.task + self.horizontal + self.vertical


def factory_layout(
    cells_per_side: int = 10,
    pitch_m: float = 50.0,
    cell_m: float = 25.0,
    speed_range: tuple[float, float] = (5.0, 10.0),
    rng_for=None,
    start_s: float = 0.0,
) -> FactoryLayout:
    """Task robots on a ``pitch_m`` grid plus shuttles between neighbouring rows/columns.

    ``rng_for(name)`` supplies the random stream of each robot.  With ten
    cells per side this gives 100 task robots and 9 + 9 transport robots.
    """
    rng_for = rng_for or (lambda name: random.Random(name))
    n = cells_per_side
    size = n * pitch_m
    task = []
    for i in range(n):
        for j in range(n):
            origin = (i * pitch_m + (pitch_m - cell_m) / 2, j * pitch_m + (pitch_m - cell_m) / 2)
            task.append(factory_patrol(origin, speed_range, rng_for(f"robot_{i}_{j}"), cell_m, start_s))
    horizontal, vertical = [], []
    for k in range(n - 1):
        # shuttles run in the gap between grid rows / columns
        y = (k + 1) * pitch_m
        horizontal.append(shuttle((pitch_m / 2, y), (size - pitch_m / 2, y), speed_range, rng_for(f"hshuttle_{k}"), start_s))
        x = (k + 1) * pitch_m
        vertical.append(shuttle((x, pitch_m / 2), (x, size - pitch_m / 2), speed_range, rng_for(f"vshuttle_{k}"), start_s))
    return FactoryLayout(task, horizontal, vertical, size)


def relative_velocity_along_los(traj_ue: Trajectory, traj_gnb: Trajectory, t: int) -> float:
    """Radial speed of the UE relative to the gNB; positive when receding."""
    p_ue, v_ue = traj_ue.state_at(t)
    p_g, v_g = traj_gnb.state_at(t)
    los = _sub(p_ue, p_g)
    dist = _norm(los)
    if dist == 0.0:
        return 0.0
    rel = _sub(v_ue, v_g)
    return (rel[0] * los[0] + rel[1] * los[1] + rel[2] * los[2]) / dist
