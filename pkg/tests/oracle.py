"""Brute-force timestamp ledgers for checking the synchronization arithmetic.

A ledger is built in true time: two free-running clocks, a link with a
known one-way delay, and the instants at which every message leaves and
arrives.  Clock readings are taken with exact rational arithmetic and then
floored to the tick, so the ledger knows the true offset and delay that the
protocol formulas are supposed to recover.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction


@dataclass(frozen=True)
class Clock:
    rate: Fraction  # counter ns per true ns
    offset_ns: Fraction  # counter value at true time 0
    tick_ns: int

    def exact(self, t_ns: Fraction) -> Fraction:
        return self.offset_ns + t_ns * self.rate

    def read(self, t_ns: Fraction) -> int:
        v = self.exact(t_ns)
        return (v // self.tick_ns) * self.tick_ns


@dataclass(frozen=True)
class Ledger:
    master: Clock
    slave: Clock
    delay_true_ns: Fraction  # one-way, true time
    t1: int
    t2: int
    t3: int
    t4: int
    t5: int
    t6: int
    cf_ns: int  # correction carried by Sync/Follow_Up, master time scale
    true_offset_ns: Fraction  # slave - master at the Sync receipt instant
    true_ratio: Fraction  # master rate / slave rate

    @property
    def delay_master_ns(self) -> Fraction:
        return self.delay_true_ns * self.master.rate

    @property
    def tick_ns(self) -> int:
        return max(self.master.tick_ns, self.slave.tick_ns)


def make_ledger(rng: random.Random, tick_ns: int = 5, max_ppm: float = 50.0, exact: bool = False) -> Ledger:
    """A random but self-consistent exchange of Pdelay and Sync messages.

    With ``exact`` the clocks are perfect and every instant is a whole tick,
    so the formulas must hold with no rounding at all.
    """
    if exact:
        a = b = Fraction(0)
        tick_ns = 1
    else:
        a = Fraction(rng.randint(-int(max_ppm * 1000), int(max_ppm * 1000)), 10**9)
        b = Fraction(rng.randint(-int(max_ppm * 1000), int(max_ppm * 1000)), 10**9)
    master = Clock(1 + a, Fraction(rng.randint(0, 10**9)), tick_ns)
    slave = Clock(1 + b, Fraction(rng.randint(0, 10**9)), tick_ns)

    def instant(lo: int, hi: int) -> Fraction:
        if exact:
            return Fraction(rng.randint(lo, hi))
        return Fraction(rng.randint(lo * 1000, hi * 1000), 1000)

    delay = instant(1, 5_000_000)
    T1 = instant(0, 10**9)
    T2 = T1 + delay
    T3 = T2 + instant(1, 2_000_000)
    T4 = T3 + delay
    T5 = T4 + instant(0, 10**9)
    residence = instant(0, 100_000)  # time spent inside bridges on the Sync path
    T6 = T5 + residence + delay
    cf = residence * master.rate
    if exact:
        assert cf.denominator == 1
    cf_ns = int(cf) if exact else round(cf)

    return Ledger(
        master=master,
        slave=slave,
        delay_true_ns=delay,
        t1=slave.read(T1),
        t2=master.read(T2),
        t3=master.read(T3),
        t4=slave.read(T4),
        t5=master.read(T5),
        t6=slave.read(T6),
        cf_ns=cf_ns,
        true_offset_ns=slave.exact(T6) - master.exact(T6),
        true_ratio=master.rate / slave.rate,
    )


def collision_ledger(rng: random.Random, step_parent: int, step_child: int) -> tuple[Ledger, Ledger]:
    """The same exchange twice: undisturbed, and with both ends stepping mid-exchange.

    The parent (responder) steps between receiving the request and sending
    the response; the child (requester) steps between sending the request
    and receiving the response.
    """
    clean = make_ledger(rng, exact=True)
    disturbed = Ledger(
        **{**clean.__dict__, "t3": clean.t3 + step_parent, "t4": clean.t4 + step_child}
    )
    return clean, disturbed


C = 299_792_458.0


def chase_delay_s(distance_m: float, radial_speed_mps: float) -> float:
    """Flight time of a signal sent from a fixed point to a receiver moving radially.

    Solved by fixed-point iteration on ``c * t = d + v * t`` rather than in
    closed form.
    """
    t = distance_m / C
    for _ in range(50):
        t = (distance_m + radial_speed_mps * t) / C
    return t
