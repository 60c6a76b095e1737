"""Exact simulated time and per-process local clocks.

All simulation time is rational (`fractions.Fraction`), never floating
point: timer expiries are computed by integrating piecewise-constant
clock-rate schedules, and several latency bounds are checked as exact
inequalities, so rounding anywhere would make those checks meaningless.

A process's local clock runs at an adversary-chosen positive rate before
the global stabilization time (GST) and at rate 1 from GST onward.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

SimTime = Fraction

ZERO = Fraction(0)


def as_time(value) -> Fraction:
    """Coerce ints/strings/Fractions to an exact SimTime."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value)
    raise TypeError(f"not an exact time value: {value!r}")


@dataclass(frozen=True)
class ClockModel:
    """Piecewise-constant local-clock rate schedule for one process.

    ``segments`` is a sorted tuple of (start_global_time, rate) pairs, the
    first starting at 0. Rates must be strictly positive everywhere, and 1
    on every segment at or after GST.
    """

    process: int
    segments: tuple[tuple[Fraction, Fraction], ...]

    @staticmethod
    def constant(process: int) -> "ClockModel":
        return ClockModel(process, ((ZERO, Fraction(1)),))

    @staticmethod
    def drift_until(process: int, rate: Fraction, gst: Fraction) -> "ClockModel":
        """Rate ``rate`` on [0, gst), rate 1 afterwards."""
        rate = Fraction(rate)
        if gst <= 0 or rate == 1:
            return ClockModel.constant(process)
        return ClockModel(process, ((ZERO, rate), (Fraction(gst), Fraction(1))))

    @staticmethod
    def piecewise(process: int, breakpoints: list[tuple[Fraction, Fraction]],
                  gst: Fraction) -> "ClockModel":
        """Arbitrary pre-GST schedule; clamps to rate 1 from GST onward."""
        segs = [(Fraction(t), Fraction(r)) for t, r in breakpoints if Fraction(t) < gst]
        if not segs or segs[0][0] != 0:
            segs.insert(0, (ZERO, Fraction(1)))
        segs.append((Fraction(gst), Fraction(1)))
        return ClockModel(process, tuple(segs))

    def validate(self, gst: Fraction) -> None:
        prev = Fraction(-1)
        for start, rate in self.segments:
            if rate <= 0:
                raise ValueError(f"P{self.process}: non-positive clock rate {rate}")
            if start <= prev:
                raise ValueError(f"P{self.process}: unsorted rate schedule")
            if start >= gst and rate != 1:
                raise ValueError(f"P{self.process}: drift at/after GST")
            prev = start
        # the schedule in force at GST must already be rate 1
        if self.rate_at(Fraction(gst)) != 1:
            raise ValueError(f"P{self.process}: drift at/after GST")

    def rate_at(self, t: Fraction) -> Fraction:
        rate = self.segments[0][1]
        for start, r in self.segments:
            if start <= t:
                rate = r
            else:
                break
        return rate

    def local_elapsed(self, t0: Fraction, t1: Fraction) -> Fraction:
        """Local-clock time accumulated over the global interval [t0, t1]."""
        if t1 < t0:
            raise ValueError("interval reversed")
        total = ZERO
        for i, (start, rate) in enumerate(self.segments):
            end = self.segments[i + 1][0] if i + 1 < len(self.segments) else None
            lo = max(start, t0)
            hi = t1 if end is None else min(end, t1)
            if hi > lo:
                total += rate * (hi - lo)
        return total

    def global_expiry(self, t0: Fraction, local_duration: Fraction) -> Fraction:
        """Global time at which ``local_duration`` has elapsed on the local
        clock, starting from global time ``t0``."""
        if local_duration <= 0:
            raise ValueError("duration must be positive")
        remaining = Fraction(local_duration)
        t = Fraction(t0)
        for i, (start, rate) in enumerate(self.segments):
            end = self.segments[i + 1][0] if i + 1 < len(self.segments) else None
            if end is not None and end <= t:
                continue
            seg_start = max(start, t)
            if end is None:
                return seg_start + remaining / rate
            capacity = rate * (end - seg_start)
            if capacity >= remaining:
                return seg_start + remaining / rate
            remaining -= capacity
            t = end
        raise AssertionError("unreachable: schedule covers all time")
