"""Comparison synchronizers: per-view all-to-all, and view doubling.

The all-to-all synchronizer pays a full wish exchange in every view: when
a process's view timer fires it broadcasts WISH(v+1), and a process moves
to view w+1 as soon as 2f+1 distinct processes have wished for w+1 or
beyond (a wish for a high view implies willingness for every lower one,
and catching up cascades without further sends). Wishing still requires
the sender's own timeout, so a correct process sends n words per view it
sits through, for a cubic total over Theta(f) views.

The doubling synchronizer never communicates: each view simply lasts
twice as long as the previous one, starting from beta. Laggards are only
ever caught because view durations eventually dwarf any fixed skew, which
is why its synchronization latency is unbounded in the skew.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable


@dataclass(frozen=True)
class WishMsg:
    view: int   # the view the sender wants to enter

    def summary(self) -> str:
        return f"WISH(view={self.view})"


class AllToAllSync:
    def __init__(self, pid: int, n: int, f: int, delta: Fraction,
                 overlap: Fraction, epsilon: Fraction,
                 advance: Callable[[object, int], None]):
        self.pid = pid
        self.n = n
        self.f = f
        self.view_duration = Fraction(overlap) + 2 * Fraction(delta) + Fraction(epsilon)
        self._advance = advance
        self.view = 1
        self._wishes: dict[int, int] = {}   # sender -> highest view wished

    def start(self, ctx) -> None:
        ctx.measure("baseline_timer", self.view_duration)
        ctx.log_advance(self.view)
        self._advance(ctx, self.view)

    def on_timer(self, ctx) -> None:
        ctx.broadcast(WishMsg(self.view + 1))

    def on_message(self, ctx, sender: int, msg) -> bool:
        if not isinstance(msg, WishMsg):
            return False
        if msg.view > self._wishes.get(sender, 0):
            self._wishes[sender] = msg.view
        self._catch_up(ctx)
        return True

    def _catch_up(self, ctx) -> None:
        while True:
            target = self.view + 1
            support = sum(1 for w in self._wishes.values() if w >= target)
            if support < 2 * self.f + 1:
                return
            self.view = target
            ctx.measure("baseline_timer", self.view_duration)
            ctx.log_advance(self.view)
            self._advance(ctx, self.view)


class DoublingSync:
    def __init__(self, pid: int, beta: Fraction,
                 advance: Callable[[object, int], None]):
        self.pid = pid
        self.beta = Fraction(beta)
        self._advance = advance
        self.view = 1
        self.current_duration = self.beta

    def start(self, ctx) -> None:
        ctx.measure("baseline_timer", self.current_duration)
        ctx.log_advance(self.view)
        self._advance(ctx, self.view)

    def on_timer(self, ctx) -> None:
        self.current_duration *= 2
        self.view += 1
        ctx.measure("baseline_timer", self.current_duration)
        ctx.log_advance(self.view)
        self._advance(ctx, self.view)

    def on_message(self, ctx, sender: int, msg) -> bool:
        return False
