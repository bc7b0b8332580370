"""Virtual time and a deterministic discrete-event scheduler.

All simulation components share one scheduler. Events at equal timestamps fire
in scheduling order, so a run is reproducible given the same seed and the same
sequence of schedule calls.
"""

from __future__ import annotations

import heapq
import itertools
from typing import Callable


class VirtualClock:
    """Simulation time in seconds; advances only through the scheduler."""

    def __init__(self, start: float = 0.0):
        self._now = float(start)

    @property
    def now(self) -> float:
        return self._now

    def advance_to(self, t: float) -> None:
        if t < self._now:
            raise ValueError(f"virtual time cannot go backwards: {t} < {self._now}")
        self._now = t


class EventScheduler:
    """Priority-queue event loop keyed by virtual delivery time."""

    def __init__(self, clock: VirtualClock | None = None):
        self.clock = clock if clock is not None else VirtualClock()
        self._queue: list[tuple[float, int, Callable[[], None]]] = []
        self._seq = itertools.count()

    def call_at(self, t: float, fn: Callable[[], None]) -> None:
        if t < self.clock.now:
            raise ValueError(f"cannot schedule in the past: {t} < {self.clock.now}")
        heapq.heappush(self._queue, (t, next(self._seq), fn))

    def call_after(self, delay: float, fn: Callable[[], None]) -> None:
        self.call_at(self.clock.now + delay, fn)

    def call_every(self, hz: float, fn: Callable[[], None], start_tick: int = 0) -> None:
        """Schedule fn at tick times k/hz for k = start_tick, start_tick+1, ...

        Tick times are computed from the tick index each time (k / hz), not by
        accumulating a period, so long runs do not drift.
        """
        if hz <= 0:
            raise ValueError("tick rate must be positive")

        def tick(k: int = start_tick) -> None:
            fn()
            self.call_at((k + 1) / hz, lambda: tick(k + 1))

        self.call_at(start_tick / hz, tick)

    def next_time(self) -> float | None:
        return self._queue[0][0] if self._queue else None

    def run_until(self, t_end: float) -> None:
        """Process events with timestamp strictly below t_end, then land on it.

        The strict bound keeps periodic counts exact: a 30 Hz capture stream
        over run_until(60.0) fires 1800 times, not 1801.
        """
        while self._queue and self._queue[0][0] < t_end:
            t, _, fn = heapq.heappop(self._queue)
            self.clock.advance_to(t)
            fn()
        self.clock.advance_to(t_end)

    def run_next(self) -> bool:
        """Process the single next event. Returns False when idle."""
        if not self._queue:
            return False
        t, _, fn = heapq.heappop(self._queue)
        self.clock.advance_to(t)
        fn()
        return True
