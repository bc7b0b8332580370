"""Small estimators shared by the workstation and the cyber space.

Vision fixes carry several centimeters of noise, which a raw 8 Hz finite
difference would turn into +/-0.3 m/s speed noise. Speeds are therefore
estimated as a finite difference across the endpoints of a short window of
fixes, and controllers can apply an extra first-order filter on top.
"""

from __future__ import annotations

import math
from collections import deque


class WindowedSpeedEstimator:
    """Finite-difference speed from timestamped position fixes.

    Differences the endpoints of the shortest fix history that still spans
    window_s, so the estimate always averages over at least the window once
    enough fixes exist. With fewer than two fixes the estimate is None.
    """

    def __init__(self, window_s: float):
        if window_s <= 0:
            raise ValueError("window must be positive")
        self.window_s = window_s
        self._fixes: deque[tuple[float, float, float]] = deque()

    def add_fix(self, t: float, x: float, y: float) -> float | None:
        if self._fixes and t <= self._fixes[-1][0]:
            return self.estimate()
        self._fixes.append((t, x, y))
        # evict old fixes only while the remaining span still covers the window
        while len(self._fixes) > 2 and t - self._fixes[1][0] >= self.window_s - 1e-12:
            self._fixes.popleft()
        return self.estimate()

    def estimate(self) -> float | None:
        if len(self._fixes) < 2:
            return None
        t0, x0, y0 = self._fixes[0]
        t1, x1, y1 = self._fixes[-1]
        dt = t1 - t0
        if dt <= 0:
            return None
        return math.hypot(x1 - x0, y1 - y0) / dt


class LowPass:
    """First-order filter with time constant tau_s; tau_s = 0 passes through."""

    def __init__(self, tau_s: float):
        if tau_s < 0:
            raise ValueError("tau must be non-negative")
        self.tau_s = tau_s
        self._value: float | None = None

    @property
    def value(self) -> float | None:
        return self._value

    def update(self, sample: float, dt: float) -> float:
        if self.tau_s == 0.0 or self._value is None:
            self._value = sample
        else:
            alpha = dt / (self.tau_s + dt)
            self._value += alpha * (sample - self._value)
        return self._value
