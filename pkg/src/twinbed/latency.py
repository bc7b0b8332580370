"""Per-stage message delay model.

Each of the five data-flow stages carries measured summary statistics
(mean, min, max, 99th percentile). Samples are drawn from a log-normal
fitted to (mean, p99) and clamped to [min, max]; the log-normal matches the
right-skewed delay histograms of the measurements.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field

from twinbed.errors import ConfigError

Z99 = 2.3263478740408408  # standard normal 99th percentile

STAGES = (1, 2, 3, 4, 5)

# Measured stage statistics: mean, max, min, p99 (milliseconds).
TABLE_DEFAULTS: dict[int, tuple[float, float, float, float]] = {
    1: (49.7, 69.0, 39.0, 67.0),
    2: (11.7, 61.0, 3.0, 26.0),
    3: (14.7, 97.0, 4.0, 66.0),
    4: (8.4, 61.4, 2.9, 16.0),
    5: (8.3, 141.0, 4.0, 23.0),
}


def _fit_lognormal(mean: float, p99: float) -> tuple[float, float]:
    """Solve exp(mu + s^2/2) = mean and exp(mu + Z99 s) = p99 for (mu, s)."""
    ratio = math.log(p99 / mean)
    if ratio <= 0.0:
        return math.log(mean), 0.0
    disc = Z99 * Z99 - 2.0 * ratio
    if disc < 0.0:
        raise ConfigError(f"p99 {p99} too extreme for mean {mean}: no log-normal fit")
    sigma = Z99 - math.sqrt(disc)
    mu = math.log(mean) - 0.5 * sigma * sigma
    return mu, sigma


@dataclass(frozen=True)
class StageDelay:
    """One stage's delay distribution: fitted log-normal clamped to [min, max]."""

    mean_ms: float
    min_ms: float
    max_ms: float
    p99_ms: float
    _mu: float = field(init=False, repr=False)
    _sigma: float = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if self.min_ms > self.max_ms:
            raise ConfigError(f"stage min {self.min_ms} exceeds max {self.max_ms}")
        if self.mean_ms < 0 or self.min_ms < 0:
            raise ConfigError("delays cannot be negative")
        if self.mean_ms == 0.0 or self.min_ms == self.max_ms:
            mu, sigma = 0.0, 0.0
        else:
            mu, sigma = _fit_lognormal(self.mean_ms, self.p99_ms)
        object.__setattr__(self, "_mu", mu)
        object.__setattr__(self, "_sigma", sigma)

    def sample_ms(self, rng: random.Random) -> float:
        if self.min_ms == self.max_ms:
            return self.min_ms
        if self.mean_ms == 0.0:
            return 0.0
        if self._sigma == 0.0:
            d = self.mean_ms
        else:
            d = rng.lognormvariate(self._mu, self._sigma)
        return max(self.min_ms, min(self.max_ms, d))


class LatencyModel:
    """Delay distributions for the five stages."""

    def __init__(self, stages: dict[int, StageDelay]):
        missing = [s for s in STAGES if s not in stages]
        if missing:
            raise ConfigError(f"latency model missing stages {missing}")
        self.stages = dict(stages)

    @classmethod
    def table_defaults(cls) -> "LatencyModel":
        return cls(
            {
                k: StageDelay(mean_ms=m, max_ms=mx, min_ms=mn, p99_ms=p)
                for k, (m, mx, mn, p) in TABLE_DEFAULTS.items()
            }
        )

    @classmethod
    def zeroed(cls) -> "LatencyModel":
        return cls({k: StageDelay(0.0, 0.0, 0.0, 0.0) for k in STAGES})

    def sample_ms(self, stage: int, rng: random.Random) -> float:
        try:
            model = self.stages[stage]
        except KeyError:
            raise ConfigError(f"unknown delay stage {stage}") from None
        return model.sample_ms(rng)

    def sample_s(self, stage: int, rng: random.Random) -> float:
        return self.sample_ms(stage, rng) / 1000.0


def sample_latency(stage: int, latency: LatencyModel, rng: random.Random) -> float:
    """Draw one stage delay in milliseconds."""
    return latency.sample_ms(stage, rng)
