"""Post-processing of platoon logs: spacing, string stability, smoothness."""

from __future__ import annotations

import math
from dataclasses import dataclass

from twinbed.config import TwinConfig
from twinbed.scenario import PlatoonLog


def spacing_profile(log: PlatoonLog) -> dict[str, list[tuple[float, float]]]:
    """Per-follower (time, arc spacing to predecessor) series."""
    profiles: dict[str, list[tuple[float, float]]] = {}
    for row in log.rows:
        if row.spacing_to_pred_m is None:
            continue
        profiles.setdefault(row.vehicle_id, []).append((row.time_s, row.spacing_to_pred_m))
    return profiles


@dataclass(frozen=True)
class StringStabilityResult:
    applicable: bool
    ratios: dict[str, float]  # follower id -> amplitude ratio vs predecessor
    amplitudes: dict[str, float]

    @property
    def stable(self) -> bool:
        return self.applicable and all(r <= 1.05 for r in self.ratios.values())


def string_stability(
    log: PlatoonLog, period_s: float | None, warmup_s: float
) -> StringStabilityResult:
    """Amplitude ratio of each follower's speed oscillation vs its predecessor.

    Amplitude is peak-to-peak speed over the last full leader period. Without
    a periodic leader profile (or with a log too short for one post-warm-up
    period) the metric is not applicable.
    """
    if period_s is None or not log.rows:
        return StringStabilityResult(False, {}, {})
    t_end = log.rows[-1].time_s
    t_start = t_end - period_s
    if t_start < warmup_s:
        return StringStabilityResult(False, {}, {})

    amplitudes: dict[str, float] = {}
    for vid, _ in log.formation:
        speeds = [
            r.speed_mps for r in log.vehicle_rows(vid) if t_start <= r.time_s <= t_end
        ]
        if len(speeds) < 2:
            return StringStabilityResult(False, {}, {})
        amplitudes[vid] = max(speeds) - min(speeds)

    ratios: dict[str, float] = {}
    for idx in range(1, len(log.formation)):
        vid = log.formation[idx][0]
        pred = log.formation[idx - 1][0]
        pred_amp = amplitudes[pred]
        ratios[vid] = amplitudes[vid] / pred_amp if pred_amp > 1e-12 else math.inf
    return StringStabilityResult(True, ratios, amplitudes)


def smoothness_metric(log: PlatoonLog, vehicle_id: str, warmup_s: float = 0.0) -> float | None:
    """RMS jerk from discrete second differences of the speed trace.

    Returns None for traces too short to difference twice.
    """
    rows = [r for r in log.vehicle_rows(vehicle_id) if r.time_s >= warmup_s]
    if len(rows) < 3:
        return None
    total = 0.0
    count = 0
    for a, b, c in zip(rows, rows[1:], rows[2:]):
        dt = (c.time_s - a.time_s) / 2.0
        if dt <= 0:
            continue
        jerk = (c.speed_mps - 2.0 * b.speed_mps + a.speed_mps) / (dt * dt)
        total += jerk * jerk
        count += 1
    return math.sqrt(total / count) if count else None


def speed_trace_distance(log: PlatoonLog, a: str, b: str, warmup_s: float = 0.0) -> float:
    """RMS pointwise distance between two vehicles' speed traces."""
    rows_a = [r.speed_mps for r in log.vehicle_rows(a) if r.time_s >= warmup_s]
    rows_b = [r.speed_mps for r in log.vehicle_rows(b) if r.time_s >= warmup_s]
    n = min(len(rows_a), len(rows_b))
    if n == 0:
        return 0.0
    return math.sqrt(sum((x - y) ** 2 for x, y in zip(rows_a[:n], rows_b[:n])) / n)


def run_metrics(log: PlatoonLog, config: TwinConfig) -> dict:
    """Summary metrics of one platoon run, as stored in the archive."""
    sc = config.scenario
    profile = sc.leader
    period = None if profile.shape == "constant" else profile.period_s
    stability = string_stability(log, period, sc.warmup_s)

    jerk: dict[str, float | None] = {}
    for vid, _ in log.formation:
        jerk[vid] = smoothness_metric(log, vid, warmup_s=sc.warmup_s)
    p_jerks = [j for (vid, kind), j in zip(log.formation, jerk.values()) if kind == "P" and j]
    v_jerks = [j for (vid, kind), j in zip(log.formation, jerk.values()) if kind == "V" and j]
    mean_p = sum(p_jerks) / len(p_jerks) if p_jerks else None
    mean_v = sum(v_jerks) / len(v_jerks) if v_jerks else None

    spacing_stats: dict[str, dict] = {}
    body = config.vehicle.body_length_m
    for vid, series in spacing_profile(log).items():
        post = [s for t, s in series if t >= sc.warmup_s]
        if not post:
            continue
        spacing_stats[vid] = {
            "min_m": min(post),
            "max_m": max(post),
            "mean_m": sum(post) / len(post),
            # gap between bodies, alongside the center-to-center figures
            "min_gap_m": min(post) - body,
        }

    speeds_ok = True
    for row in log.rows:
        cap = sc.v_max_physical_mps if row.kind == "P" else sc.v_max_virtual_mps
        if row.speed_mps > cap + 1e-9:
            speeds_ok = False
            break

    return {
        "string_stability": {
            "applicable": stability.applicable,
            "ratios": stability.ratios,
            "amplitudes": stability.amplitudes,
            "stable": stability.stable,
        },
        "rms_jerk": jerk,
        "rms_jerk_mean_physical": mean_p,
        "rms_jerk_mean_virtual": mean_v,
        "virtual_smoother": (
            mean_v < mean_p if mean_p is not None and mean_v is not None else None
        ),
        "spacing": spacing_stats,
        "speed_caps_respected": speeds_ok,
        "log_sha256": log.sha256(),
        "row_count": len(log.rows),
    }
