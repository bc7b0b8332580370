"""Run archives: deterministic on-disk layout, verification, and replay.

An archive is self-contained: config snapshot, seed, the platoon log, raw
delay samples, observation and ground-truth logs, world snapshots for replay,
and the metrics summary. The manifest lists every file with its content hash,
so tampering is detectable and identical runs produce identical manifests.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

import numpy as np

from twinbed import __version__
from twinbed.config import TwinConfig, dump_config
from twinbed.errors import ArchiveError
from twinbed.scenario import PlatoonLog, RunResult

MANIFEST_NAME = "manifest.json"
MIN_REPORT_SAMPLES = 100


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _observation_csv(result: RunResult) -> str:
    lines = ["time_s,vehicle_id,x_m,y_m,heading_rad,speed_mps"]
    for obs in result.observations:
        lines.append(
            f"{obs.capture_time:.6f},{obs.vehicle_id},{obs.x_m:.6f},"
            f"{obs.y_m:.6f},{obs.heading_rad:.6f},"
        )
    return "\n".join(lines) + "\n"


def _ground_truth_csv(result: RunResult) -> str:
    lines = ["time_s,vehicle_id,x_m,y_m,heading_rad,speed_mps"]
    for t, vid, state in result.ground_truth:
        lines.append(
            f"{t:.6f},{vid},{state.x_m:.6f},{state.y_m:.6f},"
            f"{state.heading_rad:.6f},{state.speed_mps:.6f}"
        )
    return "\n".join(lines) + "\n"


def _controller_csv(result: RunResult) -> str:
    lines = [
        "time_s,vehicle_id,spacing_err_m,dv_leader_mps,dv_pred_mps,"
        "accel_mps2,speed_cmd_mps,steer_cmd_rad"
    ]
    for t, vid, e_s, dv_l, dv_p, accel, speed, steer in result.control_log:
        lines.append(
            f"{t:.6f},{vid},{e_s:.6f},{dv_l:.6f},{dv_p:.6f},"
            f"{accel:.6f},{speed:.6f},{steer:.6f}"
        )
    return "\n".join(lines) + "\n"


def _cyber_csv(result: RunResult) -> str:
    lines = ["time_s,vehicle_id,kind,x_m,y_m,heading_rad,speed_mps"]
    for t, vid, kind, x, y, heading, speed in result.cyber_log:
        lines.append(
            f"{t:.6f},{vid},{kind},{x:.6f},{y:.6f},{heading:.6f},{speed:.6f}"
        )
    return "\n".join(lines) + "\n"


def write_archive(result: RunResult, out_dir: str | Path) -> dict:
    """Write all run outputs plus a hash manifest; returns the manifest."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ArchiveError(f"cannot create archive directory {out}: {exc}") from exc

    delays_lines = []
    for stage in sorted(result.delay_samples_ms):
        for d in result.delay_samples_ms[stage]:
            # full float repr so the on-disk report equals the in-memory one
            delays_lines.append(json.dumps({"stage": stage, "delay_ms": d}))
    files: dict[str, str] = {
        "config.yaml": dump_config(result.config),
        "platoon_log.csv": result.log.to_csv(),
        "observations.csv": _observation_csv(result),
        "ground_truth.csv": _ground_truth_csv(result),
        "controller_log.csv": _controller_csv(result),
        "cyber_states.csv": _cyber_csv(result),
        "delays.jsonl": "\n".join(delays_lines) + ("\n" if delays_lines else ""),
        "dead_letters.jsonl": "\n".join(json.dumps(d) for d in result.dead_letters)
        + ("\n" if result.dead_letters else ""),
        "snapshots.jsonl": "\n".join(json.dumps(s) for s in result.snapshots)
        + ("\n" if result.snapshots else ""),
        "metrics.json": json.dumps(result.metrics, indent=2, sort_keys=True) + "\n",
    }
    manifest = {
        "seed": result.seed,
        "twinbed_version": __version__,
        "files": {},
    }
    for name, content in files.items():
        data = content.encode()
        (out / name).write_bytes(data)
        manifest["files"][name] = _sha256(data)
    (out / MANIFEST_NAME).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest


@dataclass
class RunArchive:
    """Handle onto an archive directory; loaders parse files on demand."""

    path: Path
    manifest: dict

    @property
    def seed(self) -> int:
        return self.manifest["seed"]

    def load_config(self) -> TwinConfig:
        import yaml

        return TwinConfig.from_dict(yaml.safe_load((self.path / "config.yaml").read_text()))

    def load_log(self) -> PlatoonLog:
        return PlatoonLog.from_csv((self.path / "platoon_log.csv").read_text())

    def load_delays(self) -> dict[int, list[float]]:
        samples: dict[int, list[float]] = {}
        text = (self.path / "delays.jsonl").read_text()
        for line in text.splitlines():
            if not line.strip():
                continue
            rec = json.loads(line)
            samples.setdefault(int(rec["stage"]), []).append(float(rec["delay_ms"]))
        return samples

    def load_metrics(self) -> dict:
        return json.loads((self.path / "metrics.json").read_text())

    def load_snapshots(self) -> list[dict]:
        snaps = []
        for line in (self.path / "snapshots.jsonl").read_text().splitlines():
            if not line.strip():
                continue
            try:
                snaps.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise ArchiveError(f"corrupt snapshot line in {self.path}: {exc}") from exc
        return snaps


def read_archive(path: str | Path) -> RunArchive:
    path = Path(path)
    manifest_path = path / MANIFEST_NAME
    if not manifest_path.exists():
        raise ArchiveError(f"no manifest at {manifest_path}")
    try:
        manifest = json.loads(manifest_path.read_text())
    except json.JSONDecodeError as exc:
        raise ArchiveError(f"corrupt manifest: {exc}") from exc
    return RunArchive(path=path, manifest=manifest)


def verify_archive(archive: RunArchive) -> list[str]:
    """Names of files whose content no longer matches the manifest hash."""
    mismatched = []
    for name, digest in archive.manifest["files"].items():
        fpath = archive.path / name
        if not fpath.exists() or _sha256(fpath.read_bytes()) != digest:
            mismatched.append(name)
    return mismatched


def latency_report(
    delay_samples_ms: dict[int, list[float]], min_samples: int = MIN_REPORT_SAMPLES
) -> dict:
    """Per-stage sample size, mean, max, min, and p99, like the measurement table.

    Stages with fewer than min_samples samples are omitted and listed in the
    report's 'skipped' note.
    """
    stages: dict[int, dict] = {}
    skipped: list[int] = []
    for stage in sorted(delay_samples_ms):
        samples = delay_samples_ms[stage]
        if len(samples) < min_samples:
            skipped.append(stage)
            continue
        arr = np.asarray(samples, dtype=float)
        stages[stage] = {
            "sample_size": int(arr.size),
            "mean_ms": float(arr.mean()),
            "max_ms": float(arr.max()),
            "min_ms": float(arr.min()),
            "p99_ms": float(np.percentile(arr, 99)),
        }
    report: dict = {"stages": stages}
    if skipped:
        report["skipped"] = {
            "stages": skipped,
            "note": f"fewer than {min_samples} samples",
        }
    return report


def replay(
    archive: RunArchive, speed_factor: float = 1.0
) -> Iterator[tuple[float, dict]]:
    """Yield (wait_s, snapshot) pairs at recorded intervals scaled by 1/factor.

    The archive is validated up front: a truncated or corrupt snapshot log
    raises before anything is emitted.
    """
    if speed_factor <= 0 or not math.isfinite(speed_factor):
        raise ArchiveError(f"speed factor must be positive, got {speed_factor}")
    snapshots = archive.load_snapshots()
    for snap in snapshots:
        if "time_s" not in snap or "vehicles" not in snap:
            raise ArchiveError("snapshot record missing time_s/vehicles")
    times = [s["time_s"] for s in snapshots]
    if any(b <= a for a, b in zip(times, times[1:])):
        raise ArchiveError("snapshot timestamps are not strictly increasing")

    prev_t: float | None = None
    for snap in snapshots:
        wait = 0.0 if prev_t is None else (snap["time_s"] - prev_t) / speed_factor
        prev_t = snap["time_s"]
        yield wait, snap
