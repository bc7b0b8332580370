import json
import random

import pytest

from twinbed.archive import (
    latency_report,
    read_archive,
    replay,
    verify_archive,
    write_archive,
)
from twinbed.config import TwinConfig
from twinbed.errors import ArchiveError
from twinbed.latency import TABLE_DEFAULTS, LatencyModel
from twinbed.scenario import run_experiment


@pytest.fixture(scope="module")
def run_result():
    cfg = TwinConfig.from_dict({"scenario": {"duration_s": 10.0, "seed": 5}})
    return run_experiment(cfg)


@pytest.fixture
def archive_dir(tmp_path, run_result):
    out = tmp_path / "archive"
    write_archive(run_result, out)
    return out


class TestWriteRead:
    def test_manifest_lists_all_files(self, archive_dir):
        archive = read_archive(archive_dir)
        expected = {
            "config.yaml", "platoon_log.csv", "observations.csv",
            "ground_truth.csv", "controller_log.csv", "cyber_states.csv",
            "delays.jsonl", "dead_letters.jsonl", "snapshots.jsonl",
            "metrics.json",
        }
        assert set(archive.manifest["files"]) == expected
        assert verify_archive(archive) == []

    def test_controller_and_cyber_logs_populated(self, archive_dir, run_result):
        controller = (archive_dir / "controller_log.csv").read_text().splitlines()
        cyber = (archive_dir / "cyber_states.csv").read_text().splitlines()
        # 4 platoon followers at 8 Hz for 10 s, minus estimator warm-up ticks
        assert len(controller) - 1 > 4 * 8 * 8
        assert len(cyber) - 1 == 5 * 80  # 5 cyber records per 8 Hz log tick
        assert controller[0].startswith("time_s,vehicle_id,spacing_err_m")
        assert {ln.split(",")[2] for ln in cyber[1:]} == {"mapping", "cloud"}

    def test_roundtrip_log(self, archive_dir, run_result):
        archive = read_archive(archive_dir)
        log = archive.load_log()
        assert log.formation == run_result.log.formation
        assert log.to_csv() == run_result.log.to_csv()

    def test_roundtrip_config_and_seed(self, archive_dir, run_result):
        archive = read_archive(archive_dir)
        assert archive.seed == 5
        cfg = archive.load_config()
        assert cfg.scenario.duration_s == 10.0

    def test_manifest_stable_across_identical_runs(self, tmp_path):
        cfg = {"scenario": {"duration_s": 5.0, "seed": 9}}
        m1 = write_archive(run_experiment(TwinConfig.from_dict(cfg)), tmp_path / "a")
        m2 = write_archive(run_experiment(TwinConfig.from_dict(cfg)), tmp_path / "b")
        assert m1 == m2

    def test_empty_run_archive(self, tmp_path):
        cfg = TwinConfig.from_dict(
            {"scenario": {"formation": [], "duration_s": 1.0, "seed": 2}}
        )
        manifest = write_archive(run_experiment(cfg), tmp_path / "empty")
        assert manifest["seed"] == 2
        archive = read_archive(tmp_path / "empty")
        assert verify_archive(archive) == []
        assert archive.load_log().rows == []
        assert archive.load_config().scenario.formation == []

    def test_tamper_detected(self, archive_dir):
        (archive_dir / "platoon_log.csv").write_text("tampered\n")
        archive = read_archive(archive_dir)
        assert verify_archive(archive) == ["platoon_log.csv"]

    def test_missing_manifest(self, tmp_path):
        with pytest.raises(ArchiveError):
            read_archive(tmp_path / "nothing")

    def test_delays_roundtrip_report_identical(self, archive_dir, run_result):
        archive = read_archive(archive_dir)
        on_disk = latency_report(archive.load_delays())
        in_memory = latency_report(run_result.delay_samples_ms)
        assert on_disk == in_memory


class TestLatencyReport:
    def test_columns_and_fidelity(self):
        model = LatencyModel.table_defaults()
        rng = random.Random(31)
        samples = {
            stage: [model.sample_ms(stage, rng) for _ in range(5000)]
            for stage in range(1, 6)
        }
        report = latency_report(samples)
        for stage in range(1, 6):
            stats = report["stages"][stage]
            assert set(stats) == {"sample_size", "mean_ms", "max_ms", "min_ms", "p99_ms"}
            assert stats["sample_size"] == 5000
            mean, mx, mn, _ = TABLE_DEFAULTS[stage]
            assert abs(stats["mean_ms"] - mean) <= 0.10 * mean
            assert stats["min_ms"] >= mn and stats["max_ms"] <= mx

    def test_insufficient_samples_omitted_with_note(self):
        report = latency_report({1: [10.0] * 99, 2: [5.0] * 150})
        assert 1 not in report["stages"]
        assert 2 in report["stages"]
        assert report["skipped"]["stages"] == [1]

    def test_zeroed_stats(self):
        report = latency_report({1: [0.0] * 200})
        stats = report["stages"][1]
        assert stats["mean_ms"] == 0.0 and stats["max_ms"] == 0.0


class TestReplay:
    def test_intervals_match_recording(self, archive_dir):
        archive = read_archive(archive_dir)
        events = list(replay(archive, speed_factor=1.0))
        assert events[0][0] == 0.0
        recorded = [s["time_s"] for _, s in events]
        for (wait, _), t0, t1 in zip(events[1:], recorded, recorded[1:]):
            assert wait == pytest.approx(t1 - t0, abs=1e-3)

    def test_double_speed_halves_intervals(self, archive_dir):
        archive = read_archive(archive_dir)
        normal = list(replay(archive, speed_factor=1.0))
        double = list(replay(archive, speed_factor=2.0))
        for (w1, _), (w2, _) in zip(normal[1:], double[1:]):
            assert w2 == pytest.approx(w1 / 2.0)

    def test_snapshots_strictly_ordered(self, archive_dir):
        archive = read_archive(archive_dir)
        times = [s["time_s"] for _, s in replay(archive, 1.0)]
        assert all(b > a for a, b in zip(times, times[1:]))

    def test_truncated_archive_fails_before_emission(self, archive_dir):
        path = archive_dir / "snapshots.jsonl"
        text = path.read_text()
        path.write_text(text[: len(text) // 2])  # cut mid-record
        archive = read_archive(archive_dir)
        with pytest.raises(ArchiveError):
            list(replay(archive, 1.0))

    def test_bad_speed_factor(self, archive_dir):
        archive = read_archive(archive_dir)
        with pytest.raises(ArchiveError):
            list(replay(archive, 0.0))

    def test_unwritable_dir(self, run_result):
        with pytest.raises(ArchiveError):
            write_archive(run_result, "/proc/definitely/not/writable")
