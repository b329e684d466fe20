import json
import os

import pytest
import yaml

from quadsil.cli import main

CONFIG = "configs/default.yaml"


@pytest.fixture()
def short_mission(tmp_path):
    # One hover waypoint right above the takeoff point: completes quickly.
    path = tmp_path / "hover.yaml"
    path.write_text(
        "v_max: 2.0\n"
        "waypoints:\n"
        "  - {north: 0.0, east: 0.0, down: -4.0, heading_deg: 45.0}\n"
    )
    return str(path)


@pytest.fixture()
def short_config(tmp_path):
    cfg = {"duration": 25.0}
    path = tmp_path / "config.yaml"
    path.write_text(yaml.safe_dump(cfg))
    return str(path)


class TestValidate:
    def test_default_config_is_valid(self):
        assert main(["validate", "--config", CONFIG]) == 0

    def test_default_config_with_missions(self):
        assert main(["validate", "--config", CONFIG,
                     "--mission", "missions/three_waypoints.yaml"]) == 0
        assert main(["validate", "--config", CONFIG,
                     "--mission", "missions/three_waypoints_lla.yaml"]) == 0

    def test_bad_mass_names_field(self, tmp_path, capsys):
        path = tmp_path / "bad.yaml"
        path.write_text("vehicle: {mass: -2.0}\n")
        assert main(["validate", "--config", str(path)]) == 1
        assert "vehicle.mass" in capsys.readouterr().err

    def test_nonfinite_waypoint_rejected(self, tmp_path, capsys):
        mission = tmp_path / "bad_mission.yaml"
        mission.write_text(
            "v_max: 3.0\nwaypoints:\n  - {north: .nan, east: 0, down: -5, heading_deg: 0}\n"
        )
        assert main(["validate", "--config", CONFIG, "--mission", str(mission)]) == 1
        assert "waypoints[0]" in capsys.readouterr().err

    def test_missing_config_file(self, capsys):
        assert main(["validate", "--config", "/nowhere/nothing.yaml"]) == 1
        assert "/nowhere/nothing.yaml" in capsys.readouterr().err


class TestSimRun:
    def test_missing_mission_exits_1(self, tmp_path, capsys):
        rc = main([
            "sim-run", "--config", CONFIG, "--mission", "/nowhere/mission.yaml",
            "--out", str(tmp_path / "out"),
        ])
        assert rc == 1
        assert "/nowhere/mission.yaml" in capsys.readouterr().err

    def test_short_mission_completes(self, tmp_path, short_config, short_mission):
        out = tmp_path / "run"
        rc = main([
            "sim-run", "--config", short_config, "--mission", short_mission,
            "--out", str(out), "--seed", "5",
        ])
        assert rc == 0
        for name in ("manifest.json", "report.json", "report.txt", "config.yaml",
                     "mission.yaml", "imu.csv", "estimate.csv", "truth.csv"):
            assert (out / name).exists(), name
        report = json.loads((out / "report.json").read_text())
        assert report["mission_complete"] == 1
        assert report["wp1_miss_est_m"] <= 0.5

    def test_seeded_runs_identical_reports(self, tmp_path, short_config, short_mission):
        reports = []
        for name in ("a", "b"):
            out = tmp_path / name
            rc = main([
                "sim-run", "--config", short_config, "--mission", short_mission,
                "--out", str(out), "--seed", "9",
            ])
            assert rc == 0
            reports.append((out / "report.json").read_bytes())
        assert reports[0] == reports[1]

    def test_timeout_exits_2(self, tmp_path, short_config, short_mission):
        rc = main([
            "sim-run", "--config", short_config, "--mission", short_mission,
            "--out", str(tmp_path / "run"), "--duration", "2.0",
        ])
        assert rc == 2


class TestReplayCli:
    @pytest.fixture()
    def run_dir(self, tmp_path, short_config, short_mission):
        out = tmp_path / "live"
        rc = main([
            "sim-run", "--config", short_config, "--mission", short_mission,
            "--out", str(out), "--seed", "13",
        ])
        assert rc == 0
        return out

    def test_replay_reproduces_live_estimates(self, tmp_path, short_config, run_dir):
        replay_dir = tmp_path / "replay"
        rc = main([
            "replay-estimator", "--log", str(run_dir), "--config", short_config,
            "--out", str(replay_dir),
        ])
        assert rc == 0
        assert (run_dir / "estimate.csv").read_bytes() == (replay_dir / "estimate.csv").read_bytes()
        stats = json.loads((replay_dir / "replay_report.json").read_text())
        assert stats["truth_stats_available"] == 1

    def test_replay_without_truth_flags_unavailable(self, tmp_path, short_config, run_dir, capsys):
        manifest_path = run_dir / "manifest.json"
        manifest = json.loads(manifest_path.read_text())
        manifest["topics"].pop("truth")
        manifest_path.write_text(json.dumps(manifest))
        os.remove(run_dir / "truth.csv")
        rc = main([
            "replay-estimator", "--log", str(run_dir), "--config", short_config,
            "--out", str(tmp_path / "replay"),
        ])
        assert rc == 0
        assert "unavailable" in capsys.readouterr().out

    def test_replay_corrupt_row_exits_1(self, tmp_path, short_config, run_dir, capsys):
        path = run_dir / "gnss.csv"
        lines = path.read_text().splitlines()
        lines[2] = "bad,row,here"
        path.write_text("\n".join(lines) + "\n")
        rc = main([
            "replay-estimator", "--log", str(run_dir), "--config", short_config,
            "--out", str(tmp_path / "replay"),
        ])
        assert rc == 1
        assert "row 3" in capsys.readouterr().err

    def test_replay_schema_mismatch_exits_1(self, tmp_path, short_config, run_dir):
        manifest_path = run_dir / "manifest.json"
        text = manifest_path.read_text().replace('"schema_version": 1', '"schema_version": 7')
        manifest_path.write_text(text)
        rc = main([
            "replay-estimator", "--log", str(run_dir), "--config", short_config,
            "--out", str(tmp_path / "replay"),
        ])
        assert rc == 1

    def test_differently_tuned_replay_differs_with_same_stamps(self, tmp_path, run_dir):
        retuned = tmp_path / "retuned.yaml"
        retuned.write_text(
            "duration: 25.0\n"
            "estimator:\n"
            "  q_diag: [0.8, 0.8, 0.8, 5.0, 5.0, 5.0, 0.002, 0.002, 0.002, 0.0008, 0.0008, 0.0008]\n"
        )
        replay_dir = tmp_path / "replay_retuned"
        rc = main([
            "replay-estimator", "--log", str(run_dir), "--config", str(retuned),
            "--out", str(replay_dir),
        ])
        assert rc == 0
        live = (run_dir / "estimate.csv").read_text().splitlines()
        other = (replay_dir / "estimate.csv").read_text().splitlines()
        assert len(live) == len(other)
        live_stamps = [row.split(",")[0] for row in live[1:]]
        other_stamps = [row.split(",")[0] for row in other[1:]]
        assert live_stamps == other_stamps  # timestamps preserved
        assert live != other  # estimates changed with the tuning


class TestRunDirReproducibility:
    def test_run_dir_reproduces_itself(self, tmp_path, short_mission):
        # A run directory's config + mission copies rerun to the same bytes.
        cfg = tmp_path / "cfg.yaml"
        cfg.write_text("duration: 6.0\n")
        first = tmp_path / "first"
        assert main(["sim-run", "--config", str(cfg), "--mission", short_mission,
                     "--out", str(first), "--seed", "21"]) == 2  # duration-capped
        second = tmp_path / "second"
        assert main(["sim-run", "--config", str(first / "config.yaml"),
                     "--mission", str(first / "mission.yaml"),
                     "--out", str(second)]) == 2
        for name in ("imu.csv", "estimate.csv", "truth.csv", "report.json"):
            assert (first / name).read_bytes() == (second / name).read_bytes(), name
