import hashlib
import json
import math
import os
import shutil
import subprocess
import sys

import pytest

from flightplots import (
    RunArtifacts,
    RunDataError,
    estimator_error_figure,
    response_figure,
    save_figure,
    topdown_figure,
)
from flightplots.cli import main

STACK_ROOT = os.path.abspath(os.path.join(os.path.dirname(__file__), "..", ".."))
CONFIG = os.path.join(STACK_ROOT, "configs", "default.yaml")
MISSION = os.path.join(STACK_ROOT, "missions", "three_waypoints.yaml")


@pytest.fixture(scope="session")
def run_dir(tmp_path_factory):
    """A full acceptance-style mission run produced via the stack's CLI."""
    out = tmp_path_factory.mktemp("plotdata") / "run"
    proc = subprocess.run(
        [
            sys.executable, "-m", "quadsil.cli", "sim-run",
            "--config", CONFIG, "--mission", MISSION, "--out", str(out),
        ],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
    return str(out)


def dir_digest(path):
    digest = {}
    for name in sorted(os.listdir(path)):
        with open(os.path.join(path, name), "rb") as fh:
            digest[name] = hashlib.sha256(fh.read()).hexdigest()
    return digest


class TestAcceptanceCriterion11:
    def test_all_three_figures_render(self, run_dir, tmp_path):
        run = RunArtifacts(run_dir)
        report = run.report()

        fig, top_stats = topdown_figure(run)
        save_figure(fig, str(tmp_path / "topdown.png"))
        fig, _ = response_figure(run)
        save_figure(fig, str(tmp_path / "response.png"))
        fig, err_stats = estimator_error_figure(run)
        save_figure(fig, str(tmp_path / "error.png"))
        for name in ("topdown.png", "response.png", "error.png"):
            assert (tmp_path / name).stat().st_size > 10_000, name

        # RMS annotations equal the run report to printed precision
        assert err_stats["annotations"][0] == f"RMS {report['est_rms_pos_m']:.3f} m"
        assert err_stats["annotations"][1] == f"RMS {report['est_rms_vel_mps']:.4f} m/s"
        assert err_stats["annotations"][2] == f"RMS {report['est_rms_att_deg']:.3f} deg"

        # top-down figure marks the three mission waypoints
        marks = {(round(n, 6), round(e, 6)) for _, n, e in top_stats["waypoints"]}
        assert marks == {(0.0, 0.0), (-20.0, 0.0), (-20.0, 20.0)}
        print(
            "\ncriterion 11 PASS: three figure types rendered; RMS annotations "
            f"match report ({err_stats['annotations']}); waypoints {sorted(marks)}"
        )

    def test_plotting_leaves_run_directory_untouched(self, run_dir, tmp_path):
        before = dir_digest(run_dir)
        run = RunArtifacts(run_dir)
        for builder in (topdown_figure, response_figure, estimator_error_figure):
            fig, _ = builder(run)
            save_figure(fig, str(tmp_path / "out.png"))
        assert dir_digest(run_dir) == before


class TestTopdown:
    def test_overlay_mode(self, run_dir, tmp_path):
        out = tmp_path / "overlay.png"
        rc = main(["topdown", run_dir, "--out", str(out), "--overlay", run_dir])
        assert rc == 0
        assert out.exists()

    def test_empty_trajectory_errors_without_file(self, run_dir, tmp_path):
        broken = tmp_path / "broken"
        shutil.copytree(run_dir, broken)
        est_file = broken / "estimate.csv"
        header = est_file.read_text().splitlines()[0]
        est_file.write_text(header + "\n")
        out = tmp_path / "never.png"
        rc = main(["topdown", str(broken), "--out", str(out)])
        assert rc == 1
        assert not out.exists()

    def test_missing_topic_is_named(self, run_dir, tmp_path, capsys):
        broken = tmp_path / "missing"
        shutil.copytree(run_dir, broken)
        manifest_path = broken / "manifest.json"
        manifest = json.loads(manifest_path.read_text())
        manifest["topics"].pop("estimate")
        manifest_path.write_text(json.dumps(manifest))
        rc = main(["topdown", str(broken), "--out", str(tmp_path / "x.png")])
        assert rc == 1
        assert "estimate" in capsys.readouterr().err


class TestResponse:
    def test_heading_holds_mission_value(self, run_dir):
        # the commanded heading stays at 130 deg through the mission
        run = RunArtifacts(run_dir)
        traj = run.topic("trajectory")
        headings = [math.degrees(v) for v in traj["psi"]]
        assert max(abs(h - 130.0) for h in headings) < 1.0

    def test_setpoint_only_log_warns(self, run_dir, tmp_path, capsys):
        broken = tmp_path / "noest"
        shutil.copytree(run_dir, broken)
        manifest_path = broken / "manifest.json"
        manifest = json.loads(manifest_path.read_text())
        manifest["topics"].pop("estimate")
        manifest_path.write_text(json.dumps(manifest))
        out = tmp_path / "resp.png"
        rc = main(["response", str(broken), "--out", str(out)])
        assert rc == 0
        assert out.exists()
        assert "setpoints only" in capsys.readouterr().err

    def test_time_axis_starts_at_first_sample(self, run_dir):
        run = RunArtifacts(run_dir)
        fig, stats = response_figure(run)
        t_first = min(run.topic("trajectory")["t"][0], run.topic("estimate")["t"][0])
        assert stats["t_first_sample"] == t_first
        assert fig.axes[3].get_xlim()[0] == t_first
        import matplotlib.pyplot as plt

        plt.close(fig)


class TestEstimatorError:
    def test_missing_truth_errors(self, run_dir, tmp_path):
        broken = tmp_path / "notruth"
        shutil.copytree(run_dir, broken)
        manifest_path = broken / "manifest.json"
        manifest = json.loads(manifest_path.read_text())
        manifest["topics"].pop("truth")
        manifest_path.write_text(json.dumps(manifest))
        with pytest.raises(RunDataError):
            estimator_error_figure(RunArtifacts(str(broken)))

    def test_units_labeled(self, run_dir):
        run = RunArtifacts(run_dir)
        fig, _ = estimator_error_figure(run)
        labels = [ax.get_ylabel() for ax in fig.axes]
        assert labels == ["position error, m", "velocity error, m/s", "attitude error, deg"]
        import matplotlib.pyplot as plt

        plt.close(fig)

    def test_zero_noise_run_near_zero_errors(self, tmp_path):
        import yaml

        cfg_path = tmp_path / "quiet.yaml"
        cfg_path.write_text(yaml.safe_dump({
            "duration": 12.0,
            "sensors": {
                "accel_sigma": 0.0, "gyro_sigma": 0.0, "baro_sigma": 0.0,
                "mag_sigma": 0.0, "gnss_pos_sigma": 0.0, "gnss_vel_sigma": 0.0,
                "gnss_alt_sigma": 0.0, "gyro_bias": [0.0, 0.0, 0.0],
            },
        }))
        out = tmp_path / "quietrun"
        proc = subprocess.run(
            [sys.executable, "-m", "quadsil.cli", "sim-run", "--config", str(cfg_path),
             "--mission", MISSION, "--out", str(out)],
            capture_output=True, text=True,
        )
        assert proc.returncode in (0, 2), proc.stderr  # duration-capped is fine
        run = RunArtifacts(str(out))
        fig, stats = estimator_error_figure(run)
        assert stats["est_rms_pos_m"] < 0.05
        assert stats["est_rms_att_deg"] < 0.05
        import matplotlib.pyplot as plt

        plt.close(fig)
