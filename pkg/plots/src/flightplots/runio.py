"""Read-only access to recorded run directories.

A run directory holds manifest.json, one CSV per topic (time column
first, shortest round-trip float cells), report.json/report.txt, and
copies of the scenario config and mission. This module never writes
into a run directory.
"""
from __future__ import annotations

import json
import math
import os

import numpy as np
import yaml

EARTH_RADIUS = 6378137.0  # m, spherical model matching the recorder


class RunDataError(RuntimeError):
    """Missing or unusable topic/file in a run directory."""


class RunArtifacts:
    """Lazy view over one run directory."""

    def __init__(self, run_dir: str):
        self.run_dir = run_dir
        manifest_path = os.path.join(run_dir, "manifest.json")
        if not os.path.exists(manifest_path):
            raise RunDataError(f"no manifest.json in {run_dir}")
        with open(manifest_path) as fh:
            self.manifest = json.load(fh)
        self._cache: dict[str, dict[str, np.ndarray]] = {}
        for name, entry in self.manifest.get("topics", {}).items():
            if not os.path.exists(os.path.join(run_dir, entry["file"])):
                raise RunDataError(f"manifest topic {name} has no file {entry['file']}")

    def has_topic(self, name: str) -> bool:
        return name in self.manifest.get("topics", {})

    def topic(self, name: str) -> dict[str, np.ndarray]:
        """Columns of one topic as named float arrays ('t' plus data columns)."""
        if name in self._cache:
            return self._cache[name]
        entry = self.manifest.get("topics", {}).get(name)
        if entry is None:
            raise RunDataError(f"topic {name} not recorded in {self.run_dir}")
        path = os.path.join(self.run_dir, entry["file"])
        with open(path) as fh:
            header = fh.readline().strip().split(",")
            rows = [line.strip().split(",") for line in fh if line.strip()]
        data = {
            col: np.array([float(row[i]) for row in rows]) for i, col in enumerate(header)
        }
        self._cache[name] = data
        return data

    def report(self) -> dict:
        path = os.path.join(self.run_dir, "report.json")
        if not os.path.exists(path):
            raise RunDataError(f"no report.json in {self.run_dir}")
        with open(path) as fh:
            return json.load(fh)

    def waypoints(self) -> list[dict]:
        """Mission waypoints in NED meters with headings in degrees.

        Geodetic entries are converted against the origin recorded in the
        run's config copy using the same spherical-earth formulas the
        stack applies at mission load time.
        """
        mission_path = os.path.join(self.run_dir, "mission.yaml")
        if not os.path.exists(mission_path):
            raise RunDataError(f"no mission.yaml in {self.run_dir}")
        with open(mission_path) as fh:
            mission = yaml.safe_load(fh)
        out = []
        origin = None
        for entry in mission.get("waypoints", []):
            if {"north", "east", "down"} <= set(entry):
                ned = (float(entry["north"]), float(entry["east"]), float(entry["down"]))
            else:
                if origin is None:
                    origin = self._origin_radians()
                lat = math.radians(float(entry["lat_deg"]))
                lon = math.radians(float(entry["lon_deg"]))
                p_n = (lat - origin[0]) * EARTH_RADIUS
                p_e = (lon - origin[1]) * EARTH_RADIUS * math.cos(lat)
                ned = (p_n, p_e, origin[2] - float(entry["alt_m"]))
            out.append({"ned": ned, "heading_deg": float(entry["heading_deg"])})
        if not out:
            raise RunDataError("mission.yaml has no waypoints")
        return out

    def _origin_radians(self) -> tuple[float, float, float]:
        config_path = os.path.join(self.run_dir, "config.yaml")
        if not os.path.exists(config_path):
            raise RunDataError("geodetic waypoints need the run's config.yaml for the origin")
        with open(config_path) as fh:
            cfg = yaml.safe_load(fh)
        origin = cfg["origin"]
        return (
            math.radians(origin["lat_deg"]),
            math.radians(origin["lon_deg"]),
            float(origin["alt_m"]),
        )


def wrap_angle(a: float) -> float:
    r = math.remainder(a, 2.0 * math.pi)
    if r <= -math.pi:
        r = math.pi
    return r


def mission_window(run: RunArtifacts) -> tuple[float, float]:
    """Time span the run report's statistics cover: manager start to
    mission completion (or end of log)."""
    traj = run.topic("trajectory")
    if traj["t"].size == 0:
        raise RunDataError("trajectory topic is empty")
    t_start = float(traj["t"][0])
    t_end = float(traj["t"][-1])
    if run.has_topic("mission"):
        mission = run.topic("mission")
        done = mission["t"][mission["complete"] > 0]
        if done.size:
            t_end = float(done[0])
    return t_start, t_end


def estimator_error_series(run: RunArtifacts):
    """Estimate-minus-truth error series over the mission window.

    Returns (t, position error Nx3, velocity error Nx3, attitude error
    Nx3 in degrees), matched on exact shared timestamps like the run
    report, so recomputed statistics equal the reported ones.
    """
    if not run.has_topic("truth"):
        raise RunDataError("truth topic not recorded; estimator errors unavailable")
    est = run.topic("estimate")
    tru = run.topic("truth")
    t_start, t_end = mission_window(run)
    truth_index = {t: i for i, t in enumerate(tru["t"])}
    ts, pos, vel, att = [], [], [], []
    for i, t in enumerate(est["t"]):
        if t < t_start or t > t_end:
            continue
        j = truth_index.get(t)
        if j is None:
            continue
        ts.append(t)
        pos.append([est[c][i] - tru[c][j] for c in ("pn", "pe", "pd")])
        vel.append([est[c][i] - tru[c][j] for c in ("u", "v", "w")])
        att.append(
            [math.degrees(wrap_angle(est[c][i] - tru[c][j])) for c in ("phi", "theta", "psi")]
        )
    if not ts:
        raise RunDataError("no overlapping estimate/truth samples in the mission window")
    return np.array(ts), np.array(pos), np.array(vel), np.array(att)


def rms_norm(rows: np.ndarray) -> float:
    return float(np.sqrt(np.mean(np.sum(rows * rows, axis=1))))
