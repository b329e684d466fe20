"""Run summaries: tracking RMSE, estimator error statistics, waypoint arrivals.

The summary is a flat key/value dict written both as JSON (machine
consumption) and as readable text. Every number is computed from the
topic histories; nothing in here depends on wall time, so reports from
equal-seed runs are identical.
"""
from __future__ import annotations

import json
import math
import os

import numpy as np

from .geometry import wrap_angle


def _index_by_stamp(history):
    return {stamp: payload for stamp, payload in history}


def _nearest(history, stamp, tolerance=0.05):
    """Payload with the closest stamp within tolerance, else None."""
    best = None
    best_dt = tolerance
    lo, hi = 0, len(history) - 1
    while lo <= hi:
        mid = (lo + hi) // 2
        if history[mid][0] < stamp:
            lo = mid + 1
        else:
            hi = mid - 1
    for idx in (lo - 1, lo):
        if 0 <= idx < len(history):
            dt = abs(history[idx][0] - stamp)
            if dt <= best_dt:
                best = history[idx][1]
                best_dt = dt
    return best


def _rms(values) -> float:
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        return float("nan")
    return float(np.sqrt(np.mean(arr * arr)))


def path_tracking_errors(estimates, trajectory, t_start, t_end):
    """Per-axis estimated-position error vs the commanded path."""
    est_by_stamp = _index_by_stamp(estimates)
    errors = []
    for stamp, sp in trajectory:
        if stamp < t_start or stamp > t_end:
            continue
        est = est_by_stamp.get(stamp)
        if est is None:
            continue
        errors.append(est.position - sp.position)
    return np.array(errors) if errors else np.empty((0, 3))


def estimator_errors(estimates, truth, t_start, t_end):
    """Position, velocity, attitude error rows between estimate and truth."""
    truth_by_stamp = _index_by_stamp(truth)
    pos, vel, att = [], [], []
    for stamp, est in estimates:
        if stamp < t_start or stamp > t_end:
            continue
        tru = truth_by_stamp.get(stamp)
        if tru is None:
            continue
        pos.append(est.position - tru.position)
        vel.append(est.velocity - tru.velocity)
        att.append([wrap_angle(a - b) for a, b in zip(est.attitude, tru.attitude)])
    shape = lambda rows: np.array(rows) if rows else np.empty((0, 3))
    return shape(pos), shape(vel), shape(att)


def summarize(bus, full_plan, run_report) -> dict:
    """Flat summary of a mission run from in-memory topic histories."""
    estimates = bus.history("estimate")
    truth = bus.history("truth")
    trajectory = bus.history("trajectory")
    mission = bus.history("mission")

    out = {
        "status": run_report.status,
        "t_end": run_report.t_end,
        "mission_complete": int(run_report.mission_complete),
    }
    for topic, count in sorted(run_report.counts.items()):
        out[f"count_{topic}"] = count

    t_mission_start = trajectory[0][0] if trajectory else float("nan")
    t_complete = float("nan")
    for stamp, status in mission:
        if status.complete:
            t_complete = stamp
            break
    out["t_mission_start"] = t_mission_start
    out["t_mission_complete"] = t_complete

    window_end = t_complete if math.isfinite(t_complete) else run_report.t_end
    n_legs = len(full_plan.waypoints) - 1

    # takeoff waypoint is plan index 0; user waypoints are 1..n_legs
    traj_stamps = [(stamp, sp.leg) for stamp, sp in trajectory]
    worst_miss = 0.0
    for k in range(1, n_legs + 1):
        arrival = float("nan")
        for stamp, leg in traj_stamps:
            if leg >= k:
                arrival = stamp
                break
        wp = full_plan.waypoints[k]
        miss_est = float("nan")
        miss_truth = float("nan")
        if math.isfinite(arrival):
            est = _nearest(estimates, arrival)
            tru = _nearest(truth, arrival)
            if est is not None:
                miss_est = float(np.linalg.norm(est.position - wp.position))
            if tru is not None:
                miss_truth = float(np.linalg.norm(tru.position - wp.position))
        out[f"wp{k}_arrival_t"] = arrival
        out[f"wp{k}_miss_est_m"] = miss_est
        out[f"wp{k}_miss_truth_m"] = miss_truth
        if math.isfinite(miss_est):
            worst_miss = max(worst_miss, miss_est)
    out["n_waypoints"] = n_legs
    out["worst_waypoint_miss_m"] = worst_miss if n_legs else float("nan")

    if trajectory and math.isfinite(t_mission_start):
        errors = path_tracking_errors(estimates, trajectory, t_mission_start, window_end)
        if errors.size:
            rms_axes = [_rms(errors[:, i]) for i in range(3)]
            out["rmse_path_x_m"] = rms_axes[0]
            out["rmse_path_y_m"] = rms_axes[1]
            out["rmse_path_z_m"] = rms_axes[2]
            out["rmse_path_total_m"] = float(math.sqrt(sum(v * v for v in rms_axes)))

    pos, vel, att = estimator_errors(estimates, truth, t_mission_start, window_end)
    if pos.size:
        att_deg = np.degrees(att)
        out["est_rms_pos_m"] = float(np.sqrt(np.mean(np.sum(pos * pos, axis=1))))
        out["est_rms_vel_mps"] = float(np.sqrt(np.mean(np.sum(vel * vel, axis=1))))
        out["est_rms_att_deg"] = float(np.sqrt(np.mean(np.sum(att_deg * att_deg, axis=1))))
    return out


def write_report(summary: dict, out_dir: str) -> None:
    with open(os.path.join(out_dir, "report.json"), "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    lines = ["mission run summary", "==================="]
    for key in sorted(summary):
        value = summary[key]
        if isinstance(value, float):
            lines.append(f"{key:28s} {value:.6g}")
        else:
            lines.append(f"{key:28s} {value}")
    with open(os.path.join(out_dir, "report.txt"), "w") as fh:
        fh.write("\n".join(lines) + "\n")
