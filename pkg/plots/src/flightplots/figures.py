"""The three figure builders: top-down track, setpoint response, estimator error.

Each builder returns (matplotlib Figure, stats dict). Stats carry every
number that appears on the figure so tests can check them against the
run report without scraping rendered text. Builders never mutate the
run directory.
"""
from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .runio import (
    RunArtifacts,
    RunDataError,
    estimator_error_series,
    mission_window,
    rms_norm,
)


def topdown_figure(run: RunArtifacts, overlay: RunArtifacts | None = None):
    """North-East ground track with waypoint markers and the ideal path."""
    est = run.topic("estimate")
    if est["t"].size == 0:
        raise RunDataError("estimate topic is empty")
    waypoints = run.waypoints()

    fig, ax = plt.subplots(figsize=(6.5, 6.0))
    ax.plot(est["pe"], est["pn"], color="tab:blue", lw=1.2, label="estimated track")
    if overlay is not None:
        other = overlay.topic("estimate")
        ax.plot(other["pe"], other["pn"], color="tab:orange", lw=1.2, alpha=0.8,
                label="overlay track")
    ideal_n = [wp["ned"][0] for wp in waypoints]
    ideal_e = [wp["ned"][1] for wp in waypoints]
    ax.plot(ideal_e, ideal_n, "k--", lw=1.0, label="ideal path")
    marker_labels = []
    for k, wp in enumerate(waypoints, start=1):
        n, e, _ = wp["ned"]
        ax.plot(e, n, "rs", ms=8, mfc="none", mew=1.6)
        ax.annotate(f"w{k}", (e, n), textcoords="offset points", xytext=(8, 6))
        marker_labels.append((f"w{k}", n, e))
    ax.set_xlabel("east, m")
    ax.set_ylabel("north, m")
    ax.set_aspect("equal", adjustable="datalim")
    ax.grid(alpha=0.3)
    ax.legend(loc="best", fontsize=9)
    ax.set_title("top-down ground track")
    fig.tight_layout()
    stats = {"waypoints": marker_labels, "n_track_points": int(est["t"].size)}
    return fig, stats


def response_figure(run: RunArtifacts):
    """Stacked north/east/down/heading responses against their setpoints."""
    traj = run.topic("trajectory")
    if traj["t"].size == 0:
        raise RunDataError("trajectory topic is empty")
    have_estimate = run.has_topic("estimate") and run.topic("estimate")["t"].size > 0

    fig, axes = plt.subplots(4, 1, figsize=(7.5, 8.5), sharex=True)
    channels = [("pn", "north, m"), ("pe", "east, m"), ("pd", "down, m")]
    t0 = float(traj["t"][0])
    warning = None
    for ax, (col, label) in zip(axes[:3], channels):
        ax.plot(traj["t"], traj[col], "k--", lw=1.0, label="setpoint")
        if have_estimate:
            est = run.topic("estimate")
            ax.plot(est["t"], est[col], color="tab:blue", lw=1.0, label="response")
        ax.set_ylabel(label)
        ax.grid(alpha=0.3)
    axes[3].plot(traj["t"], np.degrees(traj["psi"]), "k--", lw=1.0, label="setpoint")
    if have_estimate:
        est = run.topic("estimate")
        axes[3].plot(est["t"], np.degrees(est["psi"]), color="tab:blue", lw=1.0,
                     label="response")
        t0 = min(t0, float(est["t"][0]))
    else:
        warning = "estimate topic absent: rendering setpoints only"
    axes[3].set_ylabel("heading, deg")
    axes[3].set_xlabel("time, s")
    axes[3].grid(alpha=0.3)
    axes[0].legend(loc="best", fontsize=9)
    axes[0].set_title("position and heading response")
    axes[3].set_xlim(left=t0)
    fig.tight_layout()
    stats = {"t_first_sample": t0, "warning": warning}
    return fig, stats


def estimator_error_figure(run: RunArtifacts):
    """Per-axis estimate-minus-truth errors with RMS annotations.

    The annotated RMS values are recomputed from the logs over the same
    samples the run report used, so they match report.json to printed
    precision.
    """
    ts, pos, vel, att = estimator_error_series(run)
    rms_pos = rms_norm(pos)
    rms_vel = rms_norm(vel)
    rms_att = rms_norm(att)

    fig, axes = plt.subplots(3, 1, figsize=(7.5, 7.5), sharex=True)
    specs = [
        (pos, ["north", "east", "down"], "position error, m", f"RMS {rms_pos:.3f} m"),
        (vel, ["u", "v", "w"], "velocity error, m/s", f"RMS {rms_vel:.4f} m/s"),
        (att, ["roll", "pitch", "yaw"], "attitude error, deg", f"RMS {rms_att:.3f} deg"),
    ]
    for ax, (rows, names, ylabel, note) in zip(axes, specs):
        for i, name in enumerate(names):
            ax.plot(ts, rows[:, i], lw=0.9, label=name)
        ax.set_ylabel(ylabel)
        ax.grid(alpha=0.3)
        ax.legend(loc="upper right", fontsize=8, ncol=3)
        ax.annotate(note, xy=(0.02, 0.04), xycoords="axes fraction", fontsize=9,
                    bbox={"boxstyle": "round", "fc": "white", "alpha": 0.8})
    axes[0].set_title("estimator error vs truth")
    axes[2].set_xlabel("time, s")
    fig.tight_layout()
    stats = {
        "est_rms_pos_m": rms_pos,
        "est_rms_vel_mps": rms_vel,
        "est_rms_att_deg": rms_att,
        "annotations": [spec[3] for spec in specs],
        "window": mission_window(run),
    }
    return fig, stats


def save_figure(fig, out_path: str) -> None:
    fig.savefig(out_path, dpi=130)
    plt.close(fig)
