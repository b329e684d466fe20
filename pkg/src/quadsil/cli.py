"""Command-line entry points: sim-run, replay-estimator, validate.

Exit codes: 0 success / mission complete, 1 configuration or user error,
2 runtime failsafe (including missions that time out before completing).
"""
from __future__ import annotations

import argparse
import os
import sys
import time

from .config import ConfigError, load_config, load_mission
from .replay import replay_estimator
from .runtime import CorruptLog, SchemaMismatch
from .stack import run_scenario


def _fail(message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return 1


def cmd_sim_run(args) -> int:
    for path, label in ((args.config, "config"), (args.mission, "mission")):
        if not os.path.exists(path):
            return _fail(f"{label} file not found: {path}")
    try:
        cfg = load_config(args.config)
        plan = load_mission(args.mission, cfg)
    except ConfigError as exc:
        for problem in exc.problems:
            print(f"error: {problem}", file=sys.stderr)
        return 1
    started = time.perf_counter()
    report, summary, _ = run_scenario(
        cfg,
        plan,
        out_dir=args.out,
        seed=args.seed,
        duration=args.duration,
        mission_path=args.mission,
    )
    wall = time.perf_counter() - started
    print(f"status: {report.status}  (sim {report.t_end:.2f} s, wall {wall:.2f} s)")
    for key in ("rmse_path_total_m", "est_rms_pos_m", "est_rms_vel_mps", "est_rms_att_deg"):
        if key in summary:
            print(f"{key}: {summary[key]:.4f}")
    if report.status == "completed":
        return 0
    if report.fault:
        print(f"fault: {report.fault}", file=sys.stderr)
    return 2


def cmd_replay(args) -> int:
    for path, label in ((args.config, "config"), (args.log, "log directory")):
        if not os.path.exists(path):
            return _fail(f"{label} not found: {path}")
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        for problem in exc.problems:
            print(f"error: {problem}", file=sys.stderr)
        return 1
    try:
        stats = replay_estimator(args.log, cfg, out_dir=args.out)
    except SchemaMismatch as exc:
        return _fail(str(exc))
    except CorruptLog as exc:
        return _fail(str(exc))
    print(f"replayed {stats['replayed_messages']} messages -> {stats['estimates']} estimates")
    if stats["truth_stats_available"]:
        print(
            f"est_rms_pos_m: {stats['est_rms_pos_m']:.4f}  "
            f"est_rms_vel_mps: {stats['est_rms_vel_mps']:.4f}  "
            f"est_rms_att_deg: {stats['est_rms_att_deg']:.4f}"
        )
    else:
        print("truth topic absent: error statistics unavailable")
    return 0


def cmd_validate(args) -> int:
    if not os.path.exists(args.config):
        return _fail(f"config file not found: {args.config}")
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        for problem in exc.problems:
            print(f"error: {problem}", file=sys.stderr)
        return 1
    if args.mission is not None:
        if not os.path.exists(args.mission):
            return _fail(f"mission file not found: {args.mission}")
        try:
            load_mission(args.mission, cfg)
        except ConfigError as exc:
            for problem in exc.problems:
                print(f"error: {problem}", file=sys.stderr)
            return 1
    print("configuration valid")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="quadsil",
        description="software-in-the-loop multirotor autonomy stack",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("sim-run", help="run a waypoint mission in the closed-loop sim")
    run_p.add_argument("--config", required=True, help="scenario YAML")
    run_p.add_argument("--mission", required=True, help="mission YAML")
    run_p.add_argument("--out", required=True, help="run directory to write")
    run_p.add_argument("--seed", type=int, default=None, help="override the config seed")
    run_p.add_argument("--duration", type=float, default=None, help="override duration cap, s")
    run_p.set_defaults(func=cmd_sim_run)

    rep_p = sub.add_parser("replay-estimator", help="re-run the estimator over recorded logs")
    rep_p.add_argument("--log", required=True, help="recorded run directory")
    rep_p.add_argument("--config", required=True, help="scenario YAML (estimator section used)")
    rep_p.add_argument("--out", required=True, help="output directory")
    rep_p.set_defaults(func=cmd_replay)

    val_p = sub.add_parser("validate", help="check a config (and optionally a mission)")
    val_p.add_argument("--config", required=True)
    val_p.add_argument("--mission", default=None)
    val_p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
