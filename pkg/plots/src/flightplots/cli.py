"""flightplots command line: one subcommand per figure type."""
from __future__ import annotations

import argparse
import sys

from .figures import estimator_error_figure, response_figure, save_figure, topdown_figure
from .runio import RunArtifacts, RunDataError


def _open_run(path: str) -> RunArtifacts:
    return RunArtifacts(path)


def cmd_topdown(args) -> int:
    run = _open_run(args.run_dir)
    overlay = _open_run(args.overlay) if args.overlay else None
    fig, stats = topdown_figure(run, overlay)
    save_figure(fig, args.out)
    print(f"wrote {args.out} ({len(stats['waypoints'])} waypoints, "
          f"{stats['n_track_points']} track points)")
    return 0


def cmd_response(args) -> int:
    run = _open_run(args.run_dir)
    fig, stats = response_figure(run)
    save_figure(fig, args.out)
    if stats["warning"]:
        print(f"warning: {stats['warning']}", file=sys.stderr)
    print(f"wrote {args.out}")
    return 0


def cmd_estimator_error(args) -> int:
    run = _open_run(args.run_dir)
    fig, stats = estimator_error_figure(run)
    save_figure(fig, args.out)
    print(
        f"wrote {args.out} (RMS pos {stats['est_rms_pos_m']:.3f} m, "
        f"vel {stats['est_rms_vel_mps']:.4f} m/s, att {stats['est_rms_att_deg']:.3f} deg)"
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="flightplots", description="figures from recorded run directories"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    top = sub.add_parser("topdown", help="north-east ground track with waypoints")
    top.add_argument("run_dir")
    top.add_argument("--out", required=True, help="output image path (png/svg)")
    top.add_argument("--overlay", default=None, help="second run directory to overlay")
    top.set_defaults(func=cmd_topdown)

    resp = sub.add_parser("response", help="position/heading response vs setpoints")
    resp.add_argument("run_dir")
    resp.add_argument("--out", required=True)
    resp.set_defaults(func=cmd_response)

    err = sub.add_parser("estimator-error", help="estimate-vs-truth error traces")
    err.add_argument("run_dir")
    err.add_argument("--out", required=True)
    err.set_defaults(func=cmd_estimator_error)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except RunDataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
