"""Assemble the full autonomy stack from a scenario config and mission plan."""
from __future__ import annotations

import copy
import os
import shutil

import numpy as np
import yaml

from . import nodes  # noqa: F401  (registers the default implementations)
from .config import (
    build_cascade_gains,
    build_ekf_config,
    build_firmware_gains,
    build_follower_gains,
    build_sensor_config,
    build_vehicle,
    config_hash,
    origin_radians,
)
from .controller import CascadeController
from .estimator import Ekf
from .navigation import MissionPlan, PathManager, TrajectoryFollower, Waypoint
from .report import summarize, write_report
from .runtime import Bus, NodeDescriptor, Registry, RunReport, Scheduler, write_run_dir
from .sim import Multirotor


def plan_with_takeoff(plan: MissionPlan, cfg: dict) -> MissionPlan:
    """Prepend the climb-out hover waypoint above the start position."""
    takeoff_alt = cfg["takeoff"]["altitude"]
    first = plan.waypoints[0]
    takeoff_wp = Waypoint(np.array([0.0, 0.0, -float(takeoff_alt)]), first.heading)
    return MissionPlan(
        waypoints=[takeoff_wp] + list(plan.waypoints),
        v_max=plan.v_max,
        origin=plan.origin,
    )


def build_stack(cfg: dict, plan: MissionPlan) -> tuple[Registry, Bus, Scheduler, MissionPlan]:
    origin = origin_radians(cfg)
    vehicle = build_vehicle(cfg)
    full_plan = plan_with_takeoff(plan, cfg)

    sim_core = Multirotor(
        vehicle,
        build_sensor_config(cfg),
        origin,
        physics_rate=cfg["physics_rate"],
        wind=np.array(cfg["wind"], dtype=float),
        firmware_gains=build_firmware_gains(cfg),
    )
    ekf_core = Ekf(build_ekf_config(cfg))
    manager_core = PathManager(full_plan)
    follower_core = TrajectoryFollower(build_follower_gains(cfg), vehicle.mass)
    cascade_core = CascadeController(build_cascade_gains(cfg), vehicle.mass, vehicle.t_max)

    rates = cfg["rates"]
    impls = cfg["nodes"]
    registry = Registry()
    bus = Bus()
    descriptors = [
        NodeDescriptor("sim", impls["sim"], cfg["physics_rate"], {"core": sim_core}),
        NodeDescriptor("estimator", impls["estimator"], rates["estimator"], {"core": ekf_core}),
        NodeDescriptor(
            "planner",
            impls["planner"],
            rates["planner"],
            {
                "plan": full_plan,
                "climb_rate": cfg["takeoff"]["climb_rate"],
                "capture_radius": cfg["takeoff"]["capture_radius"],
                "completion_radius": cfg["takeoff"]["completion_radius"],
            },
        ),
        NodeDescriptor("manager", impls["manager"], rates["manager"], {"core": manager_core}),
        NodeDescriptor("follower", impls["follower"], rates["follower"], {"core": follower_core}),
        NodeDescriptor(
            "controller", impls["controller"], rates["controller"], {"core": cascade_core}
        ),
        NodeDescriptor("logger", impls["logger"], rates["logger"], {}),
    ]
    for desc in descriptors:
        registry.bind(desc)
    scheduler = Scheduler(registry, bus, cfg["physics_rate"])
    return registry, bus, scheduler, full_plan


def run_scenario(
    cfg: dict,
    plan: MissionPlan,
    out_dir: str | None = None,
    seed: int | None = None,
    duration: float | None = None,
    mission_path: str | None = None,
) -> tuple[RunReport, dict, Bus]:
    """Run the closed-loop mission; optionally write the run directory.

    Returns (run report, summary dict, bus with full topic histories).
    """
    cfg = copy.deepcopy(cfg)
    if seed is not None:
        cfg["seed"] = int(seed)
    if duration is not None:
        cfg["duration"] = float(duration)
    registry, bus, scheduler, full_plan = build_stack(cfg, plan)
    report = scheduler.run(cfg["duration"])
    summary = summarize(bus, full_plan, report)
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        meta = {
            "seed": cfg["seed"],
            "config_hash": config_hash(cfg),
            "physics_rate": cfg["physics_rate"],
            "estimator_rate": cfg["rates"]["estimator"],
        }
        write_run_dir(out_dir, bus, meta)
        with open(os.path.join(out_dir, "config.yaml"), "w") as fh:
            yaml.safe_dump(cfg, fh, sort_keys=True)
        if mission_path is not None:
            shutil.copyfile(mission_path, os.path.join(out_dir, "mission.yaml"))
        summary["seed"] = cfg["seed"]
        summary["config_hash"] = config_hash(cfg)
        write_report(summary, out_dir)
    return report, summary, bus
