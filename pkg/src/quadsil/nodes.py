"""Role adapters: wrap the core components as scheduler nodes.

Topics: sim publishes truth + sensors, the estimator publishes estimate,
the planner publishes mission status (and takeoff commands), the manager
publishes trajectory setpoints, the follower publishes angle/thrust
setpoints as mode-10 commands, and the controller publishes firmware
commands that the sim's firmware slot consumes at the end of each tick.
"""
from __future__ import annotations

import numpy as np

from .controller import CascadeController
from .estimator import Ekf
from .messages import (
    SENSOR_PRIORITY,
    SENSOR_TOPICS,
    ControlCommand,
    MissionStatus,
    MotorThrusts,
    TrajectorySetpoint,
)
from .navigation import MissionPlan, PathManager, TrajectoryFollower
from .runtime import Bus, Node, register_implementation
from .sim import Multirotor

PHASE_TAKEOFF = 0
PHASE_MISSION = 1
PHASE_COMPLETE = 2


class SimNode(Node):
    """Truth propagation and sensor emission (first tick slot), firmware
    emulation and motor update (post slot, after the controller)."""

    has_post_work = True

    def __init__(self, rate_hz: float, params: dict):
        super().__init__(rate_hz, params)
        self.core: Multirotor = params["core"]
        self._tick = 0

    def work(self, t: float) -> None:
        if self._tick > 0:
            self.core.step_physics()
        self.bus.publish("truth", t, self.core.truth.copy())
        for topic, payload in self.core.poll_sensors(self._tick):
            self.bus.publish(topic, t, payload)
        self._tick += 1

    def post_work(self, t: float) -> None:
        latest = self.bus.latest("firmware")
        cmd = latest[1] if latest else None
        thrusts = self.core.apply_command(cmd)
        self.bus.publish(
            "motors",
            t,
            MotorThrusts(thrusts=thrusts.copy(), saturated=int(self.core.firmware.last_saturated)),
        )


class EstimatorNode(Node):
    """Drains sensor topics in (stamp, priority) order into the filter."""

    def __init__(self, rate_hz: float, params: dict):
        super().__init__(rate_hz, params)
        self.core: Ekf = params["core"]
        self._cursors = {name: 0 for name in SENSOR_TOPICS}

    def work(self, t: float) -> None:
        batch = []
        for name in SENSOR_TOPICS:
            msgs, self._cursors[name] = self.bus.read_new(name, self._cursors[name])
            for stamp, payload in msgs:
                batch.append((stamp, SENSOR_PRIORITY[name], name, payload))
        if not batch:
            return
        batch.sort(key=lambda item: (item[0], item[1]))
        for stamp, _, name, payload in batch:
            self.core.ingest(name, stamp, payload)
        self.bus.publish("estimate", t, self.core.estimate())


class PlannerNode(Node):
    """Mission phasing: climb-out in mode 4, then hand over to the manager."""

    def __init__(self, rate_hz: float, params: dict):
        super().__init__(rate_hz, params)
        self.plan: MissionPlan = params["plan"]  # takeoff waypoint already prepended
        self.climb_rate: float = params.get("climb_rate", 1.0)
        self.capture_radius: float = params.get("capture_radius", 0.3)
        self.completion_radius: float = params.get("completion_radius", 0.5)
        self.phase = PHASE_TAKEOFF
        self.n_legs = len(self.plan.waypoints) - 1

    def work(self, t: float) -> None:
        latest = self.bus.latest("estimate")
        traj = self.bus.latest("trajectory")
        active_leg = traj[1].leg if traj else 0
        if latest is not None:
            est = latest[1]
            if self.phase == PHASE_TAKEOFF:
                wp0 = self.plan.waypoints[0]
                v_d = float(
                    np.clip(wp0.position[2] - est.position[2], -self.climb_rate, self.climb_rate)
                )
                self.bus.publish(
                    "command",
                    t,
                    ControlCommand(
                        mode=4,
                        values=(wp0.position[0], wp0.position[1], v_d, wp0.heading),
                    ),
                )
                if abs(est.position[2] - wp0.position[2]) <= self.capture_radius:
                    self.phase = PHASE_MISSION
            elif self.phase == PHASE_MISSION:
                final = self.plan.waypoints[-1]
                dist = float(np.linalg.norm(est.position - final.position))
                if active_leg >= self.n_legs and dist <= self.completion_radius:
                    self.phase = PHASE_COMPLETE
        self.bus.publish(
            "mission",
            t,
            MissionStatus(
                phase=self.phase,
                active_leg=int(active_leg),
                complete=int(self.phase == PHASE_COMPLETE),
            ),
        )


class ManagerNode(Node):
    """Steps the smoothstep path manager once the mission phase starts."""

    def __init__(self, rate_hz: float, params: dict):
        super().__init__(rate_hz, params)
        self.core: PathManager = params["core"]

    def work(self, t: float) -> None:
        mission = self.bus.latest("mission")
        if mission is None or mission[1].phase < PHASE_MISSION:
            return
        setpoint = self.core.step(1.0 / self.rate_hz)
        self.bus.publish("trajectory", t, setpoint)


class FollowerNode(Node):
    """Trajectory setpoints to mode-10 (angle-rate-thrust) commands."""

    def __init__(self, rate_hz: float, params: dict):
        super().__init__(rate_hz, params)
        self.core: TrajectoryFollower = params["core"]

    def work(self, t: float) -> None:
        traj = self.bus.latest("trajectory")
        est = self.bus.latest("estimate")
        if traj is None or est is None:
            return
        out = self.core.update(traj[1], est[1], 1.0 / self.rate_hz)
        self.bus.publish("follower", t, out)
        self.bus.publish(
            "command",
            t,
            ControlCommand(mode=10, values=(out.roll, out.pitch, out.yaw_rate, out.thrust)),
        )


class ControllerNode(Node):
    """Routes the newest command through the cascade to a firmware command."""

    def __init__(self, rate_hz: float, params: dict):
        super().__init__(rate_hz, params)
        self.core: CascadeController = params["core"]
        self._param_cursor = 0

    def work(self, t: float) -> None:
        updates, self._param_cursor = self.bus.read_new("params", self._param_cursor)
        for _, update in updates:
            if update.role == "controller":
                self.core.apply_param(update.name, update.value)
        cmd = self.bus.latest("command")
        est = self.bus.latest("estimate")
        if cmd is None or est is None:
            return
        est_age = t - est[0]
        out = self.core.route(cmd[1], est[1], 1.0 / self.rate_hz, est_age)
        self.bus.publish("firmware", t, out)


class LoggerNode(Node):
    """Placeholder role: recording happens in the bus; binding this role
    marks the run as recorded. Removing it changes no other node."""

    def work(self, t: float) -> None:
        pass


register_implementation("sim", "rigid_body", SimNode)
register_implementation("estimator", "ekf", EstimatorNode)
register_implementation("planner", "waypoint", PlannerNode)
register_implementation("manager", "smoothstep", ManagerNode)
register_implementation("follower", "flatness", FollowerNode)
register_implementation("controller", "cascade", ControllerNode)
register_implementation("logger", "csv", LoggerNode)
