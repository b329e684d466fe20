"""Waypoint navigation: mission plan, smoothstep path manager, trajectory follower.

The path manager walks an ordered waypoint list, generating straight-line
position/heading trajectories time-parameterized by the quintic smoothstep
so each leg starts and ends at rest. The follower turns trajectory
setpoints into roll/pitch/yaw-rate/thrust references using a position PID
plus the flatness construction of the desired body axes from the
commanded specific force and heading.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import (
    GRAVITY,
    SMOOTHSTEP_PEAK_SLOPE,
    euler_from_rotation,
    quintic_smoothstep,
    rotation_body_to_inertial,
    wrap_angle,
)
from .messages import AngleThrustSetpoint, StateEstimate, TrajectorySetpoint

MIN_LEG_DURATION = 2.0  # s, floor for degenerate or very short legs


@dataclass
class Waypoint:
    position: np.ndarray  # NED, m
    heading: float  # rad, wrapped to (-pi, pi]

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float)
        if not np.all(np.isfinite(self.position)) or not math.isfinite(self.heading):
            raise ValueError("waypoint fields must be finite")
        self.heading = wrap_angle(self.heading)


@dataclass
class MissionPlan:
    waypoints: list[Waypoint]
    v_max: float  # m/s, peak speed along any leg
    origin: tuple[float, float, float] | None = None  # lat rad, lon rad, alt m

    def __post_init__(self):
        if len(self.waypoints) < 1:
            raise ValueError("mission needs at least one waypoint")
        if self.v_max <= 0:
            raise ValueError("v_max must be positive")


def leg_duration(start: Waypoint, end: Waypoint, v_max: float,
                 t_min: float = MIN_LEG_DURATION) -> float:
    """Leg time so the smoothstep's peak slope never exceeds v_max.

    Peak speed along a leg is 1.875 * |dp| / T, so T = 1.875 |dp| / v_max,
    floored at t_min to keep degenerate (coincident) legs well defined.
    """
    if v_max <= 0:
        raise ValueError("v_max must be positive")
    dist = float(np.linalg.norm(end.position - start.position))
    return max(dist * SMOOTHSTEP_PEAK_SLOPE / v_max, t_min)


@dataclass
class WaypointLeg:
    start: Waypoint
    end: Waypoint
    duration: float

    def __post_init__(self):
        if self.duration <= 0:
            raise ValueError("leg duration must be positive")
        self.delta_p = self.end.position - self.start.position
        self.delta_psi = wrap_angle(self.end.heading - self.start.heading)


def sample_leg(leg: WaypointLeg, t: float, leg_index: int = 0) -> TrajectorySetpoint:
    """Trajectory setpoint at elapsed leg time t (clamped to the leg)."""
    tau = t / leg.duration
    sigma, dsigma, ddsigma = quintic_smoothstep(tau)
    inv_t = 1.0 / leg.duration
    return TrajectorySetpoint(
        position=leg.start.position + sigma * leg.delta_p,
        velocity=dsigma * inv_t * leg.delta_p,
        acceleration=ddsigma * inv_t * inv_t * leg.delta_p,
        heading=wrap_angle(leg.start.heading + sigma * leg.delta_psi),
        heading_rate=dsigma * inv_t * leg.delta_psi,
        heading_accel=ddsigma * inv_t * inv_t * leg.delta_psi,
        leg=leg_index,
    )


class PathManager:
    """Steps through waypoint legs on a fixed clock, holding the final point.

    Leg transitions carry the overshoot remainder into the next leg so
    the time parameterization has no dead ticks. The manager is pure
    clockwork: identical tick sequences produce identical setpoints.
    """

    def __init__(self, plan: MissionPlan):
        self.plan = plan
        wps = plan.waypoints
        self.legs = [
            WaypointLeg(a, b, leg_duration(a, b, plan.v_max))
            for a, b in zip(wps, wps[1:])
        ]
        self.active_leg = 0
        self.t_leg = 0.0
        self.finished = len(self.legs) == 0

    @property
    def total_duration(self) -> float:
        return sum(leg.duration for leg in self.legs)

    def step(self, dt: float) -> TrajectorySetpoint:
        """Advance leg time by dt and return the current setpoint."""
        if self.finished:
            wp = self.plan.waypoints[-1]
            return TrajectorySetpoint(
                position=wp.position.copy(),
                velocity=np.zeros(3),
                acceleration=np.zeros(3),
                heading=wp.heading,
                heading_rate=0.0,
                heading_accel=0.0,
                leg=len(self.legs),
            )
        self.t_leg += dt
        while self.t_leg >= self.legs[self.active_leg].duration:
            self.t_leg -= self.legs[self.active_leg].duration
            if self.active_leg + 1 >= len(self.legs):
                self.finished = True
                return self.step(0.0)
            self.active_leg += 1
        return sample_leg(self.legs[self.active_leg], self.t_leg, self.active_leg)


@dataclass
class FollowerGains:
    kp: np.ndarray = field(default_factory=lambda: np.array([1.6, 1.6, 2.2]))
    kd: np.ndarray = field(default_factory=lambda: np.array([2.4, 2.4, 2.8]))
    ki: np.ndarray = field(default_factory=lambda: np.array([0.25, 0.25, 0.35]))
    k_yaw: float = 2.0
    integral_limit: float = 2.0  # m s, per axis
    tilt_limit: float = math.radians(30.0)
    min_force: float = 1e-3  # m/s^2, guard against a free-fall command


def flatness_attitude(accel_cmd: np.ndarray, heading_ref: float) -> tuple[np.ndarray, np.ndarray, float]:
    """Desired rotation from a commanded NED acceleration and heading.

    The commanded specific force f = a_cmd - (0, 0, g) fixes the desired
    body z axis (-f normalized); the heading reference fixes the desired
    body x axis within the remaining freedom. Returns (attitude angles,
    rotation matrix, |f|). Raises ValueError when |f| vanishes.
    """
    f = accel_cmd - np.array([0.0, 0.0, GRAVITY])
    f_norm = float(np.linalg.norm(f))
    if f_norm < 1e-9:
        raise ValueError("commanded specific force vanished")
    z_b = -f / f_norm
    x_c = np.array([math.cos(heading_ref), math.sin(heading_ref), 0.0])
    y_b = np.cross(z_b, x_c)
    y_norm = float(np.linalg.norm(y_b))
    if y_norm < 1e-9:
        raise ValueError("heading reference is parallel to the thrust axis")
    y_b = y_b / y_norm
    x_b = np.cross(y_b, z_b)
    R = np.column_stack([x_b, y_b, z_b])
    return euler_from_rotation(R), R, f_norm


class TrajectoryFollower:
    """Position PID with flatness feedforward producing angle/thrust setpoints."""

    def __init__(self, gains: FollowerGains, mass: float):
        self.gains = gains
        self.mass = mass
        self.integral = np.zeros(3)
        self._active_leg = -1
        self._last_attitude = np.zeros(3)
        self.warnings = 0

    def reset(self):
        self.integral = np.zeros(3)
        self._active_leg = -1

    def update(self, sp: TrajectorySetpoint, est: StateEstimate, dt: float) -> AngleThrustSetpoint:
        g = self.gains
        if sp.leg != self._active_leg:
            # new leg: drop accumulated error so legs start clean
            self.integral = np.zeros(3)
            self._active_leg = sp.leg

        v_inertial = rotation_body_to_inertial(est.attitude) @ est.velocity
        e_p = sp.position - est.position
        e_v = sp.velocity - v_inertial
        self.integral = np.clip(
            self.integral + e_p * dt, -g.integral_limit, g.integral_limit
        )
        a_cmd = sp.acceleration + g.kp * e_p + g.kd * e_v + g.ki * self.integral

        try:
            att, _, f_norm = flatness_attitude(a_cmd, sp.heading)
        except ValueError:
            self.warnings += 1
            return AngleThrustSetpoint(
                roll=self._last_attitude[0],
                pitch=self._last_attitude[1],
                yaw_rate=0.0,
                thrust=self.mass * self.gains.min_force,
            )

        roll = float(np.clip(att[0], -g.tilt_limit, g.tilt_limit))
        pitch = float(np.clip(att[1], -g.tilt_limit, g.tilt_limit))
        self._last_attitude = np.array([roll, pitch, att[2]])
        yaw_rate = sp.heading_rate + g.k_yaw * wrap_angle(sp.heading - est.attitude[2])
        return AngleThrustSetpoint(
            roll=roll, pitch=pitch, yaw_rate=yaw_rate, thrust=self.mass * f_norm
        )
