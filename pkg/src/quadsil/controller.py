"""Cascaded setpoint controller with twelve entry points.

Commands enter at any mode and cascade toward one of the three firmware
command kinds. Routing (reconstructed from the entry-point table and the
velocity-loop worked example; modes are listed with the loops they close):

    0  NED-Pos Yaw        -> position P + yaw P -> 3
    1  NE-Vel D-Pos YawR  -> down-position P    -> 3
    2  FRD-Accel YawR     -> accel/attitude map -> 6
    3  NED-Vel YawR       -> velocity PID       -> 2
    4  NE-Pos D-Vel Yaw   -> NE-position P + yaw P (D velocity passed) -> 3
    5  Roll Pitch Yaw Throttle   -> yaw P -> 6
    6  Roll Pitch YawR Throttle  -> firmware angle command
    7  RollR PitchR YawR Throttle-> firmware rate command
    8  Pass-through              -> firmware pass-through command
    9  Roll Pitch Yaw Thrust     -> yaw P -> 10
    10 Roll Pitch YawR Thrust    -> attitude PID -> 11
    11 RollR PitchR YawR Thrust  -> rate PID -> 8

Every firmware command is the 10-element vector
[0, 0, x2, x3, x4, x5, 0, 0, 0, 0]: throttle (or body-z thrust) in slot 2
and the three angle/rate/torque channels in slots 3..5.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import GRAVITY, rotation_body_to_inertial, wrap_angle
from .messages import ANGLE, PASSTHROUGH, RATE, ControlCommand, FirmwareCommand, StateEstimate

MAX_CASCADE_HOPS = 5


class UnknownMode(ValueError):
    """Command mode outside 0..11."""


class Pid:
    """Scalar or per-axis PID with clamped integrator.

    The derivative acts on the measurement, not the error, so setpoint
    steps do not kick the output.
    """

    def __init__(self, kp, ki=0.0, kd=0.0, integral_limit=0.0, output_limit=math.inf):
        self.kp = np.asarray(kp, dtype=float)
        self.ki = np.asarray(ki, dtype=float)
        self.kd = np.asarray(kd, dtype=float)
        self.integral_limit = integral_limit
        self.output_limit = output_limit
        self.integral = np.zeros_like(self.kp)
        self._prev_measurement = None

    def reset(self):
        self.integral = np.zeros_like(self.kp)
        self._prev_measurement = None

    def step(self, error, measurement, dt: float):
        error = np.asarray(error, dtype=float)
        measurement = np.asarray(measurement, dtype=float)
        if np.any(self.ki != 0.0):
            self.integral = np.clip(
                self.integral + error * dt, -self.integral_limit, self.integral_limit
            )
        if self._prev_measurement is None or dt <= 0.0:
            derivative = np.zeros_like(measurement)
        else:
            derivative = (measurement - self._prev_measurement) / dt
        self._prev_measurement = measurement.copy()
        out = self.kp * error + self.ki * self.integral - self.kd * derivative
        return np.clip(out, -self.output_limit, self.output_limit)


@dataclass
class GainSet:
    """Gains, saturations, and limits for the full cascade."""

    kp_pos_ne: float = 0.95
    kp_pos_d: float = 1.0
    vel_limit_ne: float = 5.0  # m/s
    vel_limit_d: float = 2.0  # m/s
    kp_yaw: float = 2.0
    yaw_rate_limit: float = math.radians(180.0)
    vel_kp: np.ndarray = field(default_factory=lambda: np.array([2.0, 2.0, 2.5]))
    vel_ki: np.ndarray = field(default_factory=lambda: np.array([0.3, 0.3, 0.4]))
    vel_kd: np.ndarray = field(default_factory=lambda: np.array([0.1, 0.1, 0.1]))
    vel_integral_limit: float = 2.0
    accel_limit: float = 8.0  # m/s^2
    kp_att: np.ndarray = field(default_factory=lambda: np.array([7.0, 7.0]))
    rate_limit: float = math.radians(220.0)
    rate_kp: np.ndarray = field(default_factory=lambda: np.array([0.55, 0.55, 0.7]))
    rate_ki: np.ndarray = field(default_factory=lambda: np.array([0.1, 0.1, 0.1]))
    rate_kd: np.ndarray = field(default_factory=lambda: np.array([0.002, 0.002, 0.0]))
    rate_integral_limit: float = 0.5
    torque_limit: np.ndarray = field(default_factory=lambda: np.array([2.5, 2.5, 1.2]))
    tilt_limit: float = math.radians(30.0)
    min_vertical_force: float = 0.5  # m/s^2, floor on g - a_z
    stale_estimate_timeout: float = 0.5  # s
    failsafe_descent_throttle_scale: float = 0.85


class CascadeController:
    """Stateful cascade: one instance per vehicle, ticked by the runtime."""

    def __init__(self, gains: GainSet, mass: float, t_max: float):
        self.gains = gains
        self.mass = mass
        self.t_max = t_max
        self.vel_pid = Pid(
            gains.vel_kp, gains.vel_ki, gains.vel_kd,
            gains.vel_integral_limit, gains.accel_limit,
        )
        self.rate_pid = Pid(
            gains.rate_kp, gains.rate_ki, gains.rate_kd,
            gains.rate_integral_limit,
        )
        self.warnings = 0
        self.failsafes = 0

    # -- primitive loops -------------------------------------------------

    def thrust_to_throttle(self, thrust: float) -> float:
        """Linear map from total thrust in Newtons to throttle in [0, 1]."""
        return float(np.clip(thrust / self.t_max, 0.0, 1.0))

    def accel_to_attitude(self, a_v1, yaw_rate: float, est: StateEstimate):
        """Vehicle-1 accelerations to roll/pitch/throttle references."""
        g = self.gains
        g_eff = GRAVITY - a_v1[2]
        if g_eff < g.min_vertical_force:
            self.warnings += 1
            g_eff = g.min_vertical_force
        pitch = -math.atan(a_v1[0] / g_eff)
        roll = math.atan(a_v1[1] / g_eff)
        roll = float(np.clip(roll, -g.tilt_limit, g.tilt_limit))
        pitch = float(np.clip(pitch, -g.tilt_limit, g.tilt_limit))
        cos_tilt = math.cos(est.attitude[0]) * math.cos(est.attitude[1])
        cos_tilt = max(cos_tilt, 0.25)
        throttle = self.thrust_to_throttle(self.mass * (GRAVITY - a_v1[2]) / cos_tilt)
        return roll, pitch, yaw_rate, throttle

    def attitude_loop(self, roll_ref: float, pitch_ref: float, est: StateEstimate):
        """P loop on wrapped roll/pitch errors producing body-rate setpoints."""
        g = self.gains
        err = np.array(
            [wrap_angle(roll_ref - est.attitude[0]), wrap_angle(pitch_ref - est.attitude[1])]
        )
        rates = g.kp_att * err
        return tuple(np.clip(rates, -g.rate_limit, g.rate_limit))

    def rate_loop(self, rate_ref, est: StateEstimate, dt: float):
        """PID on body-rate errors producing torque commands."""
        ref = np.asarray(rate_ref, dtype=float)
        torque = self.rate_pid.step(ref - est.omega, est.omega, dt)
        return tuple(np.clip(torque, -self.gains.torque_limit, self.gains.torque_limit))

    def yaw_to_rate(self, yaw_ref: float, est: StateEstimate) -> float:
        g = self.gains
        r = g.kp_yaw * wrap_angle(yaw_ref - est.attitude[2])
        return float(np.clip(r, -g.yaw_rate_limit, g.yaw_rate_limit))

    def failsafe_command(self) -> FirmwareCommand:
        """Level attitude with gentle descent throttle."""
        self.failsafes += 1
        throttle = self.gains.failsafe_descent_throttle_scale * (
            self.mass * GRAVITY / self.t_max
        )
        return _firmware(ANGLE, throttle, 0.0, 0.0, 0.0)

    # -- routing ----------------------------------------------------------

    def route(self, cmd: ControlCommand, est: StateEstimate, dt: float,
              est_age: float = 0.0) -> FirmwareCommand:
        """Cascade a command down to a firmware command (at most 5 hops)."""
        if not 0 <= cmd.mode <= 11:
            raise UnknownMode(f"mode {cmd.mode}")
        if est_age > self.gains.stale_estimate_timeout:
            return self.failsafe_command()
        g = self.gains
        mode, vals = cmd.mode, tuple(float(v) for v in cmd.values)
        for _ in range(MAX_CASCADE_HOPS):
            if mode == 0:
                pn, pe, pd, yaw = vals
                v = np.array([pn, pe, pd]) - est.position
                vn = _clip(g.kp_pos_ne * v[0], g.vel_limit_ne)
                ve = _clip(g.kp_pos_ne * v[1], g.vel_limit_ne)
                vd = _clip(g.kp_pos_d * v[2], g.vel_limit_d)
                mode, vals = 3, (vn, ve, vd, self.yaw_to_rate(yaw, est))
            elif mode == 1:
                vn, ve, pd, r = vals
                vd = _clip(g.kp_pos_d * (pd - est.position[2]), g.vel_limit_d)
                mode, vals = 3, (vn, ve, vd, r)
            elif mode == 4:
                pn, pe, vd, yaw = vals
                vn = _clip(g.kp_pos_ne * (pn - est.position[0]), g.vel_limit_ne)
                ve = _clip(g.kp_pos_ne * (pe - est.position[1]), g.vel_limit_ne)
                mode, vals = 3, (vn, ve, vd, self.yaw_to_rate(yaw, est))
            elif mode == 3:
                vn, ve, vd, r = vals
                v_inertial = rotation_body_to_inertial(est.attitude) @ est.velocity
                a_ned = self.vel_pid.step(
                    np.array([vn, ve, vd]) - v_inertial, v_inertial, dt
                )
                yaw = est.attitude[2]
                c, s = math.cos(yaw), math.sin(yaw)
                ax = c * a_ned[0] + s * a_ned[1]
                ay = -s * a_ned[0] + c * a_ned[1]
                mode, vals = 2, (ax, ay, float(a_ned[2]), r)
            elif mode == 2:
                roll, pitch, r, throttle = self.accel_to_attitude(vals[0:3], vals[3], est)
                mode, vals = 6, (roll, pitch, r, throttle)
            elif mode == 5:
                roll, pitch, yaw, throttle = vals
                mode, vals = 6, (roll, pitch, self.yaw_to_rate(yaw, est), throttle)
            elif mode == 6:
                roll, pitch, r, throttle = vals
                return _firmware(ANGLE, _clip01(throttle), roll, pitch, r)
            elif mode == 7:
                p, q, r, throttle = vals
                return _firmware(RATE, _clip01(throttle), p, q, r)
            elif mode == 8:
                tz, qx, qy, qz = vals
                return _firmware(PASSTHROUGH, tz, qx, qy, qz)
            elif mode == 9:
                roll, pitch, yaw, thrust = vals
                mode, vals = 10, (roll, pitch, self.yaw_to_rate(yaw, est), thrust)
            elif mode == 10:
                roll, pitch, r, thrust = vals
                p, q = self.attitude_loop(roll, pitch, est)
                mode, vals = 11, (p, q, r, thrust)
            elif mode == 11:
                p, q, r, thrust = vals
                qx, qy, qz = self.rate_loop((p, q, r), est, dt)
                mode, vals = 8, (thrust, qx, qy, qz)
        raise RuntimeError("cascade did not terminate in 5 hops")  # pragma: no cover

    def apply_param(self, name: str, value: float) -> bool:
        """Runtime gain update; returns True when the name was recognized."""
        scalar_params = {
            "kp_pos_ne", "kp_pos_d", "kp_yaw", "vel_limit_ne", "vel_limit_d",
            "yaw_rate_limit", "accel_limit", "rate_limit", "tilt_limit",
            "stale_estimate_timeout",
        }
        if name in scalar_params:
            setattr(self.gains, name, float(value))
            return True
        for prefix, pid in (("vel", self.vel_pid), ("rate", self.rate_pid)):
            for term in ("kp", "ki", "kd"):
                if name == f"{prefix}_{term}":
                    setattr(pid, term, np.full_like(getattr(pid, term), float(value)))
                    return True
        return False


def _clip(v: float, limit: float) -> float:
    return float(np.clip(v, -limit, limit))


def _clip01(v: float) -> float:
    return float(np.clip(v, 0.0, 1.0))


def _firmware(kind: int, slot2: float, slot3: float, slot4: float, slot5: float) -> FirmwareCommand:
    u = np.zeros(10)
    u[2] = slot2
    u[3] = slot3
    u[4] = slot4
    u[5] = slot5
    return FirmwareCommand(kind=kind, u=u)
