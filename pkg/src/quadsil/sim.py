"""Deterministic rigid-body quadrotor truth model with synthetic sensors.

The simulator owns the truth state, a minimal firmware stand-in (attitude
and rate loops plus the motor mixer), and the sensor suite. Sensor models
are written here independently of the estimator's measurement models so
closed-loop consistency checks compare two separate implementations.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .controller import Pid
from .geometry import (
    EARTH_RADIUS,
    GIMBAL_GUARD,
    GRAVITY,
    GimbalLockError,
    euler_kinematics,
    rotation_body_to_inertial,
    wrap_angle,
)
from .messages import (
    ANGLE,
    PASSTHROUGH,
    RATE,
    BaroSample,
    FirmwareCommand,
    GnssSample,
    ImuSample,
    MagSample,
    TruthState,
)


class SimFault(RuntimeError):
    """Truth state left the valid envelope (gimbal or non-finite)."""


@dataclass
class VehicleParams:
    mass: float = 2.0  # kg, HolyBro x650-class frame
    inertia: np.ndarray = field(default_factory=lambda: np.array([0.025, 0.025, 0.045]))
    arm_length: float = 0.325  # m, hub to motor
    motor_max_thrust: float = 15.0  # N per motor
    thrust_to_torque: float = 0.016  # m, yaw moment per newton of thrust
    drag: np.ndarray = field(default_factory=lambda: np.array([0.10, 0.10, 0.15]))  # 1/s
    motor_time_constant: float = 0.0  # s, 0 = instantaneous motors

    def __post_init__(self):
        self.inertia = np.asarray(self.inertia, dtype=float)
        self.drag = np.asarray(self.drag, dtype=float)
        if self.mass <= 0 or self.arm_length <= 0 or self.motor_max_thrust <= 0:
            raise ValueError("vehicle parameters must be positive")
        if np.any(self.inertia <= 0) or self.thrust_to_torque <= 0:
            raise ValueError("vehicle parameters must be positive")
        if self.t_max < 1.5 * self.mass * GRAVITY:
            raise ValueError("hover margin violated: need 4*motor_max >= 1.5*m*g")

    @property
    def t_max(self) -> float:
        return 4.0 * self.motor_max_thrust


@dataclass
class SensorConfig:
    imu_rate: float = 250.0  # Hz
    baro_rate: float = 25.0
    mag_rate: float = 50.0
    gnss_rate: float = 5.0
    accel_sigma: float = 0.25  # m/s^2
    gyro_sigma: float = 0.005  # rad/s
    baro_sigma: float = 3.0  # Pa
    mag_sigma: float = 0.005  # unit-field scale
    gnss_pos_sigma: float = 0.4  # m
    gnss_vel_sigma: float = 0.05  # m/s
    gnss_alt_sigma: float = 0.4  # m
    accel_bias: np.ndarray = field(default_factory=lambda: np.zeros(3))
    gyro_bias: np.ndarray = field(default_factory=lambda: np.zeros(3))
    declination: float = 0.0  # rad
    inclination: float = math.radians(65.0)  # rad
    seed: int = 0

    def __post_init__(self):
        self.accel_bias = np.asarray(self.accel_bias, dtype=float)
        self.gyro_bias = np.asarray(self.gyro_bias, dtype=float)
        for rate in (self.imu_rate, self.baro_rate, self.mag_rate, self.gnss_rate):
            if rate <= 0:
                raise ValueError("sensor rates must be positive")
        for sigma in (
            self.accel_sigma, self.gyro_sigma, self.baro_sigma, self.mag_sigma,
            self.gnss_pos_sigma, self.gnss_vel_sigma, self.gnss_alt_sigma,
        ):
            if sigma < 0:
                raise ValueError("sensor sigmas must be non-negative")


def motor_wrench(thrusts, params: VehicleParams) -> tuple[float, np.ndarray]:
    """Total thrust and body torques produced by the four motors.

    Motor order: front-right, back-left, front-left, back-right (X layout);
    the first pair spins opposite to the second.
    """
    t0, t1, t2, t3 = (float(v) for v in thrusts)
    lever = params.arm_length / math.sqrt(2.0)
    total = t0 + t1 + t2 + t3
    tau = np.array(
        [
            lever * (-t0 + t1 + t2 - t3),
            lever * (t0 - t1 + t2 - t3),
            params.thrust_to_torque * (t0 + t1 - t2 - t3),
        ]
    )
    return total, tau


def mix(thrust: float, torque, params: VehicleParams) -> tuple[np.ndarray, bool]:
    """Allocate total thrust and torques to motor thrusts.

    Clamps to [0, motor_max] with priority thrust > roll/pitch > yaw:
    the yaw channel is scaled back first, then roll/pitch, so vertical
    authority survives saturation. Returns (thrusts, saturated).
    """
    lever = params.arm_length / math.sqrt(2.0)
    base = float(np.clip(thrust / 4.0, 0.0, params.motor_max_thrust))
    saturated = base != thrust / 4.0

    a = torque[0] / (4.0 * lever)
    b = torque[1] / (4.0 * lever)
    c = torque[2] / (4.0 * params.thrust_to_torque)
    rp = np.array([-a + b, a - b, a + b, -a - b])
    yaw = np.array([c, c, -c, -c])

    def fit_scale(current, delta):
        scale = 1.0
        for cur, d in zip(current, delta):
            if d > 0:
                room = (params.motor_max_thrust - cur) / d
            elif d < 0:
                room = cur / -d
            else:
                continue
            scale = min(scale, max(room, 0.0))
        return scale

    base_vec = np.full(4, base)
    s_rp = fit_scale(base_vec, rp)
    with_rp = base_vec + s_rp * rp
    s_yaw = fit_scale(with_rp, yaw)
    thrusts = np.clip(with_rp + s_yaw * yaw, 0.0, params.motor_max_thrust)
    saturated = saturated or s_rp < 1.0 or s_yaw < 1.0
    return thrusts, saturated


def _truth_derivative(state: np.ndarray, thrusts, params: VehicleParams,
                      wind: np.ndarray) -> np.ndarray:
    """Rigid-body derivative of the packed truth state [p, v_b, att, omega]."""
    v = state[3:6]
    att = state[6:9]
    omega = state[9:12]
    R = rotation_body_to_inertial(att)
    total, tau = motor_wrench(thrusts, params)
    v_rel = v - R.T @ wind
    force = (
        R.T @ np.array([0.0, 0.0, params.mass * GRAVITY])
        + np.array([0.0, 0.0, -total])
        - params.mass * params.drag * v_rel
    )
    J = params.inertia
    out = np.empty(12)
    out[0:3] = R @ v
    out[3:6] = force / params.mass + np.cross(v, omega)
    out[6:9] = euler_kinematics(att, guard=GIMBAL_GUARD / 2) @ omega
    out[9:12] = (tau - np.cross(omega, J * omega)) / J
    return out


def step_dynamics(truth: TruthState, thrusts, params: VehicleParams, wind,
                  dt: float) -> TruthState:
    """One fourth-order Runge-Kutta step of the rigid-body model."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    y = np.concatenate([truth.position, truth.velocity, truth.attitude, truth.omega])
    wind = np.asarray(wind, dtype=float)
    try:
        k1 = _truth_derivative(y, thrusts, params, wind)
        k2 = _truth_derivative(y + 0.5 * dt * k1, thrusts, params, wind)
        k3 = _truth_derivative(y + 0.5 * dt * k2, thrusts, params, wind)
        k4 = _truth_derivative(y + dt * k3, thrusts, params, wind)
    except GimbalLockError as exc:
        raise SimFault(str(exc)) from exc
    y = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(y)):
        raise SimFault("non-finite truth state")
    if abs(y[7]) >= math.pi / 2.0 - GIMBAL_GUARD:
        raise SimFault("truth pitch entered the gimbal guard region")
    return TruthState(
        position=y[0:3],
        velocity=y[3:6],
        attitude=np.array([wrap_angle(y[6]), y[7], wrap_angle(y[8])]),
        omega=y[9:12],
    )


@dataclass
class FirmwareGains:
    kp_att: np.ndarray = field(default_factory=lambda: np.array([8.0, 8.0]))
    rate_limit: float = math.radians(400.0)
    rate_kp: np.ndarray = field(default_factory=lambda: np.array([0.8, 0.8, 0.4]))
    rate_ki: np.ndarray = field(default_factory=lambda: np.array([0.3, 0.3, 0.15]))
    rate_integral_limit: float = 0.6
    torque_limit: np.ndarray = field(default_factory=lambda: np.array([3.0, 3.0, 1.5]))


class FirmwareEmulation:
    """In-process stand-in for the flight controller's inner loops.

    Angle commands run an attitude P loop into a rate PI loop; rate
    commands run only the rate loop; pass-through commands go straight
    to the mixer. Feedback comes from the truth state at the physics
    rate, mirroring an FCU's high-rate gyro access.
    """

    def __init__(self, params: VehicleParams, gains: FirmwareGains | None = None):
        self.params = params
        self.gains = gains or FirmwareGains()
        g = self.gains
        self.rate_pid = Pid(g.rate_kp, g.rate_ki, 0.0, g.rate_integral_limit)
        self.saturated_count = 0
        self.last_saturated = False

    def motor_commands(self, cmd: FirmwareCommand | None, truth: TruthState,
                       dt: float) -> np.ndarray:
        if cmd is None:
            self.last_saturated = False
            return np.zeros(4)
        g = self.gains
        if cmd.kind == PASSTHROUGH:
            thrust = float(cmd.u[2])
            torque = np.array([cmd.u[3], cmd.u[4], cmd.u[5]])
        else:
            if cmd.kind == ANGLE:
                att_err = np.array(
                    [
                        wrap_angle(cmd.u[3] - truth.attitude[0]),
                        wrap_angle(cmd.u[4] - truth.attitude[1]),
                    ]
                )
                pq_ref = np.clip(g.kp_att * att_err, -g.rate_limit, g.rate_limit)
                rate_ref = np.array([pq_ref[0], pq_ref[1], cmd.u[5]])
            elif cmd.kind == RATE:
                rate_ref = np.array([cmd.u[3], cmd.u[4], cmd.u[5]])
            else:
                raise ValueError(f"unknown firmware command kind {cmd.kind}")
            torque = self.rate_pid.step(rate_ref - truth.omega, truth.omega, dt)
            torque = np.clip(torque, -g.torque_limit, g.torque_limit)
            thrust = float(np.clip(cmd.u[2], 0.0, 1.0)) * self.params.t_max
        thrusts, saturated = mix(thrust, torque, self.params)
        self.last_saturated = saturated
        if saturated:
            self.saturated_count += 1
        return thrusts


def tropospheric_density(alt_msl: float) -> float:
    """Sim-side standard-atmosphere density (kept separate from the filter)."""
    if not 0.0 <= alt_msl < 11000.0:
        raise ValueError(f"altitude {alt_msl} m outside the troposphere band")
    temperature = 288.15 - 0.0065 * alt_msl
    exponent = GRAVITY / (0.0065 * 287.053)
    pressure = 101325.0 * (temperature / 288.15) ** exponent
    return pressure / (287.053 * temperature)


class SensorSuite:
    """Rate-gated synthetic sensors driven by a seeded generator."""

    def __init__(self, cfg: SensorConfig, origin: tuple[float, float, float],
                 physics_rate: float):
        self.cfg = cfg
        self.origin = origin  # lat rad, lon rad, alt m
        self.rng = np.random.default_rng(cfg.seed)
        self.rho0 = tropospheric_density(origin[2])
        incl, decl = cfg.inclination, cfg.declination
        self.field_inertial = np.array(
            [
                math.cos(incl) * math.cos(decl),
                math.cos(incl) * math.sin(decl),
                math.sin(incl),
            ]
        )
        self._periods = {}
        for name, rate in (
            ("imu", cfg.imu_rate), ("baro", cfg.baro_rate),
            ("mag", cfg.mag_rate), ("gnss", cfg.gnss_rate),
        ):
            period = physics_rate / rate
            if abs(period - round(period)) > 1e-9:
                raise ValueError(f"{name} rate {rate} must divide the physics rate")
            self._periods[name] = int(round(period))

    def due(self, name: str, tick: int) -> bool:
        return tick % self._periods[name] == 0

    def poll(self, tick: int, truth: TruthState, specific_force: np.ndarray):
        """Messages due at this physics tick, in canonical topic order."""
        cfg = self.cfg
        out = []
        R = rotation_body_to_inertial(truth.attitude)
        if self.due("imu", tick):
            accel = specific_force + cfg.accel_bias + self.rng.normal(0.0, cfg.accel_sigma, 3)
            gyro = truth.omega + cfg.gyro_bias + self.rng.normal(0.0, cfg.gyro_sigma, 3)
            out.append(("imu", ImuSample(accel=accel, gyro=gyro)))
        if self.due("gnss", tick):
            lat0, lon0, alt0 = self.origin
            p_n = truth.position[0] + self.rng.normal(0.0, cfg.gnss_pos_sigma)
            p_e = truth.position[1] + self.rng.normal(0.0, cfg.gnss_pos_sigma)
            lat = lat0 + p_n / EARTH_RADIUS
            lon = lon0 + p_e / (EARTH_RADIUS * math.cos(lat))
            alt = alt0 - truth.position[2] + self.rng.normal(0.0, cfg.gnss_alt_sigma)
            vel = R @ truth.velocity + self.rng.normal(0.0, cfg.gnss_vel_sigma, 3)
            out.append(("gnss", GnssSample(lat=lat, lon=lon, alt=alt, vel=vel)))
        if self.due("baro", tick):
            pressure = -self.rho0 * GRAVITY * truth.position[2]
            pressure += self.rng.normal(0.0, cfg.baro_sigma)
            out.append(("baro", BaroSample(pressure=pressure)))
        if self.due("mag", tick):
            field_body = R.T @ self.field_inertial + self.rng.normal(0.0, cfg.mag_sigma, 3)
            out.append(("mag", MagSample(field=field_body)))
        return out


class Multirotor:
    """Truth propagation, firmware emulation, and sensor generation."""

    def __init__(
        self,
        vehicle: VehicleParams,
        sensors: SensorConfig,
        origin: tuple[float, float, float],
        physics_rate: float = 1000.0,
        wind: np.ndarray | None = None,
        firmware_gains: FirmwareGains | None = None,
        initial_truth: TruthState | None = None,
    ):
        self.vehicle = vehicle
        self.physics_rate = physics_rate
        self.dt = 1.0 / physics_rate
        self.wind = np.zeros(3) if wind is None else np.asarray(wind, dtype=float)
        self.truth = initial_truth or TruthState(
            position=np.zeros(3), velocity=np.zeros(3),
            attitude=np.zeros(3), omega=np.zeros(3),
        )
        self.firmware = FirmwareEmulation(vehicle, firmware_gains)
        self.sensors = SensorSuite(sensors, origin, physics_rate)
        self.motor_thrusts = np.zeros(4)

    def specific_force(self) -> np.ndarray:
        """Body-frame specific force the accelerometer senses right now."""
        R = rotation_body_to_inertial(self.truth.attitude)
        v_rel = self.truth.velocity - R.T @ self.wind
        total = float(np.sum(self.motor_thrusts))
        force = np.array([0.0, 0.0, -total]) - self.vehicle.mass * self.vehicle.drag * v_rel
        return force / self.vehicle.mass

    def step_physics(self) -> None:
        self.truth = step_dynamics(
            self.truth, self.motor_thrusts, self.vehicle, self.wind, self.dt
        )

    def apply_command(self, cmd: FirmwareCommand | None) -> np.ndarray:
        """Run the firmware loops once and update the applied motor thrusts."""
        commanded = self.firmware.motor_commands(cmd, self.truth, self.dt)
        tau = self.vehicle.motor_time_constant
        if tau > 0.0:
            alpha = self.dt / (tau + self.dt)
            self.motor_thrusts = self.motor_thrusts + alpha * (commanded - self.motor_thrusts)
        else:
            self.motor_thrusts = commanded
        return self.motor_thrusts

    def poll_sensors(self, tick: int):
        return self.sensors.poll(tick, self.truth, self.specific_force())
