"""Continuous-discrete extended Kalman filter over the 12-dimensional state.

State vector layout (all column indices used throughout this module):

    x[0:3]   inertial NED position, m
    x[3:6]   body-frame velocity, m/s
    x[6:9]   Euler angles roll, pitch, yaw, rad
    x[9:12]  gyroscope bias, body frame, rad/s

Propagation is IMU-driven: specific force and angular rate act as the
model input, split into N Euler substeps with the covariance advanced by
a second-order discretization of the continuous-time Jacobian each
substep. Measurement updates (barometer, magnetometer, GNSS) use the
Joseph-form covariance update; the magnetometer heading additionally
folds the raw-field and attitude uncertainty into the innovation
covariance.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import (
    EARTH_RADIUS,
    GRAVITY,
    euler_kinematics,
    euler_kinematics_partials,
    rotation_body_to_inertial,
    rotation_partials,
    skew,
    wrap_angle,
)
from .messages import BaroSample, GnssSample, ImuSample, MagSample, StateEstimate

# 1976 standard atmosphere, troposphere segment
SEA_LEVEL_TEMPERATURE = 288.15  # K
SEA_LEVEL_PRESSURE = 101325.0  # Pa
LAPSE_RATE = 0.0065  # K/m
GAS_CONSTANT_AIR = 287.053  # J/(kg K)
TROPOPAUSE_ALTITUDE = 11000.0  # m

_GRAVITY_VEC = np.array([0.0, 0.0, GRAVITY])


class EstimatorFault(RuntimeError):
    """Non-finite state or covariance; latched until the filter is rebuilt."""


class SingularInnovation(RuntimeError):
    """Innovation covariance is not invertible within the condition limit."""


class DegenerateField(RuntimeError):
    """Magnetic field has no usable horizontal projection."""


class OriginNotSet(RuntimeError):
    """Geodetic conversion requested before an origin was latched."""


class OutOfTroposphere(ValueError):
    """Altitude outside the supported troposphere band."""


def dynamics(x: np.ndarray, u: np.ndarray) -> np.ndarray:
    """State derivative given IMU input u = (specific force, angular rate)."""
    v = x[3:6]
    att = x[6:9]
    omega = u[3:6] - x[9:12]
    R = rotation_body_to_inertial(att)
    xdot = np.empty(12)
    xdot[0:3] = R @ v
    xdot[3:6] = R.T @ _GRAVITY_VEC + u[0:3] + np.cross(v, omega)
    xdot[6:9] = euler_kinematics(att) @ omega
    xdot[9:12] = 0.0
    return xdot


def jacobian_A(x: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Continuous-time Jacobian of dynamics() with respect to the state."""
    v = x[3:6]
    att = x[6:9]
    omega = u[3:6] - x[9:12]
    R = rotation_body_to_inertial(att)
    dR_dphi, dR_dtheta, dR_dpsi = rotation_partials(att)
    S = euler_kinematics(att)
    dS_dphi, dS_dtheta = euler_kinematics_partials(att)

    A = np.zeros((12, 12))
    A[0:3, 3:6] = R
    A[0:3, 6] = dR_dphi @ v
    A[0:3, 7] = dR_dtheta @ v
    A[0:3, 8] = dR_dpsi @ v
    A[3:6, 3:6] = -skew(omega)
    A[3:6, 6] = dR_dphi.T @ _GRAVITY_VEC
    A[3:6, 7] = dR_dtheta.T @ _GRAVITY_VEC
    A[3:6, 8] = dR_dpsi.T @ _GRAVITY_VEC
    # d(v x omega)/d(bias): omega = y_gyro - b, so the block is -[v]x
    A[3:6, 9:12] = -skew(v)
    A[6:9, 6] = dS_dphi @ omega
    A[6:9, 7] = dS_dtheta @ omega
    A[6:9, 9:12] = -S
    # Bias dynamics are zero, so the bias-row diagonal stays zero.
    return A


def input_jacobian(x: np.ndarray) -> np.ndarray:
    """Jacobian of dynamics() with respect to the IMU input (accel, gyro)."""
    v = x[3:6]
    att = x[6:9]
    G = np.zeros((12, 6))
    G[3:6, 0:3] = np.eye(3)
    G[3:6, 3:6] = skew(v)
    G[6:9, 3:6] = euler_kinematics(att)
    return G


def discretize(A: np.ndarray, dt: float) -> np.ndarray:
    """Second-order matrix-exponential approximation I + A dt + A^2 dt^2/2."""
    return np.eye(A.shape[0]) + A * dt + (A @ A) * (0.5 * dt * dt)


@dataclass
class NoiseConfig:
    """Process, input, and measurement noise for the filter."""

    q_diag: np.ndarray  # 12 process-noise diagonals
    qu_diag: np.ndarray  # 6 input-noise diagonals: accel xyz then gyro xyz
    r_baro: float  # Pa^2
    r_mag: np.ndarray  # 3x3 raw-field covariance
    r_gnss_diag: np.ndarray  # pn, pe, vn, ve, vd

    def __post_init__(self):
        self.q_diag = np.asarray(self.q_diag, dtype=float)
        self.qu_diag = np.asarray(self.qu_diag, dtype=float)
        self.r_mag = np.asarray(self.r_mag, dtype=float)
        self.r_gnss_diag = np.asarray(self.r_gnss_diag, dtype=float)
        if (
            np.any(self.q_diag < 0)
            or np.any(self.qu_diag < 0)
            or self.r_baro < 0
            or np.any(np.diag(self.r_mag) < 0)
            or np.any(self.r_gnss_diag < 0)
        ):
            raise ValueError("noise diagonals must be non-negative")


def propagate_belief(
    x: np.ndarray,
    P: np.ndarray,
    u: np.ndarray,
    t_s: float,
    n_substeps: int,
    noise: NoiseConfig,
    half_step_noise_scaling: bool = True,
) -> tuple[np.ndarray, np.ndarray]:
    """Advance (x, P) through one IMU period of length t_s using N substeps.

    Each substep re-evaluates the dynamics, the state Jacobian, and the
    input Jacobian at the current state, advances x by an Euler step of
    t_s/N, and advances P by the discretized transition plus the noise
    increment (Q + G Qu G^T) scaled by (t_s/2N)^2, or by t_s/N when
    half_step_noise_scaling is off.
    """
    if t_s <= 0.0:
        raise ValueError("propagation period must be positive")
    if n_substeps < 1:
        raise ValueError("need at least one substep")
    dt = t_s / n_substeps
    scale = (0.5 * dt) ** 2 if half_step_noise_scaling else dt
    Q = np.diag(noise.q_diag)
    Qu = np.diag(noise.qu_diag)
    x = x.copy()
    P = P.copy()
    for _ in range(n_substeps):
        f = dynamics(x, u)
        A = jacobian_A(x, u)
        G = input_jacobian(x)
        A_d = discretize(A, dt)
        P = A_d @ P @ A_d.T + (Q + G @ Qu @ G.T) * scale
        x = x + f * dt
        x[6] = wrap_angle(x[6])
        x[8] = wrap_angle(x[8])
    P = 0.5 * (P + P.T)
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(P))):
        raise EstimatorFault("non-finite state or covariance after propagation")
    return x, P


def joseph_update(
    x: np.ndarray,
    P: np.ndarray,
    innovation: np.ndarray,
    C: np.ndarray,
    S: np.ndarray,
    R: np.ndarray,
    cond_limit: float = 1e12,
) -> tuple[np.ndarray, np.ndarray]:
    """Kalman update with the Joseph-form covariance step.

    K = P C^T S^-1, x += K innovation,
    P = (I - K C) P (I - K C)^T + K R K^T.
    Raises SingularInnovation when cond(S) exceeds cond_limit.
    """
    innovation = np.atleast_1d(np.asarray(innovation, dtype=float))
    C = np.atleast_2d(np.asarray(C, dtype=float))
    S = np.atleast_2d(np.asarray(S, dtype=float))
    R = np.atleast_2d(np.asarray(R, dtype=float))
    if not np.all(np.isfinite(S)) or np.linalg.cond(S) > cond_limit:
        raise SingularInnovation("innovation covariance is ill-conditioned")
    K = np.linalg.solve(S, C @ P).T
    x = x + K @ innovation
    x[6] = wrap_angle(x[6])
    x[8] = wrap_angle(x[8])
    IKC = np.eye(P.shape[0]) - K @ C
    P = IKC @ P @ IKC.T + K @ R @ K.T
    P = 0.5 * (P + P.T)
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(P))):
        raise EstimatorFault("non-finite state or covariance after update")
    return x, P


def innovation_covariance_full(F, R, G, P, C) -> np.ndarray:
    """Innovation covariance when the measurement z depends on the state.

    S = F R F^T + G P G^T + C P C^T - 2 G P C^T, returned symmetrized.
    F is dz/d(raw measurement), G is dz/d(state), C is dh/d(state).
    """
    F = np.atleast_2d(np.asarray(F, dtype=float))
    R = np.atleast_2d(np.asarray(R, dtype=float))
    G = np.atleast_2d(np.asarray(G, dtype=float))
    P = np.atleast_2d(np.asarray(P, dtype=float))
    C = np.atleast_2d(np.asarray(C, dtype=float))
    S = F @ R @ F.T + G @ P @ G.T + C @ P @ C.T - 2.0 * (G @ P @ C.T)
    return 0.5 * (S + S.T)


def air_density(alt_msl: float) -> float:
    """Tropospheric air density from the 1976 standard atmosphere, kg/m^3."""
    if not 0.0 <= alt_msl < TROPOPAUSE_ALTITUDE:
        raise OutOfTroposphere(f"altitude {alt_msl} m outside [0, {TROPOPAUSE_ALTITUDE})")
    temperature = SEA_LEVEL_TEMPERATURE - LAPSE_RATE * alt_msl
    exponent = GRAVITY / (LAPSE_RATE * GAS_CONSTANT_AIR)
    pressure = SEA_LEVEL_PRESSURE * (temperature / SEA_LEVEL_TEMPERATURE) ** exponent
    return pressure / (GAS_CONSTANT_AIR * temperature)


def baro_model(x: np.ndarray, rho: float) -> float:
    """Expected gauge pressure at the estimated down position."""
    return -rho * GRAVITY * x[2]


def baro_jacobian(rho: float) -> np.ndarray:
    C = np.zeros((1, 12))
    C[0, 2] = -rho * GRAVITY
    return C


def mag_heading(field: np.ndarray, att, declination: float = 0.0) -> float:
    """Tilt-compensated heading from a body-frame magnetic field sample.

    The field is de-rolled and de-pitched into the heading-aligned frame;
    the horizontal projection angle, negated and offset by the local
    declination, is the vehicle heading. Raises DegenerateField when the
    horizontal projection is below 1e-9 of usable magnitude.
    """
    R_v1 = rotation_body_to_inertial([att[0], att[1], 0.0])
    f = R_v1 @ np.asarray(field, dtype=float)
    if math.hypot(f[0], f[1]) <= 1e-9:
        raise DegenerateField("magnetic field is vertical after tilt compensation")
    return wrap_angle(math.atan2(-f[1], f[0]) + declination)


def mag_jacobians(field: np.ndarray, att) -> tuple[np.ndarray, np.ndarray]:
    """Jacobians of mag_heading w.r.t. the raw field (F, 1x3) and state (G, 1x12).

    Only the roll and pitch columns of G are nonzero; heading does not
    depend on the yaw estimate through the tilt compensation.
    """
    field = np.asarray(field, dtype=float)
    R_v1 = rotation_body_to_inertial([att[0], att[1], 0.0])
    f = R_v1 @ field
    u = -f[1]
    v = f[0]
    denom = u * u + v * v
    if denom <= 1e-18:
        raise DegenerateField("magnetic field is vertical after tilt compensation")
    # heading = atan2(u, v): dh/du = v/denom, dh/dv = -u/denom
    dh_du = v / denom
    dh_dv = -u / denom
    F = (dh_du * (-R_v1[1, :]) + dh_dv * R_v1[0, :]).reshape(1, 3)
    dR_dphi, dR_dtheta, _ = rotation_partials([att[0], att[1], 0.0])
    G = np.zeros((1, 12))
    for col, dR in ((6, dR_dphi), (7, dR_dtheta)):
        df = dR @ field
        G[0, col] = dh_du * (-df[1]) + dh_dv * df[0]
    return F, G


def gnss_to_local(lat: float, lon: float, origin: tuple[float, float]) -> tuple[float, float]:
    """Spherical-earth conversion of geodetic angles to local NE meters."""
    if origin is None:
        raise OriginNotSet("GNSS origin has not been latched")
    lat0, lon0 = origin
    p_n = (lat - lat0) * EARTH_RADIUS
    p_e = (lon - lon0) * EARTH_RADIUS * math.cos(lat)
    return p_n, p_e


def gnss_model(x: np.ndarray) -> np.ndarray:
    """Expected GNSS measurement: local NE position and inertial velocity."""
    R = rotation_body_to_inertial(x[6:9])
    v_i = R @ x[3:6]
    return np.array([x[0], x[1], v_i[0], v_i[1], v_i[2]])


def gnss_jacobian(x: np.ndarray) -> np.ndarray:
    C = np.zeros((5, 12))
    C[0, 0] = 1.0
    C[1, 1] = 1.0
    R = rotation_body_to_inertial(x[6:9])
    dR_dphi, dR_dtheta, dR_dpsi = rotation_partials(x[6:9])
    v = x[3:6]
    C[2:5, 3:6] = R
    C[2:5, 6] = dR_dphi @ v
    C[2:5, 7] = dR_dtheta @ v
    C[2:5, 8] = dR_dpsi @ v
    return C


@dataclass
class EkfConfig:
    noise: NoiseConfig
    n_substeps: int = 4
    p0_diag: np.ndarray = field(
        default_factory=lambda: np.array([5.0] * 3 + [1.0] * 3 + [0.05] * 3 + [1e-4] * 3)
    )
    x0: np.ndarray | None = None
    declination: float = 0.0
    origin: tuple[float, float] | None = None  # (lat, lon) rad; latched from first fix if None
    half_step_noise_scaling: bool = True
    cond_limit: float = 1e12
    # Mahalanobis gates (chi-square thresholds); None disables gating.
    gate_baro: float | None = None
    gate_mag: float | None = None
    gate_gnss: float | None = None


class Ekf:
    """Stateful filter wrapper: sensor ingestion, latching, bookkeeping.

    External serialization is assumed: all calls on one instance happen
    from a single logical thread. Faults latch; a faulted filter refuses
    further work.
    """

    def __init__(self, cfg: EkfConfig):
        self.cfg = cfg
        self.x = np.zeros(12) if cfg.x0 is None else np.asarray(cfg.x0, dtype=float).copy()
        self.P = np.diag(np.asarray(cfg.p0_diag, dtype=float))
        self.t: float | None = None
        self.origin = cfg.origin
        self.rho: float | None = None
        self.fault: str | None = None
        self._last_imu_stamp: float | None = None
        self._last_gyro = np.zeros(3)
        self.counters = {
            "propagations": 0,
            "baro_updates": 0,
            "mag_updates": 0,
            "gnss_updates": 0,
            "skipped_updates": 0,
            "gated_updates": 0,
        }

    def _check_ok(self):
        if self.fault is not None:
            raise EstimatorFault(self.fault)

    def _latch_fault(self, exc: Exception):
        self.fault = str(exc)
        raise EstimatorFault(self.fault) from exc

    def ingest(self, topic: str, stamp: float, payload) -> None:
        """Feed one sensor message; dispatches on topic name."""
        if topic == "imu":
            self.handle_imu(payload, stamp)
        elif topic == "baro":
            self.handle_baro(payload)
        elif topic == "mag":
            self.handle_mag(payload)
        elif topic == "gnss":
            self.handle_gnss(payload)

    def handle_imu(self, imu: ImuSample, stamp: float) -> None:
        self._check_ok()
        self._last_gyro = np.asarray(imu.gyro, dtype=float)
        if self._last_imu_stamp is None:
            self._last_imu_stamp = stamp
            self.t = stamp
            return
        t_s = stamp - self._last_imu_stamp
        if t_s <= 0.0:
            raise ValueError(f"non-increasing IMU stamp {stamp}")
        u = np.concatenate([imu.accel, imu.gyro])
        try:
            self.x, self.P = propagate_belief(
                self.x,
                self.P,
                u,
                t_s,
                self.cfg.n_substeps,
                self.cfg.noise,
                self.cfg.half_step_noise_scaling,
            )
        except EstimatorFault as exc:
            self._latch_fault(exc)
        self._last_imu_stamp = stamp
        self.t = stamp
        self.counters["propagations"] += 1

    def _apply_update(self, name, innovation, C, S, R, gate):
        innovation = np.atleast_1d(np.asarray(innovation, dtype=float))
        if gate is not None:
            S2 = np.atleast_2d(np.asarray(S, dtype=float))
            d2 = float(innovation @ np.linalg.solve(S2, innovation))
            if d2 > gate:
                self.counters["gated_updates"] += 1
                return
        try:
            self.x, self.P = joseph_update(
                self.x, self.P, innovation, C, S, R, self.cfg.cond_limit
            )
        except SingularInnovation:
            self.counters["skipped_updates"] += 1
            return
        except EstimatorFault as exc:
            self._latch_fault(exc)
        self.counters[name] += 1

    def handle_baro(self, z: BaroSample) -> None:
        self._check_ok()
        if self.rho is None:
            self.counters["skipped_updates"] += 1
            return
        if not math.isfinite(z.pressure):
            self._latch_fault(ValueError("non-finite barometer sample"))
        C = baro_jacobian(self.rho)
        innovation = z.pressure - baro_model(self.x, self.rho)
        S = self.cfg.noise.r_baro + (C @ self.P @ C.T)[0, 0]
        self._apply_update(
            "baro_updates", innovation, C, S, self.cfg.noise.r_baro, self.cfg.gate_baro
        )

    def handle_mag(self, z: MagSample) -> None:
        self._check_ok()
        try:
            heading = mag_heading(z.field, self.x[6:9], self.cfg.declination)
            F, G = mag_jacobians(z.field, self.x[6:9])
        except DegenerateField:
            self.counters["skipped_updates"] += 1
            return
        C = np.zeros((1, 12))
        C[0, 8] = 1.0
        innovation = wrap_angle(heading - self.x[8])
        S = innovation_covariance_full(F, self.cfg.noise.r_mag, G, self.P, C)
        r_eff = F @ self.cfg.noise.r_mag @ F.T
        self._apply_update("mag_updates", innovation, C, S, r_eff, self.cfg.gate_mag)

    def handle_gnss(self, z: GnssSample) -> None:
        self._check_ok()
        fields = [z.lat, z.lon, z.alt, *z.vel]
        if not all(math.isfinite(v) for v in fields):
            self._latch_fault(ValueError("non-finite GNSS sample"))
        if self.origin is None:
            self.origin = (z.lat, z.lon)
        if self.rho is None:
            self.rho = air_density(z.alt)
        p_n, p_e = gnss_to_local(z.lat, z.lon, self.origin)
        meas = np.array([p_n, p_e, z.vel[0], z.vel[1], z.vel[2]])
        innovation = meas - gnss_model(self.x)
        C = gnss_jacobian(self.x)
        R = np.diag(self.cfg.noise.r_gnss_diag)
        S = R + C @ self.P @ C.T
        self._apply_update("gnss_updates", innovation, C, S, R, self.cfg.gate_gnss)

    def estimate(self) -> StateEstimate:
        return StateEstimate(
            position=self.x[0:3].copy(),
            velocity=self.x[3:6].copy(),
            attitude=self.x[6:9].copy(),
            gyro_bias=self.x[9:12].copy(),
            omega=self._last_gyro - self.x[9:12],
        )
