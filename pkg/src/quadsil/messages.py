"""Bus message payloads and their flat CSV row schemas.

Every payload is an immutable-by-convention dataclass with a COLUMNS
tuple (time column excluded; the bus stamps messages), a to_row() that
flattens to plain floats/ints, and a from_row() that rebuilds the
payload from a parsed CSV row. Column order is stable: it defines the
on-disk log schema.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

ANGLE = 0
RATE = 1
PASSTHROUGH = 2

FIRMWARE_KIND_NAMES = {ANGLE: "angle", RATE: "rate", PASSTHROUGH: "pass-through"}


@dataclass
class ImuSample:
    accel: np.ndarray  # specific force, body frame, m/s^2
    gyro: np.ndarray  # angular rate, body frame, rad/s

    COLUMNS = ("ax", "ay", "az", "gx", "gy", "gz")
    UNITS = ("m/s^2",) * 3 + ("rad/s",) * 3

    def to_row(self):
        return [*map(float, self.accel), *map(float, self.gyro)]

    @classmethod
    def from_row(cls, row):
        return cls(accel=np.array(row[0:3]), gyro=np.array(row[3:6]))


@dataclass
class BaroSample:
    pressure: float  # gauge static pressure relative to start altitude, Pa

    COLUMNS = ("pressure",)
    UNITS = ("Pa",)

    def to_row(self):
        return [float(self.pressure)]

    @classmethod
    def from_row(cls, row):
        return cls(pressure=row[0])


@dataclass
class MagSample:
    field: np.ndarray  # body-frame magnetic field, unit-scale

    COLUMNS = ("mx", "my", "mz")
    UNITS = ("field",) * 3

    def to_row(self):
        return [*map(float, self.field)]

    @classmethod
    def from_row(cls, row):
        return cls(field=np.array(row[0:3]))


@dataclass
class GnssSample:
    lat: float  # rad
    lon: float  # rad
    alt: float  # m above mean sea level
    vel: np.ndarray  # NED inertial velocity, m/s

    COLUMNS = ("lat", "lon", "alt", "vn", "ve", "vd")
    UNITS = ("rad", "rad", "m", "m/s", "m/s", "m/s")

    def to_row(self):
        return [float(self.lat), float(self.lon), float(self.alt), *map(float, self.vel)]

    @classmethod
    def from_row(cls, row):
        return cls(lat=row[0], lon=row[1], alt=row[2], vel=np.array(row[3:6]))


@dataclass
class TruthState:
    position: np.ndarray  # NED, m
    velocity: np.ndarray  # body frame, m/s
    attitude: np.ndarray  # roll, pitch, yaw, rad
    omega: np.ndarray  # body rates, rad/s

    COLUMNS = ("pn", "pe", "pd", "u", "v", "w", "phi", "theta", "psi", "p", "q", "r")
    UNITS = ("m",) * 3 + ("m/s",) * 3 + ("rad",) * 3 + ("rad/s",) * 3

    def to_row(self):
        return [
            *map(float, self.position),
            *map(float, self.velocity),
            *map(float, self.attitude),
            *map(float, self.omega),
        ]

    @classmethod
    def from_row(cls, row):
        return cls(
            position=np.array(row[0:3]),
            velocity=np.array(row[3:6]),
            attitude=np.array(row[6:9]),
            omega=np.array(row[9:12]),
        )

    def copy(self):
        return TruthState(
            self.position.copy(), self.velocity.copy(), self.attitude.copy(), self.omega.copy()
        )


@dataclass
class StateEstimate:
    position: np.ndarray  # NED, m
    velocity: np.ndarray  # body frame, m/s
    attitude: np.ndarray  # roll, pitch, yaw, rad
    gyro_bias: np.ndarray  # rad/s
    omega: np.ndarray  # bias-corrected body rates, rad/s

    COLUMNS = (
        "pn", "pe", "pd", "u", "v", "w", "phi", "theta", "psi",
        "bgx", "bgy", "bgz", "p", "q", "r",
    )
    UNITS = ("m",) * 3 + ("m/s",) * 3 + ("rad",) * 3 + ("rad/s",) * 6

    def to_row(self):
        return [
            *map(float, self.position),
            *map(float, self.velocity),
            *map(float, self.attitude),
            *map(float, self.gyro_bias),
            *map(float, self.omega),
        ]

    @classmethod
    def from_row(cls, row):
        return cls(
            position=np.array(row[0:3]),
            velocity=np.array(row[3:6]),
            attitude=np.array(row[6:9]),
            gyro_bias=np.array(row[9:12]),
            omega=np.array(row[12:15]),
        )


@dataclass
class TrajectorySetpoint:
    position: np.ndarray  # NED, m
    velocity: np.ndarray  # NED, m/s
    acceleration: np.ndarray  # NED, m/s^2
    heading: float  # rad
    heading_rate: float  # rad/s
    heading_accel: float  # rad/s^2
    leg: int = 0  # active leg index, used for integrator resets downstream

    COLUMNS = ("pn", "pe", "pd", "vn", "ve", "vd", "an", "ae", "ad",
               "psi", "psid", "psidd", "leg")
    UNITS = ("m",) * 3 + ("m/s",) * 3 + ("m/s^2",) * 3 + ("rad", "rad/s", "rad/s^2", "index")

    def to_row(self):
        return [
            *map(float, self.position),
            *map(float, self.velocity),
            *map(float, self.acceleration),
            float(self.heading),
            float(self.heading_rate),
            float(self.heading_accel),
            int(self.leg),
        ]

    @classmethod
    def from_row(cls, row):
        return cls(
            position=np.array(row[0:3]),
            velocity=np.array(row[3:6]),
            acceleration=np.array(row[6:9]),
            heading=row[9],
            heading_rate=row[10],
            heading_accel=row[11],
            leg=int(row[12]),
        )


@dataclass
class AngleThrustSetpoint:
    roll: float  # rad
    pitch: float  # rad
    yaw_rate: float  # rad/s
    thrust: float  # N, total, positive up

    COLUMNS = ("roll", "pitch", "yaw_rate", "thrust")
    UNITS = ("rad", "rad", "rad/s", "N")

    def to_row(self):
        return [float(self.roll), float(self.pitch), float(self.yaw_rate), float(self.thrust)]

    @classmethod
    def from_row(cls, row):
        return cls(*row)


@dataclass
class ControlCommand:
    mode: int  # entry point 0..11
    values: tuple  # four mode-specific setpoints

    COLUMNS = ("mode", "v0", "v1", "v2", "v3")
    UNITS = ("index",) + ("mode-specific",) * 4

    def to_row(self):
        return [int(self.mode), *map(float, self.values)]

    @classmethod
    def from_row(cls, row):
        return cls(mode=int(row[0]), values=tuple(row[1:5]))


@dataclass
class FirmwareCommand:
    kind: int  # ANGLE / RATE / PASSTHROUGH
    u: np.ndarray  # 10-element command vector; slots 0,1,6..9 are zero

    COLUMNS = ("kind",) + tuple(f"u{i}" for i in range(10))
    UNITS = ("kind",) + ("mixed",) * 10

    def to_row(self):
        return [int(self.kind), *map(float, self.u)]

    @classmethod
    def from_row(cls, row):
        return cls(kind=int(row[0]), u=np.array(row[1:11]))


@dataclass
class MotorThrusts:
    thrusts: np.ndarray  # per-motor thrust, N
    saturated: int  # 1 if the mixer clamped

    COLUMNS = ("t0", "t1", "t2", "t3", "saturated")
    UNITS = ("N",) * 4 + ("flag",)

    def to_row(self):
        return [*map(float, self.thrusts), int(self.saturated)]

    @classmethod
    def from_row(cls, row):
        return cls(thrusts=np.array(row[0:4]), saturated=int(row[4]))


@dataclass
class MissionStatus:
    phase: int  # 0 takeoff, 1 mission, 2 hold/complete
    active_leg: int
    complete: int

    COLUMNS = ("phase", "active_leg", "complete")
    UNITS = ("enum", "index", "flag")

    def to_row(self):
        return [int(self.phase), int(self.active_leg), int(self.complete)]

    @classmethod
    def from_row(cls, row):
        return cls(*(int(v) for v in row))


@dataclass
class ParamUpdate:
    role: str
    name: str
    value: float

    COLUMNS = ("role", "name", "value")
    UNITS = ("str", "str", "mixed")

    def to_row(self):
        return [self.role, self.name, float(self.value)]

    @classmethod
    def from_row(cls, row):
        return cls(role=str(row[0]), name=str(row[1]), value=float(row[2]))


# Canonical topic names and payload classes. Sensor topics are the replay
# surface; the rest are logged for analysis.
TOPIC_SCHEMAS = {
    "imu": ImuSample,
    "baro": BaroSample,
    "mag": MagSample,
    "gnss": GnssSample,
    "truth": TruthState,
    "estimate": StateEstimate,
    "trajectory": TrajectorySetpoint,
    "follower": AngleThrustSetpoint,
    "command": ControlCommand,
    "firmware": FirmwareCommand,
    "motors": MotorThrusts,
    "mission": MissionStatus,
    "params": ParamUpdate,
}

SENSOR_TOPICS = ("imu", "baro", "mag", "gnss")

# Fixed ingestion priority for sensor messages sharing a timestamp: the
# estimator propagates on IMU first, then latches origin/density from
# GNSS before the pressure and heading updates.
SENSOR_PRIORITY = {"imu": 0, "gnss": 1, "baro": 2, "mag": 3}
