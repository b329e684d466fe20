"""Scenario and mission configuration: YAML schema, defaults, validation.

A scenario file may specify any subset of the keys; unspecified values
fall back to the defaults below. Validation reports every problem with
its dotted field path so errors are addressable.

Mission files carry `v_max` and a `waypoints` list; each waypoint is
either NED meters (north/east/down + heading_deg) or geodetic
(lat_deg/lon_deg/alt_m + heading_deg), converted against the scenario
origin at load time.
"""
from __future__ import annotations

import copy
import hashlib
import json
import math

import numpy as np
import yaml

from .controller import GainSet
from .estimator import EkfConfig, NoiseConfig, gnss_to_local
from .navigation import FollowerGains, MissionPlan, Waypoint, leg_duration
from .sim import FirmwareGains, SensorConfig, VehicleParams

DEFAULTS: dict = {
    "seed": 42,
    "duration": 90.0,
    "physics_rate": 1000.0,
    "origin": {"lat_deg": 40.4168, "lon_deg": -3.7038, "alt_m": 657.0},
    "wind": [0.0, 0.0, 0.0],
    "vehicle": {
        "mass": 2.0,
        "inertia": [0.025, 0.025, 0.045],
        "arm_length": 0.325,
        "motor_max_thrust": 15.0,
        "thrust_to_torque": 0.016,
        "drag": [0.10, 0.10, 0.15],
        "motor_time_constant": 0.0,
    },
    "rates": {
        "imu": 250.0,
        "baro": 25.0,
        "mag": 50.0,
        "gnss": 5.0,
        "estimator": 250.0,
        "planner": 100.0,
        "manager": 100.0,
        "follower": 100.0,
        "controller": 100.0,
        "logger": 1000.0,
    },
    "sensors": {
        "accel_sigma": 0.25,
        "gyro_sigma": 0.005,
        "baro_sigma": 3.0,
        "mag_sigma": 0.005,
        "gnss_pos_sigma": 0.4,
        "gnss_vel_sigma": 0.03,
        "gnss_alt_sigma": 0.4,
        "accel_bias": [0.0, 0.0, 0.0],
        "gyro_bias": [0.01, -0.008, 0.006],
        "declination_deg": 0.0,
        "inclination_deg": 55.0,
    },
    "estimator": {
        "n_substeps": 4,
        "half_step_noise_scaling": True,
        "declination_deg": 0.0,
        "origin_from_config": True,
        "q_diag": [0.4, 0.4, 0.4, 2.5, 2.5, 2.5, 1e-3, 1e-3, 1e-3, 4e-4, 4e-4, 4e-4],
        "qu_diag": [1.0, 1.0, 1.0, 4e-4, 4e-4, 4e-4],
        "r_baro": 9.0,
        "r_mag_sigma": 0.005,
        "r_gnss": [0.16, 0.16, 9e-4, 9e-4, 9e-4],
        "p0_diag": [5.0, 5.0, 5.0, 1.0, 1.0, 1.0, 0.05, 0.05, 0.05, 1e-4, 1e-4, 1e-4],
        "gate_baro": None,
        "gate_mag": None,
        "gate_gnss": None,
    },
    "gains": {
        "follower": {
            "kp": [1.6, 1.6, 2.2],
            "kd": [2.4, 2.4, 2.8],
            "ki": [0.25, 0.25, 0.35],
            "k_yaw": 2.0,
            "integral_limit": 2.0,
            "tilt_limit_deg": 30.0,
        },
        "cascade": {
            "kp_pos_ne": 0.95,
            "kp_pos_d": 1.0,
            "vel_limit_ne": 5.0,
            "vel_limit_d": 2.0,
            "kp_yaw": 2.0,
            "yaw_rate_limit_deg": 180.0,
            "vel_kp": [2.0, 2.0, 2.5],
            "vel_ki": [0.3, 0.3, 0.4],
            "vel_kd": [0.1, 0.1, 0.1],
            "accel_limit": 8.0,
            "kp_att": [7.0, 7.0],
            "rate_kp": [0.55, 0.55, 0.7],
            "rate_ki": [0.1, 0.1, 0.1],
            "rate_kd": [0.002, 0.002, 0.0],
            "torque_limit": [2.5, 2.5, 1.2],
            "tilt_limit_deg": 30.0,
            "stale_estimate_timeout": 0.5,
        },
        "firmware": {
            "kp_att": [8.0, 8.0],
            "rate_kp": [0.8, 0.8, 0.4],
            "rate_ki": [0.3, 0.3, 0.15],
            "torque_limit": [3.0, 3.0, 1.5],
        },
    },
    "takeoff": {
        "altitude": 3.0,
        "climb_rate": 0.75,
        "capture_radius": 0.3,
        "completion_radius": 0.5,
    },
    "nodes": {
        "sim": "rigid_body",
        "estimator": "ekf",
        "planner": "waypoint",
        "manager": "smoothstep",
        "follower": "flatness",
        "controller": "cascade",
        "logger": "csv",
    },
}


class ConfigError(ValueError):
    """Carries a list of 'field.path: problem' diagnostics."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


def deep_merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = deep_merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def default_config() -> dict:
    return copy.deepcopy(DEFAULTS)


def load_config(path: str) -> dict:
    with open(path) as fh:
        raw = yaml.safe_load(fh) or {}
    if not isinstance(raw, dict):
        raise ConfigError([f"{path}: top level must be a mapping"])
    unknown = [k for k in raw if k not in DEFAULTS]
    problems = [f"{k}: unknown section" for k in unknown]
    cfg = deep_merge(DEFAULTS, {k: v for k, v in raw.items() if k not in unknown})
    problems += validate_config(cfg)
    if problems:
        raise ConfigError(problems)
    return cfg


def _finite_seq(value, n):
    return (
        isinstance(value, (list, tuple))
        and len(value) == n
        and all(isinstance(v, (int, float)) and math.isfinite(v) for v in value)
    )


def validate_config(cfg: dict) -> list[str]:
    problems = []

    def positive(path, value):
        if not isinstance(value, (int, float)) or not value > 0:
            problems.append(f"{path}: must be a positive number, got {value!r}")

    def non_negative(path, value):
        if not isinstance(value, (int, float)) or value < 0:
            problems.append(f"{path}: must be non-negative, got {value!r}")

    positive("duration", cfg["duration"])
    positive("physics_rate", cfg["physics_rate"])
    if not isinstance(cfg["seed"], int):
        problems.append(f"seed: must be an integer, got {cfg['seed']!r}")

    veh = cfg["vehicle"]
    for key in ("mass", "arm_length", "motor_max_thrust", "thrust_to_torque"):
        positive(f"vehicle.{key}", veh[key])
    non_negative("vehicle.motor_time_constant", veh["motor_time_constant"])
    for key, n in (("inertia", 3), ("drag", 3)):
        if not _finite_seq(veh[key], n):
            problems.append(f"vehicle.{key}: must be {n} finite numbers")
    if not _finite_seq(cfg["wind"], 3):
        problems.append("wind: must be 3 finite numbers")
    if (
        isinstance(veh.get("mass"), (int, float))
        and isinstance(veh.get("motor_max_thrust"), (int, float))
        and veh["mass"] > 0
        and 4.0 * veh["motor_max_thrust"] < 1.5 * veh["mass"] * 9.80665
    ):
        problems.append("vehicle.motor_max_thrust: hover margin requires 4*T_motor >= 1.5*m*g")

    origin = cfg["origin"]
    if not isinstance(origin.get("lat_deg"), (int, float)) or abs(origin["lat_deg"]) > 90:
        problems.append("origin.lat_deg: must be within [-90, 90]")
    if not isinstance(origin.get("lon_deg"), (int, float)) or abs(origin["lon_deg"]) > 180:
        problems.append("origin.lon_deg: must be within [-180, 180]")
    if not isinstance(origin.get("alt_m"), (int, float)) or not 0 <= origin["alt_m"] < 11000:
        problems.append("origin.alt_m: must be within [0, 11000) for the atmosphere model")

    rates = cfg["rates"]
    for name, value in rates.items():
        positive(f"rates.{name}", value)
    physics = cfg["physics_rate"]
    if not problems:
        for name, value in rates.items():
            period = physics / value
            if abs(period - round(period)) > 1e-9:
                problems.append(f"rates.{name}: {value} must divide physics_rate {physics}")
        for name in ("imu", "baro", "mag", "gnss"):
            ratio = rates["estimator"] / rates[name]
            if abs(ratio - round(ratio)) > 1e-9 or ratio < 1:
                problems.append(
                    f"rates.{name}: must divide rates.estimator for deterministic replay"
                )

    sensors = cfg["sensors"]
    for key in (
        "accel_sigma", "gyro_sigma", "baro_sigma", "mag_sigma",
        "gnss_pos_sigma", "gnss_vel_sigma", "gnss_alt_sigma",
    ):
        non_negative(f"sensors.{key}", sensors[key])
    for key in ("accel_bias", "gyro_bias"):
        if not _finite_seq(sensors[key], 3):
            problems.append(f"sensors.{key}: must be 3 finite numbers")

    est = cfg["estimator"]
    if not isinstance(est["n_substeps"], int) or est["n_substeps"] < 1:
        problems.append("estimator.n_substeps: must be a positive integer")
    for key, n in (("q_diag", 12), ("qu_diag", 6), ("r_gnss", 5), ("p0_diag", 12)):
        if not _finite_seq(est[key], n):
            problems.append(f"estimator.{key}: must be {n} finite numbers")
        elif any(v < 0 for v in est[key]):
            problems.append(f"estimator.{key}: entries must be non-negative")
    non_negative("estimator.r_baro", est["r_baro"])
    non_negative("estimator.r_mag_sigma", est["r_mag_sigma"])

    take = cfg["takeoff"]
    positive("takeoff.altitude", take["altitude"])
    positive("takeoff.climb_rate", take["climb_rate"])
    positive("takeoff.capture_radius", take["capture_radius"])
    positive("takeoff.completion_radius", take["completion_radius"])
    return problems


def origin_radians(cfg: dict) -> tuple[float, float, float]:
    o = cfg["origin"]
    return math.radians(o["lat_deg"]), math.radians(o["lon_deg"]), float(o["alt_m"])


def load_mission(path: str, cfg: dict) -> MissionPlan:
    with open(path) as fh:
        raw = yaml.safe_load(fh) or {}
    problems = []
    if not isinstance(raw, dict):
        raise ConfigError([f"{path}: top level must be a mapping"])
    v_max = raw.get("v_max")
    if not isinstance(v_max, (int, float)) or not v_max > 0:
        problems.append("v_max: must be a positive number")
    entries = raw.get("waypoints")
    if not isinstance(entries, list) or not entries:
        problems.append("waypoints: must be a non-empty list")
        raise ConfigError(problems)
    lat0, lon0, alt0 = origin_radians(cfg)
    waypoints = []
    for i, entry in enumerate(entries):
        label = f"waypoints[{i}]"
        if not isinstance(entry, dict):
            problems.append(f"{label}: must be a mapping")
            continue
        heading = entry.get("heading_deg")
        if not isinstance(heading, (int, float)) or not math.isfinite(heading):
            problems.append(f"{label}.heading_deg: must be a finite number")
            continue
        if {"north", "east", "down"} <= set(entry):
            coords = [entry["north"], entry["east"], entry["down"]]
            if not _finite_seq(coords, 3):
                problems.append(f"{label}: north/east/down must be finite numbers")
                continue
            position = np.array(coords, dtype=float)
        elif {"lat_deg", "lon_deg", "alt_m"} <= set(entry):
            lla = [entry["lat_deg"], entry["lon_deg"], entry["alt_m"]]
            if not _finite_seq(lla, 3):
                problems.append(f"{label}: lat_deg/lon_deg/alt_m must be finite numbers")
                continue
            p_n, p_e = gnss_to_local(
                math.radians(lla[0]), math.radians(lla[1]), (lat0, lon0)
            )
            position = np.array([p_n, p_e, alt0 - lla[2]])
        else:
            problems.append(f"{label}: need north/east/down or lat_deg/lon_deg/alt_m")
            continue
        waypoints.append(Waypoint(position, math.radians(heading)))
    if problems:
        raise ConfigError(problems)
    plan = MissionPlan(waypoints=waypoints, v_max=float(v_max), origin=(lat0, lon0, alt0))
    problems += validate_mission(plan, cfg)
    if problems:
        raise ConfigError(problems)
    return plan


def validate_mission(plan: MissionPlan, cfg: dict) -> list[str]:
    """Physical sanity: legs must be flyable within the tilt envelope."""
    problems = []
    tilt = math.radians(cfg["gains"]["follower"]["tilt_limit_deg"])
    max_accel = 9.80665 * math.tan(tilt)
    for i, (a, b) in enumerate(zip(plan.waypoints, plan.waypoints[1:])):
        duration = leg_duration(a, b, plan.v_max)
        dist = float(np.linalg.norm(b.position - a.position))
        peak_accel = 5.7735 * dist / duration**2  # max |d2 sigma/d tau2| ~ 10/sqrt(3)
        if peak_accel > max_accel:
            problems.append(
                f"waypoints[{i + 1}]: leg demands {peak_accel:.1f} m/s^2, "
                f"beyond the {max_accel:.1f} m/s^2 tilt envelope"
            )
    return problems


def config_hash(cfg: dict) -> str:
    canon = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


# -- builders ---------------------------------------------------------------


def build_vehicle(cfg: dict) -> VehicleParams:
    v = cfg["vehicle"]
    return VehicleParams(
        mass=v["mass"],
        inertia=np.array(v["inertia"], dtype=float),
        arm_length=v["arm_length"],
        motor_max_thrust=v["motor_max_thrust"],
        thrust_to_torque=v["thrust_to_torque"],
        drag=np.array(v["drag"], dtype=float),
        motor_time_constant=v["motor_time_constant"],
    )


def build_sensor_config(cfg: dict) -> SensorConfig:
    s = cfg["sensors"]
    r = cfg["rates"]
    return SensorConfig(
        imu_rate=r["imu"],
        baro_rate=r["baro"],
        mag_rate=r["mag"],
        gnss_rate=r["gnss"],
        accel_sigma=s["accel_sigma"],
        gyro_sigma=s["gyro_sigma"],
        baro_sigma=s["baro_sigma"],
        mag_sigma=s["mag_sigma"],
        gnss_pos_sigma=s["gnss_pos_sigma"],
        gnss_vel_sigma=s["gnss_vel_sigma"],
        gnss_alt_sigma=s["gnss_alt_sigma"],
        accel_bias=np.array(s["accel_bias"], dtype=float),
        gyro_bias=np.array(s["gyro_bias"], dtype=float),
        declination=math.radians(s["declination_deg"]),
        inclination=math.radians(s["inclination_deg"]),
        seed=cfg["seed"],
    )


def build_ekf_config(cfg: dict) -> EkfConfig:
    e = cfg["estimator"]
    noise = NoiseConfig(
        q_diag=np.array(e["q_diag"], dtype=float),
        qu_diag=np.array(e["qu_diag"], dtype=float),
        r_baro=float(e["r_baro"]),
        r_mag=np.eye(3) * float(e["r_mag_sigma"]) ** 2,
        r_gnss_diag=np.array(e["r_gnss"], dtype=float),
    )
    origin = None
    if e["origin_from_config"]:
        lat, lon, _ = origin_radians(cfg)
        origin = (lat, lon)
    return EkfConfig(
        noise=noise,
        n_substeps=e["n_substeps"],
        p0_diag=np.array(e["p0_diag"], dtype=float),
        declination=math.radians(e["declination_deg"]),
        origin=origin,
        half_step_noise_scaling=bool(e["half_step_noise_scaling"]),
        gate_baro=e["gate_baro"],
        gate_mag=e["gate_mag"],
        gate_gnss=e["gate_gnss"],
    )


def build_follower_gains(cfg: dict) -> FollowerGains:
    f = cfg["gains"]["follower"]
    return FollowerGains(
        kp=np.array(f["kp"], dtype=float),
        kd=np.array(f["kd"], dtype=float),
        ki=np.array(f["ki"], dtype=float),
        k_yaw=f["k_yaw"],
        integral_limit=f["integral_limit"],
        tilt_limit=math.radians(f["tilt_limit_deg"]),
    )


def build_cascade_gains(cfg: dict) -> GainSet:
    c = cfg["gains"]["cascade"]
    return GainSet(
        kp_pos_ne=c["kp_pos_ne"],
        kp_pos_d=c["kp_pos_d"],
        vel_limit_ne=c["vel_limit_ne"],
        vel_limit_d=c["vel_limit_d"],
        kp_yaw=c["kp_yaw"],
        yaw_rate_limit=math.radians(c["yaw_rate_limit_deg"]),
        vel_kp=np.array(c["vel_kp"], dtype=float),
        vel_ki=np.array(c["vel_ki"], dtype=float),
        vel_kd=np.array(c["vel_kd"], dtype=float),
        accel_limit=c["accel_limit"],
        kp_att=np.array(c["kp_att"], dtype=float),
        rate_kp=np.array(c["rate_kp"], dtype=float),
        rate_ki=np.array(c["rate_ki"], dtype=float),
        rate_kd=np.array(c["rate_kd"], dtype=float),
        torque_limit=np.array(c["torque_limit"], dtype=float),
        tilt_limit=math.radians(c["tilt_limit_deg"]),
        stale_estimate_timeout=c["stale_estimate_timeout"],
    )


def build_firmware_gains(cfg: dict) -> FirmwareGains:
    f = cfg["gains"]["firmware"]
    return FirmwareGains(
        kp_att=np.array(f["kp_att"], dtype=float),
        rate_kp=np.array(f["rate_kp"], dtype=float),
        rate_ki=np.array(f["rate_ki"], dtype=float),
        torque_limit=np.array(f["torque_limit"], dtype=float),
    )
