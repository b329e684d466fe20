"""Attitude kinematics and small math utilities shared by the whole stack.

Conventions: NED inertial frame (x north, y east, z down), body frame
x forward / y right / z down, ZYX Euler angles (yaw, pitch, roll).
Angles are radians, normalized to (-pi, pi].
"""
from __future__ import annotations

import math

import numpy as np

GRAVITY = 9.80665  # m/s^2
EARTH_RADIUS = 6378137.0  # m, spherical earth
GIMBAL_GUARD = 1e-3  # rad, minimum distance of |pitch| from pi/2

TWO_PI = 2.0 * math.pi


class GimbalLockError(ValueError):
    """Pitch is too close to +/-90 deg for Euler-rate kinematics."""


def wrap_angle(a: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    r = math.remainder(a, TWO_PI)
    if r <= -math.pi:
        r = math.pi
    return r


def rotation_body_to_inertial(att) -> np.ndarray:
    """ZYX rotation matrix taking body-frame vectors into the inertial frame."""
    phi, theta, psi = float(att[0]), float(att[1]), float(att[2])
    cphi, sphi = math.cos(phi), math.sin(phi)
    cth, sth = math.cos(theta), math.sin(theta)
    cpsi, spsi = math.cos(psi), math.sin(psi)
    return np.array(
        [
            [cth * cpsi, sphi * sth * cpsi - cphi * spsi, cphi * sth * cpsi + sphi * spsi],
            [cth * spsi, sphi * sth * spsi + cphi * cpsi, cphi * sth * spsi - sphi * cpsi],
            [-sth, sphi * cth, cphi * cth],
        ]
    )


def rotation_partials(att) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Partial derivatives of rotation_body_to_inertial w.r.t. (roll, pitch, yaw)."""
    phi, theta, psi = float(att[0]), float(att[1]), float(att[2])
    cphi, sphi = math.cos(phi), math.sin(phi)
    cth, sth = math.cos(theta), math.sin(theta)
    cpsi, spsi = math.cos(psi), math.sin(psi)

    rz = np.array([[cpsi, -spsi, 0.0], [spsi, cpsi, 0.0], [0.0, 0.0, 1.0]])
    ry = np.array([[cth, 0.0, sth], [0.0, 1.0, 0.0], [-sth, 0.0, cth]])
    rx = np.array([[1.0, 0.0, 0.0], [0.0, cphi, -sphi], [0.0, sphi, cphi]])

    drz = np.array([[-spsi, -cpsi, 0.0], [cpsi, -spsi, 0.0], [0.0, 0.0, 0.0]])
    dry = np.array([[-sth, 0.0, cth], [0.0, 0.0, 0.0], [-cth, 0.0, -sth]])
    drx = np.array([[0.0, 0.0, 0.0], [0.0, -sphi, -cphi], [0.0, cphi, -sphi]])

    d_phi = rz @ ry @ drx
    d_theta = rz @ dry @ rx
    d_psi = drz @ ry @ rx
    return d_phi, d_theta, d_psi


def euler_kinematics(att, guard: float = GIMBAL_GUARD) -> np.ndarray:
    """Matrix mapping body rates to Euler-angle rates.

    Raises GimbalLockError when |pitch| is within `guard` of pi/2.
    """
    phi, theta = float(att[0]), float(att[1])
    if abs(theta) >= math.pi / 2.0 - guard:
        raise GimbalLockError(f"pitch {theta:.4f} rad is inside the gimbal guard")
    cphi, sphi = math.cos(phi), math.sin(phi)
    tth = math.tan(theta)
    sec = 1.0 / math.cos(theta)
    return np.array(
        [
            [1.0, sphi * tth, cphi * tth],
            [0.0, cphi, -sphi],
            [0.0, sphi * sec, cphi * sec],
        ]
    )


def euler_kinematics_partials(att, guard: float = GIMBAL_GUARD) -> tuple[np.ndarray, np.ndarray]:
    """Partials of euler_kinematics w.r.t. roll and pitch (yaw partial is zero)."""
    phi, theta = float(att[0]), float(att[1])
    if abs(theta) >= math.pi / 2.0 - guard:
        raise GimbalLockError(f"pitch {theta:.4f} rad is inside the gimbal guard")
    cphi, sphi = math.cos(phi), math.sin(phi)
    tth = math.tan(theta)
    sec = 1.0 / math.cos(theta)
    d_phi = np.array(
        [
            [0.0, cphi * tth, -sphi * tth],
            [0.0, -sphi, -cphi],
            [0.0, cphi * sec, -sphi * sec],
        ]
    )
    d_theta = np.array(
        [
            [0.0, sphi * sec * sec, cphi * sec * sec],
            [0.0, 0.0, 0.0],
            [0.0, sphi * sec * tth, cphi * sec * tth],
        ]
    )
    return d_phi, d_theta


def euler_from_rotation(R) -> np.ndarray:
    """Extract ZYX Euler angles (roll, pitch, yaw) from a rotation matrix."""
    pitch = -math.asin(max(-1.0, min(1.0, float(R[2, 0]))))
    roll = math.atan2(float(R[2, 1]), float(R[2, 2]))
    yaw = math.atan2(float(R[1, 0]), float(R[0, 0]))
    return np.array([roll, pitch, yaw])


def skew(v) -> np.ndarray:
    """Cross-product matrix: skew(v) @ w == cross(v, w)."""
    x, y, z = float(v[0]), float(v[1]), float(v[2])
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def quintic_smoothstep(tau: float) -> tuple[float, float, float]:
    """Quintic smoothstep and its first two derivatives.

    sigma = 6 tau^5 - 15 tau^4 + 10 tau^3; out-of-range tau is clamped
    to [0, 1]. Endpoint values and derivatives are exact: (0,0,0) at 0
    and (1,0,0) at 1. Peak slope is 1.875 at tau = 0.5.
    """
    t = float(tau)
    if t < 0.0:
        t = 0.0
    elif t > 1.0:
        t = 1.0
    t2 = t * t
    t3 = t2 * t
    sigma = t3 * (6.0 * t2 - 15.0 * t + 10.0)
    dsigma = 30.0 * t2 * (t - 1.0) * (t - 1.0)
    ddsigma = t * (120.0 * t2 - 180.0 * t + 60.0)
    return sigma, dsigma, ddsigma


SMOOTHSTEP_PEAK_SLOPE = 1.875  # max d(sigma)/d(tau), attained at tau = 0.5
