"""quadsil: a software-in-the-loop multirotor autonomy stack.

Library layout:

- geometry: attitude kinematics, angle wrapping, smoothstep
- estimator: 12-state extended Kalman filter (IMU propagation;
  barometer, magnetometer, GNSS updates)
- navigation: waypoint planner, smoothstep path manager, trajectory
  follower with flatness feedforward
- controller: 12-entry-point cascaded PID controller
- sim: rigid-body quadrotor truth model, firmware emulation, mixer,
  synthetic sensors
- runtime: typed message bus, node registry, deterministic fixed-step
  scheduler, CSV record/replay
- cli: sim-run / replay-estimator / validate entry points
"""

from . import geometry
from .geometry import GRAVITY, wrap_angle

__all__ = ["geometry", "GRAVITY", "wrap_angle"]
__version__ = "0.1.0"
