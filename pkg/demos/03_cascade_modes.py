"""Route one example command through every cascade entry point.

Each mode accepts a different setpoint tuple and walks down the loop
chain until a firmware command pops out: an angle command (throttle +
attitude), a rate command, or a pass-through wrench for the mixer.
"""
import numpy as np

from quadsil.controller import CascadeController, GainSet
from quadsil.geometry import GRAVITY
from quadsil.messages import ControlCommand, StateEstimate

KIND_NAMES = {0: "angle", 1: "rate", 2: "pass-through"}
MODE_NAMES = [
    "NED-Pos Yaw", "NE-Vel D-Pos YawR", "FRD-Accel YawR", "NED-Vel YawR",
    "NE-Pos D-Vel Yaw", "Roll Pitch Yaw Throttle", "Roll Pitch YawR Throttle",
    "RollR PitchR YawR Throttle", "Pass-through", "Roll Pitch Yaw Thrust",
    "Roll Pitch YawR Thrust", "RollR PitchR YawR Thrust",
]

MASS, T_MAX = 2.0, 60.0
est = StateEstimate(
    position=np.array([1.0, -2.0, -4.0]),
    velocity=np.array([0.5, 0.0, -0.1]),
    attitude=np.array([0.02, -0.03, 0.4]),
    gyro_bias=np.zeros(3),
    omega=np.array([0.01, -0.02, 0.05]),
)

EXAMPLES = {
    0: (0.0, 0.0, -5.0, 0.6),
    1: (1.0, 0.5, -5.0, 0.1),
    2: (0.5, 0.2, -0.3, 0.1),
    3: (1.0, 0.0, -0.2, 0.1),
    4: (0.0, 0.0, -0.5, 0.6),
    5: (0.05, -0.05, 0.5, 0.35),
    6: (0.05, -0.05, 0.1, 0.35),
    7: (0.2, -0.1, 0.1, 0.35),
    8: (MASS * GRAVITY, 0.05, -0.02, 0.01),
    9: (0.05, -0.05, 0.5, MASS * GRAVITY),
    10: (0.05, -0.05, 0.1, MASS * GRAVITY),
    11: (0.2, -0.1, 0.1, MASS * GRAVITY),
}

print("vehicle estimate: 1 m north, -2 m east, hovering near 4 m altitude\n")
print(f"{'mode':>4}  {'name':<27} {'kind':<12} firmware vector (slots 2..5)")
for mode in range(12):
    ctl = CascadeController(GainSet(), mass=MASS, t_max=T_MAX)
    out = ctl.route(ControlCommand(mode=mode, values=EXAMPLES[mode]), est, dt=0.01)
    body = ", ".join(f"{v:+8.4f}" for v in out.u[2:6])
    print(f"{mode:>4}  {MODE_NAMES[mode]:<27} {KIND_NAMES[out.kind]:<12} [{body}]")

print("\nslots 0,1 and 6..9 stay zero in every kind; slot 2 carries throttle")
print("for angle/rate kinds and body-z thrust for pass-through.")
