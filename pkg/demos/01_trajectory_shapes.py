"""Walk through the smoothstep trajectory machinery.

Shows the quintic interpolant's endpoint behavior, how leg durations are
chosen so the peak speed hits the configured maximum, and what the
sampled setpoints look like along one leg of the three-waypoint mission.
"""
import math

import numpy as np

from quadsil.geometry import quintic_smoothstep
from quadsil.navigation import Waypoint, WaypointLeg, leg_duration, sample_leg

print("quintic smoothstep: sigma(tau) = 6 tau^5 - 15 tau^4 + 10 tau^3")
print(f"{'tau':>5} {'sigma':>8} {'dsigma':>8} {'ddsigma':>9}")
for tau in (0.0, 0.25, 0.5, 0.75, 1.0):
    s, ds, dds = quintic_smoothstep(tau)
    print(f"{tau:5.2f} {s:8.4f} {ds:8.4f} {dds:9.4f}")
print("note the vanishing first and second derivatives at both ends,")
print("and the peak slope 1.875 at the midpoint.\n")

w1 = Waypoint(np.array([0.0, 0.0, -5.0]), math.radians(130.0))
w2 = Waypoint(np.array([-20.0, 0.0, -8.0]), math.radians(130.0))
v_max = 3.0
T = leg_duration(w1, w2, v_max)
dist = np.linalg.norm(w2.position - w1.position)
print(f"leg w1 -> w2: |dp| = {dist:.3f} m, v_max = {v_max} m/s")
print(f"duration = |dp| * 1.875 / v_max = {T:.3f} s")
print("(1.875 is the peak slope, so the mid-leg speed just touches v_max)\n")

leg = WaypointLeg(w1, w2, T)
print(f"{'t [s]':>7} {'north':>8} {'down':>8} {'speed':>7} {'accel':>7}")
for frac in np.linspace(0.0, 1.0, 9):
    sp = sample_leg(leg, frac * T)
    speed = np.linalg.norm(sp.velocity)
    accel = np.linalg.norm(sp.acceleration)
    print(f"{frac * T:7.2f} {sp.position[0]:8.3f} {sp.position[2]:8.3f} "
          f"{speed:7.3f} {accel:7.3f}")
print("\nboth ends are at rest, so consecutive legs chain without jerk.")
