"""Arrival times on a small grid, and the greedy walk that follows them.

Run: python demos/01_arrival_times.py
"""

import math

import numpy as np

from stubborn.planner import fmm_solve, next_action
from stubborn.world_sim import FORWARD, TURN_LEFT

# A 20 x 30 room with a wall that has one gap near the bottom.
blocked = np.zeros((20, 30), dtype=bool)
blocked[0:16, 15] = True
goal = (27, 3)  # (x, y)
field = fmm_solve(blocked, goal)

# Arrival times in cell units; the wall forces a detour through the gap.
T = field.arrival
print("arrival time at the start (2, 3):", round(T[3, 2], 2))
print("straight-line distance:          ", round(math.hypot(27 - 2, 0), 2))

# Render the field coarsely: digits are tens of cells, '#' is wall.
for y in range(20):
    row = "".join("#" if blocked[y, x] else str(min(int(T[y, x] // 10), 9)) for x in range(30))
    print(row)

# Walk it: the agent turns in 30 degree steps and moves one cell per forward here.
x, y, heading = 2, 3, 0.0
steps = {"forward": 0, "turns": 0}
for _ in range(200):
    if (x, y) == goal:
        break
    a = next_action(field, (x, y), heading)
    if a == FORWARD:
        # snap the heading to the nearest of the 8 grid directions for this toy walk
        b = round(heading / 45.0) * 45.0
        x += round(math.cos(math.radians(b)))
        y -= round(math.sin(math.radians(b)))
        steps["forward"] += 1
    else:
        heading = (heading + (30.0 if a == TURN_LEFT else -30.0)) % 360.0
        steps["turns"] += 1
print("reached", (x, y), "with", steps)
