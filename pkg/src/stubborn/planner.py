"""Closed-loop path planning on the local window.

Every step the planner solves an Eikonal problem from the goal over the chosen
obstacle view, then steps greedily down the arrival-time field. Which view is
used depends on the goal kind and on the collision-avoidance switches; a
scripted turn/forward routine takes over after repeated failed forward moves.
"""

import math
from dataclasses import dataclass, replace

import numpy as np

from .fmm import arrival_times
from .grid_map import DEPTH_ONLY, OPTIMISTIC, PESSIMISTIC
from .world_sim import FORWARD, TURN_LEFT, TURN_RIGHT

EXPLORATION = "exploration"
TARGET = "target"

NORMAL = "normal"
UNTRAP = "untrap"
LEFT = "left"
RIGHT = "right"

UNTRAP_THRESHOLD = 10
SNAP_RADIUS = 5
FORWARD_TOLERANCE_DEG = 15.0

# 8-neighbourhood as (dx, dy) with the bearing in degrees (x east, y south, CCW)
_NEIGHBOURS = [
    (dx, dy, math.degrees(math.atan2(-dy, dx)) % 360.0)
    for dy in (-1, 0, 1)
    for dx in (-1, 0, 1)
    if dx or dy
]


class GoalUnreachable(ValueError):
    pass


class Stranded(RuntimeError):
    pass


@dataclass(frozen=True)
class Ablation:
    """Collision-avoidance switches; all on is the full agent."""

    bf_untrap: bool = True
    col_obs: bool = True
    col_aver: bool = True
    vis_path: bool = True

    def as_dict(self):
        return {"BFUntrap": self.bf_untrap, "ColObs": self.col_obs, "ColAver": self.col_aver, "VisPath": self.vis_path}


# rows I..V: each row adds one switch to the previous one
ABLATION_LADDER = {
    "I": Ablation(False, False, False, False),
    "II": Ablation(True, False, False, False),
    "III": Ablation(True, True, False, False),
    "IV": Ablation(True, True, True, False),
    "V": Ablation(True, True, True, True),
}


@dataclass
class CostField:
    arrival: np.ndarray  # indexed [y, x], cell units
    goal: tuple  # (x, y) in the field's own grid
    complete: bool = True


def snap_goal(blocked, goal, radius=SNAP_RADIUS):
    """Nearest free cell to ``goal`` in Chebyshev rings, ties by lowest (y, x); None if none."""
    H, W = blocked.shape
    gx, gy = goal
    for r in range(radius + 1):
        best = None
        for y in range(gy - r, gy + r + 1):
            if y < 0 or y >= H:
                continue
            if abs(y - gy) == r:
                xs = range(gx - r, gx + r + 1)
            else:
                xs = (gx - r, gx + r) if r else (gx,)
            for x in xs:
                if 0 <= x < W and not blocked[y, x]:
                    best = (x, y)
                    break
            if best is not None:
                return best
    return None


def fmm_solve(obstacles, goal, stop_at=None):
    """Arrival times from ``goal`` (x, y) over the free cells of ``obstacles``.

    With ``stop_at`` the march halts once that cell is final; values of cells
    not yet final are then upper bounds and ``complete`` is False.
    """
    obstacles = np.asarray(obstacles, dtype=bool)
    gx, gy = goal
    H, W = obstacles.shape
    if not (0 <= gx < W and 0 <= gy < H) or obstacles[gy, gx]:
        raise GoalUnreachable("goal unreachable")
    stop = None if stop_at is None else (stop_at[1], stop_at[0])
    T, _, complete = arrival_times(obstacles, [(gy, gx)], stop=stop)
    return CostField(arrival=T, goal=(gx, gy), complete=complete)


def feasible(field, start):
    x, y = start
    H, W = field.arrival.shape
    return 0 <= x < W and 0 <= y < H and bool(np.isfinite(field.arrival[y, x]))


def _wrap180(angle):
    a = (angle + 180.0) % 360.0 - 180.0
    return 180.0 if a == -180.0 else a


def next_action(field, cell, heading_deg, tolerance_deg=FORWARD_TOLERANCE_DEG):
    """Greedy descent: face the cheapest neighbour, then move forward."""
    T = field.arrival
    H, W = T.shape
    x, y = cell
    best = None
    for dx, dy, bearing in _NEIGHBOURS:
        nx, ny = x + dx, y + dy
        if not (0 <= nx < W and 0 <= ny < H):
            continue
        t = T[ny, nx]
        if not t < math.inf:
            continue
        cw = (heading_deg - bearing) % 360.0
        key = (t, cw)
        if best is None or key < best[0]:
            best = (key, bearing)
    if best is None:
        raise Stranded("stranded")
    diff = _wrap180(best[1] - heading_deg)
    if abs(diff) <= tolerance_deg:
        return FORWARD
    return TURN_LEFT if diff > 0 else TURN_RIGHT


# ---------------------------------------------------------------- untrap mode


@dataclass(frozen=True)
class UntrapState:
    mode: str = NORMAL
    fail_count: int = 0
    side: str = LEFT
    pending: str = "turn"


def untrap_action(state):
    if state.pending == "turn":
        return TURN_LEFT if state.side == LEFT else TURN_RIGHT
    return FORWARD


def untrap_update(state, attempted_forward, moved, enabled=True, threshold=UNTRAP_THRESHOLD):
    """Advance the untrap bookkeeping after a world step has resolved."""
    if state.mode == NORMAL:
        if not attempted_forward:
            return state
        if moved:
            return replace(state, fail_count=0)
        count = state.fail_count + 1
        if enabled and count >= threshold:
            return UntrapState(mode=UNTRAP, fail_count=count, side=state.side, pending="turn")
        return replace(state, fail_count=count)
    if not attempted_forward:
        return replace(state, pending="forward")
    if moved:
        return UntrapState(mode=NORMAL, fail_count=0, side=RIGHT if state.side == LEFT else LEFT, pending="turn")
    return replace(state, pending="turn")


# ---------------------------------------------------------------- one planning step


@dataclass
class PlanResult:
    action: str
    untrap: UntrapState
    infeasible: bool
    view_used: str
    goal: tuple = None  # snapped goal, global cell


def views_for(goal_kind, flags):
    if not flags.col_obs:
        return (DEPTH_ONLY,)
    if goal_kind == TARGET:
        return (PESSIMISTIC, OPTIMISTIC)
    return (PESSIMISTIC,) if flags.col_aver else (OPTIMISTIC,)


def plan_step(window, goal, goal_kind, agent_cell, heading_deg, untrap, flags):
    """Choose the next action toward ``goal`` (global cell).

    Goals outside the window are clamped onto it. Returns a
    :class:`PlanResult`; ``action`` is None when every allowed view is
    infeasible.
    """
    if untrap.mode == UNTRAP:
        return PlanResult(untrap_action(untrap), untrap, False, "untrap")
    K = window.side_cells
    lx, ly = window.to_local(goal)
    lx = min(max(lx, 0), K - 1)
    ly = min(max(ly, 0), K - 1)
    start = window.to_local(agent_cell)
    views = views_for(goal_kind, flags)
    for mode in views:
        blocked = window.obstacle_view(mode)
        # the agent stands where it stands; a stray mark under it must not strand the plan
        blocked[start[1], start[0]] = False
        snapped = snap_goal(blocked, (lx, ly))
        if snapped is None:
            continue
        field = fmm_solve(blocked, snapped, stop_at=start)
        if not feasible(field, start):
            continue
        try:
            action = next_action(field, start, heading_deg)
        except Stranded:
            continue
        return PlanResult(action, untrap, False, mode, window.to_global(snapped))
    return PlanResult(None, untrap, True, views[-1])
