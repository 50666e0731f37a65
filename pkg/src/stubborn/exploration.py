"""Corner-cycling exploration.

The agent keeps pursuing one corner of its local window and only moves on to
the next corner, clockwise, when the planner reports that the current corner
cannot be reached. Nothing here looks at detections.
"""

from dataclasses import dataclass, replace

NE, SE, SW, NW = 0, 1, 2, 3
CORNER_NAMES = ("NE", "SE", "SW", "NW")


@dataclass(frozen=True)
class ExplorationState:
    corner_index: int = NE
    switches: int = 0


def current_goal(state, window):
    """Global ``(x, y)`` of the selected corner of ``window`` (x east, y south)."""
    x0, y0 = window.origin
    last = window.side_cells - 1
    dx, dy = ((last, 0), (last, last), (0, last), (0, 0))[state.corner_index]
    return x0 + dx, y0 + dy


def on_infeasible(state):
    return replace(state, corner_index=(state.corner_index + 1) % 4, switches=state.switches + 1)
