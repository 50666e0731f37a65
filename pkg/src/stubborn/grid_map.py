"""The agent's 7-channel top-down map.

Channels (1-based, as used throughout the package):

1. obstacles from depth
2. pessimistic collision obstacles (5x5 cell patch per collision)
3. optimistic collision obstacles (3x3 cell patch per collision)
4. number of frames in which the cell was visible
5. cumulative target confidence
6. maximum target confidence
7. maximum confidence of any non-target category

Poses are given in world meters; ``offset`` translates a world cell into a map
cell so the agent's start can sit at the map centre.
"""

import math
from dataclasses import dataclass

import numpy as np

DEPTH_ONLY = "depth_only"
PESSIMISTIC = "pessimistic"
OPTIMISTIC = "optimistic"
VIEW_MODES = (DEPTH_ONLY, PESSIMISTIC, OPTIMISTIC)

PESSIMISTIC_HALF = 2  # 25 x 25 cm at 5 cm cells
OPTIMISTIC_HALF = 1  # 15 x 15 cm


class MapGrid:
    def __init__(self, side_cells=1440, cell_size_m=0.05, offset=(0, 0)):
        self.side_cells = int(side_cells)
        self.cell_size_m = float(cell_size_m)
        self.offset = (int(offset[0]), int(offset[1]))
        n = self.side_cells
        self.ch_depth_obs = np.zeros((n, n), dtype=bool)
        self.ch_collision_pess = np.zeros((n, n), dtype=bool)
        self.ch_collision_opt = np.zeros((n, n), dtype=bool)
        self.ch_view_count = np.zeros((n, n), dtype=np.int32)
        self.ch_conf_sum = np.zeros((n, n), dtype=np.float64)
        self.ch_conf_max = np.zeros((n, n), dtype=np.float64)
        self.ch_other_max = np.zeros((n, n), dtype=np.float64)

    @property
    def channels(self):
        return (
            self.ch_depth_obs,
            self.ch_collision_pess,
            self.ch_collision_opt,
            self.ch_view_count,
            self.ch_conf_sum,
            self.ch_conf_max,
            self.ch_other_max,
        )

    def channel(self, k):
        return self.channels[k - 1]

    def copy(self):
        other = MapGrid.__new__(MapGrid)
        other.side_cells = self.side_cells
        other.cell_size_m = self.cell_size_m
        other.offset = self.offset
        for name in _CHANNEL_NAMES:
            setattr(other, name, getattr(self, name).copy())
        return other

    # ------------------------------------------------------------ geometry

    def cell_of(self, x_m, y_m):
        cs = self.cell_size_m
        return int(math.floor(x_m / cs)) + self.offset[0], int(math.floor(y_m / cs)) + self.offset[1]

    def cell_center_m(self, cell):
        cs = self.cell_size_m
        return (cell[0] - self.offset[0] + 0.5) * cs, (cell[1] - self.offset[1] + 0.5) * cs

    def world_to_map(self, cells):
        cells = np.asarray(cells, dtype=np.int64).reshape(-1, 2)
        return cells + np.asarray(self.offset, dtype=np.int64)

    def map_to_world(self, cells):
        cells = np.asarray(cells, dtype=np.int64).reshape(-1, 2)
        return cells - np.asarray(self.offset, dtype=np.int64)

    def inside(self, x, y):
        return 0 <= x < self.side_cells and 0 <= y < self.side_cells

    def _pose_cell(self, pose):
        x, y = self.cell_of(pose.x_m, pose.y_m)
        if not self.inside(x, y):
            raise ValueError("pose out of map")
        return x, y

    # ------------------------------------------------------------ obstacle channels

    def integrate_depth(self, pose, scan):
        """Mark the cell containing each valid depth return. Never clears anything."""
        self._pose_cell(pose)
        valid = scan.hit & ~np.isnan(scan.ranges_m)
        if not valid.any():
            return self
        rad = np.radians(scan.angles_deg[valid])
        # nudge inward so a return landing exactly on a cell face falls in the obstacle cell
        r = scan.ranges_m[valid] + 1e-6
        px = pose.x_m + r * np.cos(rad)
        py = pose.y_m - r * np.sin(rad)
        cs = self.cell_size_m
        cx = np.floor(px / cs).astype(np.int64) + self.offset[0]
        cy = np.floor(py / cs).astype(np.int64) + self.offset[1]
        ok = (cx >= 0) & (cy >= 0) & (cx < self.side_cells) & (cy < self.side_cells)
        self.ch_depth_obs[cy[ok], cx[ok]] = True
        return self

    def record_collision(self, pose, forward_m=0.25):
        """Stamp both collision patches centred one forward step ahead of the agent."""
        rad = math.radians(pose.heading_deg)
        fx = pose.x_m + forward_m * math.cos(rad)
        fy = pose.y_m - forward_m * math.sin(rad)
        cx, cy = self.cell_of(fx, fy)
        for half, grid in ((PESSIMISTIC_HALF, self.ch_collision_pess), (OPTIMISTIC_HALF, self.ch_collision_opt)):
            x0, x1 = max(cx - half, 0), min(cx + half + 1, self.side_cells)
            y0, y1 = max(cy - half, 0), min(cy + half + 1, self.side_cells)
            if x0 < x1 and y0 < y1:
                grid[y0:y1, x0:x1] = True
        return self

    def mark_visited_free(self, pose):
        x, y = self.cell_of(pose.x_m, pose.y_m)
        if self.inside(x, y):
            self.ch_depth_obs[y, x] = False
            self.ch_collision_pess[y, x] = False
            self.ch_collision_opt[y, x] = False
        return self

    # ------------------------------------------------------------ evidence channels

    def update_detection_channels(self, cells, confidences, target):
        """Accumulate one frame of per-cell confidences.

        ``cells`` is an (M, 2) array of map cells ``(x, y)``, one row per
        visible cell; ``confidences`` is (M, L); ``target`` is 1-based.
        """
        conf = np.asarray(confidences, dtype=np.float64)
        cells = np.asarray(cells, dtype=np.int64).reshape(-1, 2)
        if conf.size and (np.isnan(conf).any() or conf.min() < 0.0 or conf.max() > 1.0):
            raise ValueError("invalid confidence")
        if len(cells) == 0:
            return self
        L = conf.shape[1]
        if not 1 <= target <= L:
            raise ValueError("target category out of range")
        ok = (cells[:, 0] >= 0) & (cells[:, 1] >= 0) & (cells[:, 0] < self.side_cells) & (cells[:, 1] < self.side_cells)
        cells, conf = cells[ok], conf[ok]
        x, y = cells[:, 0], cells[:, 1]
        c_tgt = conf[:, target - 1]
        if L > 1:
            c_other = np.delete(conf, target - 1, axis=1).max(axis=1)
        else:
            c_other = np.zeros(len(conf))
        np.add.at(self.ch_view_count, (y, x), 1)
        np.add.at(self.ch_conf_sum, (y, x), c_tgt)
        np.maximum.at(self.ch_conf_max, (y, x), c_tgt)
        np.maximum.at(self.ch_other_max, (y, x), c_other)
        return self

    # ------------------------------------------------------------ local window

    def local_window(self, pose, K):
        if K > self.side_cells:
            raise ValueError("window larger than map")
        x, y = self._pose_cell(pose)
        return self.window_at((x, y), K)

    def window_at(self, cell, K):
        if K > self.side_cells:
            raise ValueError("window larger than map")
        hi = self.side_cells - K
        x0 = min(max(cell[0] - K // 2, 0), hi)
        y0 = min(max(cell[1] - K // 2, 0), hi)
        return LocalWindow(self, (x0, y0), K)


_CHANNEL_NAMES = (
    "ch_depth_obs",
    "ch_collision_pess",
    "ch_collision_opt",
    "ch_view_count",
    "ch_conf_sum",
    "ch_conf_max",
    "ch_other_max",
)


@dataclass
class LocalWindow:
    grid: MapGrid
    origin: tuple
    side_cells: int

    @property
    def slices(self):
        x0, y0 = self.origin
        return slice(y0, y0 + self.side_cells), slice(x0, x0 + self.side_cells)

    def channel(self, k):
        return self.grid.channel(k)[self.slices]

    def to_local(self, cell):
        return cell[0] - self.origin[0], cell[1] - self.origin[1]

    def to_global(self, cell):
        return cell[0] + self.origin[0], cell[1] + self.origin[1]

    def contains(self, cell):
        lx, ly = self.to_local(cell)
        return 0 <= lx < self.side_cells and 0 <= ly < self.side_cells

    def obstacle_view(self, mode):
        s = self.slices
        g = self.grid
        if mode == DEPTH_ONLY:
            return g.ch_depth_obs[s].copy()
        if mode == PESSIMISTIC:
            return g.ch_depth_obs[s] | g.ch_collision_pess[s]
        if mode == OPTIMISTIC:
            return g.ch_depth_obs[s] | g.ch_collision_opt[s]
        raise ValueError(f"unknown obstacle view {mode!r}")


def obstacle_view(window, mode):
    return window.obstacle_view(mode)
