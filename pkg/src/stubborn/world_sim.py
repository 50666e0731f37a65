"""Deterministic synthetic 2D indoor worlds.

Coordinates: ``x`` grows east (columns), ``y`` grows south (rows). Positions are
in meters, cell ``(x, y)`` covers ``[x*cs, (x+1)*cs) x [y*cs, (y+1)*cs)``.
Headings are degrees counter-clockwise from east as seen on a north-up map, so
a heading of 90 points north (towards smaller ``y``) and ``turn_left`` adds to
the heading.
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np
from numba import njit
from scipy import ndimage
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import dijkstra

FORWARD = "forward"
TURN_LEFT = "turn_left"
TURN_RIGHT = "turn_right"
STOP = "stop"
ACTIONS = (FORWARD, TURN_LEFT, TURN_RIGHT, STOP)

SUCCESS_DISTANCE_M = 1.0

CATEGORY_NAMES = ("bed", "sofa", "chair", "table", "toilet", "sink")
# target category -> the category its detector confuses it with
DEFAULT_CONFUSABLE = {1: 2, 2: 1, 3: 4, 4: 3, 5: 6, 6: 5}


class GenerationError(RuntimeError):
    pass


class TargetUnreachable(ValueError):
    pass


@dataclass
class WorldParams:
    size_m: float = 11.0
    cell_size_m: float = 0.05
    n_rooms: int = 5
    room_min_m: float = 2.4
    room_max_m: float = 4.0
    corridor_width_m: float = 1.0
    wall_cells: int = 4
    target_category: int = 1
    n_targets: int = 1
    n_distractors: int = 2
    n_other_objects: int = 2
    object_min_m: float = 0.4
    object_max_m: float = 0.9
    n_clutter: int = 3
    invisible_fraction: float = 0.05
    n_traps: int = 1
    trap_width_m: float = 0.45
    trap_length_m: tuple = (1.2, 1.8)
    num_categories: int = 6
    confusable: dict = field(default_factory=lambda: dict(DEFAULT_CONFUSABLE))
    max_retries: int = 20

    def validate(self):
        if self.n_rooms < 1:
            raise ValueError("n_rooms must be >= 1")
        for name in ("n_targets", "n_distractors", "n_other_objects", "n_clutter", "n_traps"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if not 1 <= self.target_category <= self.num_categories:
            raise ValueError("target_category out of range")
        if not 0.0 <= self.invisible_fraction < 1.0:
            raise ValueError("invisible_fraction must be in [0, 1)")


@dataclass
class World:
    side_cells: int
    cell_size_m: float
    occupancy: np.ndarray
    invisible_mask: np.ndarray
    labels: np.ndarray
    instances: list
    seed: int
    target_category: int
    distractor_category: int
    num_categories: int
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def opaque(self):
        if "opaque" not in self._cache:
            self._cache["opaque"] = self.occupancy & ~self.invisible_mask
        return self._cache["opaque"]

    def cell_of(self, x_m, y_m):
        return int(math.floor(x_m / self.cell_size_m)), int(math.floor(y_m / self.cell_size_m))

    def cell_center(self, cell):
        return (cell[0] + 0.5) * self.cell_size_m, (cell[1] + 0.5) * self.cell_size_m

    def in_bounds(self, x, y):
        return 0 <= x < self.side_cells and 0 <= y < self.side_cells

    def target_mask(self, category=None):
        category = self.target_category if category is None else category
        return self.labels == category


@dataclass
class AgentState:
    x_m: float
    y_m: float
    heading_deg: float
    steps_taken: int = 0
    path_length_m: float = 0.0


@dataclass
class SensorParams:
    num_rays: int = 120
    fov_deg: float = 79.0
    max_range_m: float = 5.0
    range_noise: float = 0.02
    p_drop: float = 0.02


@dataclass
class DetectorParams:
    a_true: float = 6.0
    b_true: float = 2.0
    a_bg: float = 1.0
    b_bg: float = 20.0
    confusion: float = 0.15


@dataclass
class MotionParams:
    forward_m: float = 0.25
    turn_deg: float = 30.0


@dataclass
class DepthScan:
    """One depth sweep. ``ranges`` is NaN on dropout rays; hit arrays use -1/0 for none."""

    angles_deg: np.ndarray
    ranges_m: np.ndarray
    hit: np.ndarray
    hit_cells: np.ndarray
    hit_labels: np.ndarray
    passed_labeled: np.ndarray
    max_range_m: float

    @property
    def num_rays(self):
        return len(self.angles_deg)

    @property
    def dropout(self):
        return np.isnan(self.ranges_m)


@dataclass
class DetectorFrame:
    cells: np.ndarray  # (M, 2) world cells as (x, y)
    confidences: np.ndarray  # (M, L)


@dataclass
class EpisodeSpec:
    world_seed: int
    start: AgentState
    target_category: int
    max_steps: int = 500
    sensor: SensorParams = field(default_factory=SensorParams)
    detector: DetectorParams = field(default_factory=DetectorParams)

    def __post_init__(self):
        if self.max_steps <= 0:
            raise ValueError("max_steps must be > 0")


# ---------------------------------------------------------------- generation


def _free_components(occ):
    lab, n = ndimage.label(~occ)
    return lab, n


def _connected(occ):
    return _free_components(occ)[1] == 1


def _rects_overlap(a, b, margin):
    ax, ay, aw, ah = a
    bx, by, bw, bh = b
    return not (ax + aw + margin <= bx or bx + bw + margin <= ax or ay + ah + margin <= by or by + bh + margin <= ay)


def _carve_corridor(occ, a, b, width, rng):
    (x0, y0), (x1, y1) = a, b
    half = width // 2
    if rng.random() < 0.5:
        occ[y0 - half : y0 - half + width, min(x0, x1) - half : max(x0, x1) - half + width] = False
        occ[min(y0, y1) - half : max(y0, y1) - half + width, x1 - half : x1 - half + width] = False
    else:
        occ[min(y0, y1) - half : max(y0, y1) - half + width, x0 - half : x0 - half + width] = False
        occ[y1 - half : y1 - half + width, min(x0, x1) - half : max(x0, x1) - half + width] = False


def _place_rooms(side, p, rng):
    cs = p.cell_size_m
    lo, hi = int(round(p.room_min_m / cs)), int(round(p.room_max_m / cs))
    rooms = []
    for _ in range(p.n_rooms * 60):
        if len(rooms) == p.n_rooms:
            break
        w, h = rng.integers(lo, hi + 1, size=2)
        if w + 2 * p.wall_cells >= side or h + 2 * p.wall_cells >= side:
            continue
        x = int(rng.integers(p.wall_cells, side - p.wall_cells - w))
        y = int(rng.integers(p.wall_cells, side - p.wall_cells - h))
        cand = (x, y, int(w), int(h))
        if all(not _rects_overlap(cand, r, 2 * p.wall_cells) for r in rooms):
            rooms.append(cand)
    return rooms


def _carve_trap(occ, rooms, p, rng):
    cs = p.cell_size_m
    width = max(2, int(round(p.trap_width_m / cs)))
    side = occ.shape[0]
    for _ in range(200):
        x, y, w, h = rooms[int(rng.integers(len(rooms)))]
        length = int(round(rng.uniform(*p.trap_length_m) / cs))
        wall = int(rng.integers(4))
        if wall == 0:  # north wall, spur goes north
            sx = int(rng.integers(x, x + w - width))
            box = (sx, y - length, width, length)
        elif wall == 1:  # east
            sy = int(rng.integers(y, y + h - width))
            box = (x + w, sy, length, width)
        elif wall == 2:  # south
            sx = int(rng.integers(x, x + w - width))
            box = (sx, y + h, width, length)
        else:  # west
            sy = int(rng.integers(y, y + h - width))
            box = (x - length, sy, length, width)
        bx, by, bw, bh = box
        m = p.wall_cells
        if bx - m < 0 or by - m < 0 or bx + bw + m > side or by + bh + m > side:
            continue
        # the spur must run through solid rock so it stays a dead end
        if wall in (0, 2):
            probe = occ[by - (m if wall == 0 else 0) : by + bh + (m if wall == 2 else 0), bx - m : bx + bw + m]
        else:
            probe = occ[by - m : by + bh + m, bx - (m if wall == 3 else 0) : bx + bw + (m if wall == 1 else 0)]
        if not probe.all():
            continue
        occ[by : by + bh, bx : bx + bw] = False
        return box
    return None


def _place_blob(occ, labels, rooms, size_lo, size_hi, rng, clearance, category=0, mask=None, tries=200):
    """Drop a rectangular obstacle inside a room without splitting free space."""
    for _ in range(tries):
        x, y, w, h = rooms[int(rng.integers(len(rooms)))]
        bw, bh = (int(v) for v in rng.integers(size_lo, size_hi + 1, size=2))
        if bw + 2 * clearance >= w or bh + 2 * clearance >= h:
            continue
        bx = int(rng.integers(x + clearance, x + w - clearance - bw + 1))
        by = int(rng.integers(y + clearance, y + h - clearance - bh + 1))
        region = (slice(by - 1, by + bh + 1), slice(bx - 1, bx + bw + 1))
        if occ[region].any():
            continue
        trial = occ.copy()
        trial[by : by + bh, bx : bx + bw] = True
        if not _connected(trial):
            continue
        occ[by : by + bh, bx : bx + bw] = True
        if category:
            labels[by : by + bh, bx : bx + bw] = category
        if mask is not None:
            mask[by : by + bh, bx : bx + bw] = True
        ys, xs = np.mgrid[by : by + bh, bx : bx + bw]
        return np.stack([xs.ravel(), ys.ravel()], axis=1)
    return None


def _place_invisible(occ, invisible, rng, n_cells_target, lo, hi, tries=400):
    free = np.argwhere(~occ)
    placed = 0
    for _ in range(tries):
        if placed >= n_cells_target:
            break
        cy, cx = free[int(rng.integers(len(free)))]
        bw, bh = (int(v) for v in rng.integers(lo, hi + 1, size=2))
        bx, by = int(cx) - bw // 2, int(cy) - bh // 2
        if bx < 1 or by < 1 or bx + bw + 1 > occ.shape[1] or by + bh + 1 > occ.shape[0]:
            continue
        if occ[by - 1 : by + bh + 1, bx - 1 : bx + bw + 1].any():
            continue
        trial = occ.copy()
        trial[by : by + bh, bx : bx + bw] = True
        if not _connected(trial):
            continue
        occ[by : by + bh, bx : bx + bw] = True
        invisible[by : by + bh, bx : bx + bw] = True
        placed += bw * bh
    return placed


def exposed_obstacle_cells(occ):
    """Obstacle cells with at least one 4-neighbour that is free."""
    free = ~occ
    touch = np.zeros_like(occ)
    touch[1:, :] |= free[:-1, :]
    touch[:-1, :] |= free[1:, :]
    touch[:, 1:] |= free[:, :-1]
    touch[:, :-1] |= free[:, 1:]
    return occ & touch


def generate_world(seed, params=None):
    """Rooms joined by corridors, furniture, clutter, invisible obstacles and a dead-end spur.

    Deterministic in ``seed``. Raises :class:`GenerationError` when placement
    keeps failing.
    """
    p = params or WorldParams()
    p.validate()
    cs = p.cell_size_m
    side = int(round(p.size_m / cs))
    rng = np.random.default_rng(seed)
    distractor = p.confusable.get(p.target_category, 0)
    obj_lo, obj_hi = int(round(p.object_min_m / cs)), int(round(p.object_max_m / cs))

    for _attempt in range(p.max_retries):
        occ = np.ones((side, side), dtype=bool)
        labels = np.zeros((side, side), dtype=np.int16)
        invisible = np.zeros((side, side), dtype=bool)
        rooms = _place_rooms(side, p, rng)
        if not rooms:
            continue
        for x, y, w, h in rooms:
            occ[y : y + h, x : x + w] = False
        width = max(2, int(round(p.corridor_width_m / cs)))
        centers = [(x + w // 2, y + h // 2) for x, y, w, h in rooms]
        for i in range(1, len(rooms)):
            j = min(range(i), key=lambda k: (centers[k][0] - centers[i][0]) ** 2 + (centers[k][1] - centers[i][1]) ** 2)
            _carve_corridor(occ, centers[i], centers[j], width, rng)
        # keep a solid rim so every ray terminates inside the grid
        occ[: p.wall_cells, :] = True
        occ[-p.wall_cells :, :] = True
        occ[:, : p.wall_cells] = True
        occ[:, -p.wall_cells :] = True
        if not _connected(occ):
            continue

        traps_ok = True
        for _ in range(p.n_traps):
            if _carve_trap(occ, rooms, p, rng) is None:
                traps_ok = False
                break
        if not traps_ok:
            continue

        instances = []
        ok = True
        plan = [p.target_category] * p.n_targets
        if distractor:
            plan += [distractor] * p.n_distractors
        others = [c for c in range(1, p.num_categories + 1) if c not in (p.target_category, distractor)]
        for _ in range(p.n_other_objects):
            if others:
                plan.append(int(rng.choice(others)))
        for cat in plan:
            cells = _place_blob(occ, labels, rooms, obj_lo, obj_hi, rng, clearance=8, category=cat)
            if cells is None:
                ok = False
                break
            instances.append((cat, cells))
        if not ok:
            continue
        for _ in range(p.n_clutter):
            _place_blob(occ, labels, rooms, 3, 6, rng, clearance=6)

        if p.invisible_fraction > 0:
            want = int(round(p.invisible_fraction * exposed_obstacle_cells(occ).sum()))
            _place_invisible(occ, invisible, rng, want, 3, 6)

        world = World(
            side_cells=side,
            cell_size_m=cs,
            occupancy=occ,
            invisible_mask=invisible,
            labels=labels,
            instances=instances,
            seed=int(seed),
            target_category=p.target_category,
            distractor_category=distractor,
            num_categories=p.num_categories,
        )
        if p.n_targets > 0 and not np.isfinite(goal_distance_field(world)).any():
            continue
        return world
    raise GenerationError("generation failed")


def sample_starts(world, n, rng, clearance_m=0.3, min_oracle_m=1.0):
    """Start poses on free cells away from walls with a finite oracle path."""
    cs = world.cell_size_m
    clear = ndimage.distance_transform_edt(~world.occupancy) * cs
    dist = goal_distance_field(world)
    ok = (clear >= clearance_m) & np.isfinite(dist) & (dist >= min_oracle_m)
    cand = np.argwhere(ok)
    if len(cand) == 0:
        raise GenerationError("no valid start cell")
    idx = rng.choice(len(cand), size=n, replace=len(cand) < n)
    headings = rng.integers(0, 12, size=n) * 30.0
    return [
        AgentState(x_m=(cand[i][1] + 0.5) * cs, y_m=(cand[i][0] + 0.5) * cs, heading_deg=float(h))
        for i, h in zip(idx, headings)
    ]


# ---------------------------------------------------------------- kinematics


def heading_vector(heading_deg):
    rad = math.radians(heading_deg)
    return math.cos(rad), -math.sin(rad)


def step(world, agent, action, motion=None):
    """Apply one action. Returns ``(new_agent, collided)``."""
    motion = motion or MotionParams()
    if action == FORWARD:
        dx, dy = heading_vector(agent.heading_deg)
        dx *= motion.forward_m
        dy *= motion.forward_m
        if _swept_free(world.occupancy, agent.x_m, agent.y_m, dx, dy, world.cell_size_m):
            moved = math.hypot(dx, dy)
            return (
                replace(
                    agent,
                    x_m=agent.x_m + dx,
                    y_m=agent.y_m + dy,
                    steps_taken=agent.steps_taken + 1,
                    path_length_m=agent.path_length_m + moved,
                ),
                False,
            )
        return replace(agent, steps_taken=agent.steps_taken + 1), True
    if action == TURN_LEFT:
        h = (agent.heading_deg + motion.turn_deg) % 360.0
    elif action == TURN_RIGHT:
        h = (agent.heading_deg - motion.turn_deg) % 360.0
    elif action == STOP:
        h = agent.heading_deg
    else:
        raise ValueError(f"unknown action {action!r}")
    return replace(agent, heading_deg=h, steps_taken=agent.steps_taken + 1), False


@njit(cache=True)
def _swept_free(occ, x, y, dx, dy, cs):
    length = math.sqrt(dx * dx + dy * dy)
    n = int(math.ceil(length / (cs * 0.25))) + 1
    H, W = occ.shape
    for k in range(1, n + 1):
        f = k / n
        cx = int(math.floor((x + f * dx) / cs))
        cy = int(math.floor((y + f * dy) / cs))
        if cx < 0 or cy < 0 or cx >= W or cy >= H or occ[cy, cx]:
            return False
    return True


# ---------------------------------------------------------------- sensing


@njit(cache=True)
def cast_rays(opaque, labels, x0, y0, angles_rad, max_t, passed_buf):
    """Grid traversal (Amanatides-Woo) in cell units.

    Returns entry distance, hit cell and hit flag per ray; labeled cells crossed
    before the hit are written to ``passed_buf`` (count returned last).
    """
    H, W = opaque.shape
    n = angles_rad.shape[0]
    t_hit = np.full(n, np.inf)
    hx = np.full(n, -1, dtype=np.int64)
    hy = np.full(n, -1, dtype=np.int64)
    n_passed = 0
    for r in range(n):
        dx = math.cos(angles_rad[r])
        dy = -math.sin(angles_rad[r])
        ix = int(math.floor(x0))
        iy = int(math.floor(y0))
        step_x = 1 if dx > 0 else -1
        step_y = 1 if dy > 0 else -1
        if abs(dx) < 1e-12:
            t_max_x = np.inf
            t_dx = np.inf
        else:
            t_dx = 1.0 / abs(dx)
            t_max_x = ((ix + 1 - x0) if dx > 0 else (x0 - ix)) * t_dx
        if abs(dy) < 1e-12:
            t_max_y = np.inf
            t_dy = np.inf
        else:
            t_dy = 1.0 / abs(dy)
            t_max_y = ((iy + 1 - y0) if dy > 0 else (y0 - iy)) * t_dy
        while True:
            if t_max_x < t_max_y:
                t = t_max_x
                ix += step_x
                t_max_x += t_dx
            else:
                t = t_max_y
                iy += step_y
                t_max_y += t_dy
            if t > max_t or ix < 0 or iy < 0 or ix >= W or iy >= H:
                break
            if opaque[iy, ix]:
                t_hit[r] = t
                hx[r] = ix
                hy[r] = iy
                break
            if labels[iy, ix] > 0 and n_passed < passed_buf.shape[0]:
                passed_buf[n_passed, 0] = ix
                passed_buf[n_passed, 1] = iy
                passed_buf[n_passed, 2] = r
                n_passed += 1
    return t_hit, hx, hy, n_passed


def ray_angles(heading_deg, num_rays, fov_deg):
    if num_rays == 1:
        return np.array([heading_deg], dtype=float)
    return heading_deg + np.linspace(fov_deg / 2.0, -fov_deg / 2.0, num_rays)


def sense_depth(world, agent, rng, params=None):
    """Noisy depth sweep centred on the agent heading. Always consumes 2*num_rays draws."""
    p = params or SensorParams()
    cs = world.cell_size_m
    angles = ray_angles(agent.heading_deg, p.num_rays, p.fov_deg)
    buf = np.empty((4 * p.num_rays, 3), dtype=np.int64)
    t, hx, hy, n_passed = cast_rays(
        world.opaque, world.labels, agent.x_m / cs, agent.y_m / cs, np.radians(angles), p.max_range_m / cs, buf
    )
    noise = rng.standard_normal(p.num_rays)
    drop = rng.random(p.num_rays) < p.p_drop
    hit = np.isfinite(t) & ~drop
    ranges = np.where(np.isfinite(t), t * cs, p.max_range_m)
    ranges = np.clip(ranges * np.where(hit, 1.0 + p.range_noise * noise, 1.0), 0.0, p.max_range_m)
    ranges[drop] = np.nan
    cells = np.stack([hx, hy], axis=1)
    cells[~hit] = -1
    hit_labels = np.zeros(p.num_rays, dtype=np.int64)
    hit_labels[hit] = world.labels[cells[hit, 1], cells[hit, 0]]
    passed = buf[:n_passed]
    passed = passed[~drop[passed[:, 2]], :2] if n_passed else np.empty((0, 2), dtype=np.int64)
    return DepthScan(
        angles_deg=angles,
        ranges_m=ranges,
        hit=hit,
        hit_cells=cells,
        hit_labels=hit_labels,
        passed_labeled=passed,
        max_range_m=p.max_range_m,
    )


def visible_cells(scan):
    cells = np.concatenate([scan.hit_cells[scan.hit], scan.passed_labeled.reshape(-1, 2)], axis=0)
    if len(cells) == 0:
        return np.empty((0, 2), dtype=np.int64)
    # unique over (y, x) so the frame order is row-major and reproducible
    order = np.unique(cells[:, 1] * 1_000_003 + cells[:, 0], return_index=True)[1]
    cells = cells[order]
    return cells[np.lexsort((cells[:, 0], cells[:, 1]))]


def sense_detector(world, agent, scan, params, rng):
    """Per-cell class confidences for the visible set of ``scan``.

    True classes draw from the high mode, everything else from the low mode;
    distractor cells swap in a high-mode target confidence with probability
    ``params.confusion``. Draw counts depend only on the visible-set size.
    """
    cells = visible_cells(scan)
    m, L = len(cells), world.num_categories
    bg = rng.beta(params.a_bg, params.b_bg, size=(m, L))
    hi = rng.beta(params.a_true, params.b_true, size=m)
    hi_conf = rng.beta(params.a_true, params.b_true, size=m)
    u = rng.random(m)
    conf = bg
    if m:
        lab = world.labels[cells[:, 1], cells[:, 0]].astype(np.int64)
        rows = np.nonzero(lab > 0)[0]
        conf[rows, lab[rows] - 1] = hi[rows]
        if world.distractor_category:
            confused = np.nonzero((lab == world.distractor_category) & (u < params.confusion))[0]
            conf[confused, world.target_category - 1] = hi_conf[confused]
    return DetectorFrame(cells=cells, confidences=conf)


# ---------------------------------------------------------------- oracles


def _grid_graph(free):
    H, W = free.shape
    ys, xs = np.nonzero(free)
    rows, cols, wts = [], [], []
    for dy, dx, w in ((0, 1, 1.0), (1, 0, 1.0), (1, 1, math.sqrt(2.0)), (1, -1, math.sqrt(2.0))):
        ny, nx = ys + dy, xs + dx
        keep = (ny < H) & (nx >= 0) & (nx < W)
        keep[keep] = free[ny[keep], nx[keep]]
        rows.append(ys[keep] * W + xs[keep])
        cols.append(ny[keep] * W + nx[keep])
        wts.append(np.full(int(keep.sum()), w))
    r = np.concatenate(rows)
    c = np.concatenate(cols)
    return coo_matrix((np.concatenate(wts), (r, c)), shape=(H * W, H * W)).tocsr()


def grid_distances(free, sources):
    """8-connected shortest-path lengths (cell units) from a set of source cells.

    ``sources`` is an (M, 2) array of (y, x). Non-free sources are ignored.
    """
    H, W = free.shape
    src = np.asarray(sources, dtype=np.int64).reshape(-1, 2)
    src = src[free[src[:, 0], src[:, 1]]] if len(src) else src
    if len(src) == 0:
        return np.full((H, W), np.inf)
    graph = _grid_graph(free)
    d = dijkstra(graph, directed=False, indices=src[:, 0] * W + src[:, 1], min_only=True)
    return d.reshape(H, W)


def goal_distance_field(world, category=None):
    """Meters from every free cell to the nearest cell within 1 m of a target cell."""
    category = world.target_category if category is None else category
    key = ("goal_field", category)
    if key not in world._cache:
        target = world.labels == category
        if not target.any():
            world._cache[key] = np.full(world.occupancy.shape, np.inf)
        else:
            near = ndimage.distance_transform_edt(~target) * world.cell_size_m <= SUCCESS_DISTANCE_M + 1e-9
            free = ~world.occupancy
            goal = np.argwhere(near & free)
            world._cache[key] = grid_distances(free, goal) * world.cell_size_m
    return world._cache[key]


def oracle_shortest_path(world, start, category=None):
    """Shortest 8-connected free-space path (m) from ``start`` to within 1 m of a target cell."""
    cx, cy = world.cell_of(start.x_m, start.y_m)
    d = goal_distance_field(world, category)[cy, cx]
    if not np.isfinite(d):
        raise TargetUnreachable("target unreachable")
    return float(d)


def distance_to_target(world, x_m, y_m, category=None):
    """Euclidean distance (m) from a position to the nearest target cell centre."""
    category = world.target_category if category is None else category
    key = ("target_centers", category)
    if key not in world._cache:
        ys, xs = np.nonzero(world.labels == category)
        world._cache[key] = np.stack([(xs + 0.5), (ys + 0.5)], axis=1) * world.cell_size_m
    c = world._cache[key]
    if len(c) == 0:
        return math.inf
    return float(np.sqrt(((c[:, 0] - x_m) ** 2 + (c[:, 1] - y_m) ** 2).min()))


def gt_view_fraction(world, scan, category=None):
    """Share of non-dropout rays whose hit cell carries the target label."""
    category = world.target_category if category is None else category
    valid = ~scan.dropout
    n = int(valid.sum())
    if n == 0:
        return 0.0
    return float(((scan.hit_labels == category) & scan.hit).sum()) / n
