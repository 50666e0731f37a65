"""Fast marching solver for the unit-speed Eikonal equation on a 2D grid.

The solver uses the 8-neighbour simplicial first-order upwind stencil: every
cell is surrounded by eight right triangles, each made of one axis neighbour
and one adjacent diagonal neighbour. The update for a triangle is the exact
minimum of ``T(p) + |x - p|`` over points ``p`` on the edge joining the two
neighbours, with ``T`` linearly interpolated along that edge. Because every
candidate is realised by an actual point, the computed arrival time is never
below the straight-line distance and never above the 8-connected graph
distance.

Distances are in cell units.
"""

import math

import numpy as np
from numba import njit

SQRT2 = math.sqrt(2.0)

# axis neighbour (dy, dx) followed by the two diagonals adjacent to it
_TRIANGLES = np.array(
    [
        [0, 1, -1, 1],
        [0, 1, 1, 1],
        [0, -1, -1, -1],
        [0, -1, 1, -1],
        [1, 0, 1, -1],
        [1, 0, 1, 1],
        [-1, 0, -1, -1],
        [-1, 0, -1, 1],
    ],
    dtype=np.int64,
)


@njit(cache=True, inline="always")
def _triangle(ta, td):
    # ta: axis neighbour (distance 1), td: diagonal neighbour (distance sqrt2)
    best = min(ta + 1.0, td + SQRT2)
    delta = td - ta
    if delta < 0.0 and delta * delta <= 0.5:
        cand = ta + math.sqrt(1.0 - delta * delta)
        if cand < best:
            best = cand
    return best


@njit(cache=True)
def local_update(T, y, x, tri):
    """Smallest upwind candidate for ``(y, x)`` from the finite entries of ``T``."""
    H, W = T.shape
    best = np.inf
    for k in range(tri.shape[0]):
        ay = y + tri[k, 0]
        ax = x + tri[k, 1]
        dy = y + tri[k, 2]
        dx = x + tri[k, 3]
        ta = np.inf
        td = np.inf
        if 0 <= ay < H and 0 <= ax < W:
            ta = T[ay, ax]
        if 0 <= dy < H and 0 <= dx < W:
            td = T[dy, dx]
        if ta < np.inf and td < np.inf:
            c = _triangle(ta, td)
        elif ta < np.inf:
            c = ta + 1.0
        elif td < np.inf:
            c = td + SQRT2
        else:
            continue
        if c < best:
            best = c
    return best


@njit(cache=True)
def _heap_push(keys, vals, size, key, val):
    i = size
    keys[i] = key
    vals[i] = val
    while i > 0:
        parent = (i - 1) >> 1
        if keys[parent] <= keys[i]:
            break
        keys[parent], keys[i] = keys[i], keys[parent]
        vals[parent], vals[i] = vals[i], vals[parent]
        i = parent
    return size + 1


@njit(cache=True)
def _heap_pop(keys, vals, size):
    key = keys[0]
    val = vals[0]
    size -= 1
    keys[0] = keys[size]
    vals[0] = vals[size]
    i = 0
    while True:
        left = 2 * i + 1
        if left >= size:
            break
        child = left
        if left + 1 < size and keys[left + 1] < keys[left]:
            child = left + 1
        if keys[i] <= keys[child]:
            break
        keys[child], keys[i] = keys[i], keys[child]
        vals[child], vals[i] = vals[i], vals[child]
        i = child
    return key, val, size


@njit(cache=True)
def march(blocked, sources_y, sources_x, stop_y, stop_x):
    """Propagate arrival times from ``sources`` over the free cells of ``blocked``.

    Propagation halts early once the cell ``(stop_y, stop_x)`` is accepted
    (pass ``-1`` to run to completion). Returns ``(T, accepted, complete)``.
    """
    H, W = blocked.shape
    T = np.full((H, W), np.inf)
    accepted = np.zeros((H, W), dtype=np.bool_)
    cap = 8 * H * W + sources_y.shape[0] + 1
    keys = np.empty(cap, dtype=np.float64)
    vals = np.empty(cap, dtype=np.int64)
    size = 0
    for i in range(sources_y.shape[0]):
        sy = sources_y[i]
        sx = sources_x[i]
        if blocked[sy, sx]:
            continue
        T[sy, sx] = 0.0
        size = _heap_push(keys, vals, size, 0.0, sy * W + sx)
    while size > 0:
        key, flat, size = _heap_pop(keys, vals, size)
        cy = flat // W
        cx = flat - cy * W
        if accepted[cy, cx] or key > T[cy, cx]:
            continue
        accepted[cy, cx] = True
        if cy == stop_y and cx == stop_x:
            return T, accepted, False
        tc = T[cy, cx]
        for ny in range(cy - 1, cy + 2):
            if ny < 0 or ny >= H:
                continue
            for nx in range(cx - 1, cx + 2):
                if nx < 0 or nx >= W or accepted[ny, nx] or blocked[ny, nx]:
                    continue
                cand = _update_from(T, accepted, ny, nx, cy - ny, cx - nx, tc)
                if cand < T[ny, nx]:
                    T[ny, nx] = cand
                    size = _heap_push(keys, vals, size, cand, ny * W + nx)
    return T, accepted, True


@njit(cache=True)
def _update_from(T, accepted, y, x, oy, ox, tc):
    # candidates for (y, x) from the triangles that contain the freshly
    # accepted neighbour at offset (oy, ox); all other triangles are unchanged
    H, W = T.shape
    if oy == 0 or ox == 0:
        best = tc + 1.0
        for s in (-1, 1):
            dy = y + (oy if oy != 0 else s)
            dx = x + (ox if ox != 0 else s)
            if 0 <= dy < H and 0 <= dx < W and accepted[dy, dx]:
                c = _triangle(tc, T[dy, dx])
                if c < best:
                    best = c
    else:
        best = tc + SQRT2
        for k in range(2):
            ay = y + (oy if k == 0 else 0)
            ax = x + (ox if k == 1 else 0)
            if 0 <= ay < H and 0 <= ax < W and accepted[ay, ax]:
                c = _triangle(T[ay, ax], tc)
                if c < best:
                    best = c
    return best


def arrival_times(blocked, sources, stop=None):
    """Arrival-time field from one or more ``(y, x)`` sources.

    Parameters
    ----------
    blocked : ndarray of bool, shape (H, W)
        Obstacle cells; they keep an infinite arrival time.
    sources : sequence of (y, x)
        Zero-time cells. Sources lying on obstacles are ignored.
    stop : (y, x), optional
        Halt as soon as this cell's value is final.

    Returns
    -------
    T : ndarray of float, shape (H, W)
    accepted : ndarray of bool, shape (H, W)
        Cells whose value is final.
    complete : bool
        False if propagation halted early at ``stop``.
    """
    blocked = np.ascontiguousarray(blocked, dtype=np.bool_)
    src = np.asarray(sources, dtype=np.int64).reshape(-1, 2)
    sy, sx = (-1, -1) if stop is None else (int(stop[0]), int(stop[1]))
    return march(blocked, src[:, 0].copy(), src[:, 1].copy(), sy, sx)


def eikonal_residual(T):
    """Max absolute gap between each finite non-source value and its local update."""
    T = np.asarray(T, dtype=np.float64)
    return _residual(T, _TRIANGLES)


@njit(cache=True)
def _residual(T, tri):
    H, W = T.shape
    worst = 0.0
    for y in range(H):
        for x in range(W):
            t = T[y, x]
            if t == 0.0 or not t < np.inf:
                continue
            gap = abs(local_update(T, y, x, tri) - t)
            if gap > worst:
                worst = gap
    return worst
