"""File formats: PGM snapshots, run-length encoded world JSON, JSONL helpers."""

import json
import os

import numpy as np

from .world_sim import World


def write_pgm(path, grid):
    """Binary P5 graymap; booleans map to 0/255, numbers are scaled by their max."""
    a = np.asarray(grid)
    if a.dtype == bool:
        img = np.where(a, 255, 0).astype(np.uint8)
    else:
        a = a.astype(np.float64)
        top = a.max() if a.size else 0.0
        img = np.zeros(a.shape, dtype=np.uint8) if top <= 0 else np.clip(np.round(a / top * 255.0), 0, 255).astype(np.uint8)
    h, w = img.shape
    with open(path, "wb") as fh:
        fh.write(b"P5\n%d %d\n255\n" % (w, h))
        fh.write(np.ascontiguousarray(img).tobytes())


def read_pgm(path):
    with open(path, "rb") as fh:
        data = fh.read()
    parts = data.split(maxsplit=4)
    if parts[0] != b"P5":
        raise ValueError("not a binary PGM")
    w, h, maxval = int(parts[1]), int(parts[2]), int(parts[3])
    if maxval != 255:
        raise ValueError("unsupported maxval")
    return np.frombuffer(parts[4][: w * h], dtype=np.uint8).reshape(h, w)


def snapshot_name(run_id, step, channel):
    return f"{run_id}_step{step}_ch{channel}.pgm"


def write_map_snapshot(grid, out_dir, run_id, step, channels=(1, 2, 3, 4, 5, 6, 7)):
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    for k in channels:
        path = os.path.join(out_dir, snapshot_name(run_id, step, k))
        write_pgm(path, grid.channel(k))
        paths.append(path)
    return paths


def write_world_snapshots(world, out_dir):
    """Occupancy and label PGMs for a world (labels scaled by the largest category)."""
    os.makedirs(out_dir, exist_ok=True)
    occ = os.path.join(out_dir, f"world_{world.seed}_occupancy.pgm")
    lab = os.path.join(out_dir, f"world_{world.seed}_labels.pgm")
    write_pgm(occ, world.occupancy)
    write_pgm(lab, world.labels)
    return occ, lab


def rle_encode(grid):
    flat = np.asarray(grid).ravel()
    if flat.size == 0:
        return []
    change = np.nonzero(flat[1:] != flat[:-1])[0] + 1
    starts = np.concatenate([[0], change])
    counts = np.diff(np.concatenate([starts, [flat.size]]))
    return [[int(flat[s]), int(c)] for s, c in zip(starts, counts)]


def rle_decode(runs, shape, dtype):
    values = np.array([v for v, _ in runs], dtype=dtype)
    counts = np.array([c for _, c in runs], dtype=np.int64)
    return np.repeat(values, counts).reshape(shape)


def world_to_dict(world):
    shape = [world.side_cells, world.side_cells]
    return {
        "format": "stubborn-world/1",
        "seed": world.seed,
        "side_cells": world.side_cells,
        "cell_size_m": world.cell_size_m,
        "target_category": world.target_category,
        "distractor_category": world.distractor_category,
        "num_categories": world.num_categories,
        "shape": shape,
        "occupancy": rle_encode(world.occupancy.astype(np.uint8)),
        "invisible_mask": rle_encode(world.invisible_mask.astype(np.uint8)),
        "labels": rle_encode(world.labels),
        "instances": [{"category": int(c), "cells": cells.tolist()} for c, cells in world.instances],
    }


def world_from_dict(d):
    shape = tuple(d["shape"])
    return World(
        side_cells=int(d["side_cells"]),
        cell_size_m=float(d["cell_size_m"]),
        occupancy=rle_decode(d["occupancy"], shape, np.uint8).astype(bool),
        invisible_mask=rle_decode(d["invisible_mask"], shape, np.uint8).astype(bool),
        labels=rle_decode(d["labels"], shape, np.int16),
        instances=[(int(i["category"]), np.asarray(i["cells"], dtype=np.int64).reshape(-1, 2)) for i in d["instances"]],
        seed=int(d["seed"]),
        target_category=int(d["target_category"]),
        distractor_category=int(d["distractor_category"]),
        num_categories=int(d["num_categories"]),
    )


def world_filename(seed):
    return f"world_{seed}.json"


def save_world(world, out_dir):
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, world_filename(world.seed))
    with open(path, "w") as fh:
        json.dump(world_to_dict(world), fh, separators=(",", ":"))
    return path


def load_world(path):
    with open(path) as fh:
        return world_from_dict(json.load(fh))


def write_jsonl(path, records):
    with open(path, "w") as fh:
        for r in records:
            fh.write(json.dumps(r, sort_keys=True, separators=(",", ":")))
            fh.write("\n")


def read_jsonl(path):
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]
