"""One episode end to end: a generated floor plan, the agent's map, and where it stopped.

Run: python demos/02_one_episode.py [seed]
Map channels are written as PGM images next to this script under out/.
"""

import os
import sys
from collections import Counter

import numpy as np

from stubborn.harness import SuiteConfig, build_world, episode_rng, episode_specs, run_episode
from stubborn.io import write_world_snapshots
from stubborn.world_sim import CATEGORY_NAMES

seed = int(sys.argv[1]) if len(sys.argv) > 1 else 3
out = os.path.join(os.path.dirname(__file__), "out")

# Single-frame detection needs no trained verifier, which keeps this demo self-contained.
cfg = SuiteConfig(detection_mode="single_frame")
world = build_world(seed, cfg)
print(f"world {seed}: {world.side_cells}x{world.side_cells} cells, looking for a {CATEGORY_NAMES[world.target_category - 1]}")
print(f"  invisible obstacle cells: {int(world.invisible_mask.sum())}")
write_world_snapshots(world, out)

spec = episode_specs(world, cfg, 1)[0]
ep = run_episode(world, spec, cfg, rng=episode_rng(0, seed, 0), record_trace=True, snapshot=(out, f"demo_w{seed}", {50, 100}))
r = ep.result
print(f"start ({spec.start.x_m:.2f}, {spec.start.y_m:.2f}) heading {spec.start.heading_deg:.0f}")
print(f"outcome: {r.failure_tag}  steps={r.steps}  path={r.agent_len:.2f} m  oracle={r.oracle_len:.2f} m")

acts = Counter(t["action"] for t in ep.trace)
print("actions:", dict(acts))
print("collisions:", sum(t["collided"] for t in ep.trace), " untrap steps:", sum(t["mode"] == "untrap" for t in ep.trace))
switches = np.count_nonzero(np.diff([t["corner_index"] for t in ep.trace]))
print("corner switches:", int(switches))
print("PGMs in", out)
