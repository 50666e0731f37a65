"""The collision-avoidance ladder I..V on a reduced suite.

Row I plans on depth alone; each later row adds one mechanism: the scripted
untrap routine, collision marks in the planning map, the pessimistic/optimistic
split, and clearing visited cells.

Run: python demos/04_ablation_ladder.py
"""

from stubborn.harness import SuiteConfig, run_ablation

cfg = SuiteConfig(eval_seeds=(0, 7), episodes_per_seed=5, bootstrap_resamples=1000)
rep = run_ablation(cfg, record_trace=False)
print(f"{'row':4} {'trapped':>8} {'gt_explore':>11} {'success':>8} {'spl':>6}")
for r in rep.rows:
    print(f"{r['config_id']:4} {r['trapped_rate']:8.3f} {r['gt_explore_rate']:11.3f} {r['success_rate']:8.3f} {r['spl']:6.3f}")
