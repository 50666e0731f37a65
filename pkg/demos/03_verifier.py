"""Why the second look matters: train the verifier, then compare it with single-frame stopping.

Run: python demos/03_verifier.py
Takes about a minute on one core.
"""

from collections import Counter

from stubborn.harness import SuiteConfig, collect_training_events, run_detection_comparison, train_verifier

cfg = SuiteConfig(train_seeds=(1000, 1011), eval_seeds=(0, 9), episodes_per_seed=5, bootstrap_resamples=1000)

# Training: the agent explores the training worlds and, at every candidate it walks up to,
# logs the accumulated evidence together with the ground-truth label.
events = collect_training_events(cfg)
print(len(events), "verification events;", Counter((e["category"], e["label"]) for e in events))
model = train_verifier(events)
for cat, e in model.entries.items():
    print(f"category {cat}: prior_pos={e.prior_pos:.2f} mean conf_sum pos/neg = {e.means_pos[1]:.2f}/{e.means_neg[1]:.2f}")

# Evaluation on held-out worlds with the same starts for both detectors.
rep = run_detection_comparison(cfg, model=model)
print(rep.csv_text())
for cid, res in rep.results.items():
    print(cid, dict(Counter(r.failure_tag for r in res)))
