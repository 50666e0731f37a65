"""Episode metrics and bootstrap confidence intervals."""

import math
from dataclasses import asdict, dataclass

import numpy as np

TRAP_WINDOW_STEPS = 100
TRAP_DISTANCE_M = 1.0
GT_VIEW_THRESHOLD = 0.008

NONE = "none"
FALSE_DETECTION = "false_detection"
MISSED_DETECTION = "missed_detection"
TRAPPED = "trapped"
TIMEOUT_EXPLORE = "timeout_explore"


@dataclass
class EpisodeResult:
    success: bool
    oracle_len: float
    agent_len: float
    steps: int
    trapped: bool
    gt_explored: bool
    failure_tag: str = NONE
    world_seed: int = -1
    episode: int = -1
    stopped: bool = False
    stop_distance_m: float = math.inf
    trigger_count: int = 0
    reject_count: int = 0

    def to_dict(self):
        d = asdict(self)
        if not math.isfinite(d["stop_distance_m"]):
            d["stop_distance_m"] = None
        return d


def failure_tag(success, stopped, trapped, gt_explored):
    if success:
        return NONE
    if stopped:
        return FALSE_DETECTION
    if trapped:
        return TRAPPED
    if gt_explored:
        return MISSED_DETECTION
    return TIMEOUT_EXPLORE


def _nonempty(results):
    if len(results) == 0:
        raise ValueError("empty results")


def spl_term(success, oracle_len, agent_len):
    if not success:
        return 0.0
    if oracle_len == 0.0:
        return 1.0
    return oracle_len / max(agent_len, oracle_len)


def spl(results):
    _nonempty(results)
    return sum(spl_term(r.success, r.oracle_len, r.agent_len) for r in results) / len(results)


def success_rate(results):
    _nonempty(results)
    return sum(bool(r.success) for r in results) / len(results)


def gt_exploration_rate(results):
    _nonempty(results)
    return sum(bool(r.gt_explored) for r in results) / len(results)


def trapped_rate(results):
    _nonempty(results)
    return sum(bool(r.trapped) for r in results) / len(results)


def false_detection_rate(results):
    _nonempty(results)
    return sum(r.failure_tag == FALSE_DETECTION for r in results) / len(results)


def is_trapped(positions, success=False, window=TRAP_WINDOW_STEPS, min_move_m=TRAP_DISTANCE_M):
    """True if over some ``window``-step span the net displacement stays below ``min_move_m``.

    ``positions[t]`` is the agent position after ``t`` actions. For a
    successful episode the span ending on the final (stop) step is ignored.
    """
    p = np.asarray(positions, dtype=np.float64).reshape(-1, 2)
    last_start = len(p) - 1 - window
    if success:
        last_start -= 1
    if last_start < 0:
        return False
    a = p[: last_start + 1]
    b = p[window : window + last_start + 1]
    return bool((np.hypot(*(b - a).T) < min_move_m).any())


def bootstrap_ci(values, level=0.95, resamples=10000, seed=0):
    """Percentile bootstrap interval for the mean."""
    x = np.asarray(values, dtype=np.float64).ravel()
    if x.size == 0:
        raise ValueError("empty values")
    if resamples < 100:
        raise ValueError("resamples must be >= 100")
    if (x == x[0]).all():
        # every resample mean is the constant; skip the rounding noise of summing it
        return float(x[0]), float(x[0])
    rng = np.random.default_rng(seed)
    means = np.empty(resamples)
    chunk = max(1, 2_000_000 // x.size)
    for i in range(0, resamples, chunk):
        j = min(resamples, i + chunk)
        means[i:j] = x[rng.integers(0, x.size, size=(j - i, x.size))].mean(axis=1)
    alpha = (1.0 - level) / 2.0
    lo, hi = np.percentile(means, [100 * alpha, 100 * (1 - alpha)])
    return float(lo), float(hi)
