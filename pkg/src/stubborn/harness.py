"""Episode loop, benchmark suites and their outputs."""

import csv
import io as _io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np
from numba import njit

from . import metrics
from .detection import (
    APPROACHING,
    EXPLORING,
    STOP as DECIDE_STOP,
    STOP_WITHOUT_VERIFICATION,
    CandidateState,
    NBModel,
    detect_candidate,
    extract_features,
    nb_predict,
    should_verify,
    verification_decision,
)
from .exploration import ExplorationState, current_goal, on_infeasible
from .fmm import arrival_times
from .grid_map import MapGrid, PESSIMISTIC
from .io import write_jsonl, write_map_snapshot
from .metrics import EpisodeResult
from .planner import (
    ABLATION_LADDER,
    EXPLORATION,
    TARGET,
    UNTRAP,
    Ablation,
    UntrapState,
    plan_step,
    untrap_update,
)
from .world_sim import (
    FORWARD,
    STOP,
    DetectorParams,
    EpisodeSpec,
    MotionParams,
    SensorParams,
    TargetUnreachable,
    WorldParams,
    distance_to_target,
    generate_world,
    gt_view_fraction,
    oracle_shortest_path,
    sample_starts,
    sense_depth,
    sense_detector,
    step,
)

STUBBORN = "stubborn"
SINGLE_FRAME = "single_frame"
COLLECT = "collect"
FRONTIER = "frontier"

SUMMARY_COLUMNS = (
    "config_id",
    "n",
    "success_rate",
    "ci_lo",
    "ci_hi",
    "spl",
    "gt_explore_rate",
    "trapped_rate",
    "mean_steps",
)


@dataclass
class SuiteConfig:
    config_id: str = "default"
    train_seeds: tuple = (1000, 1011)  # inclusive
    eval_seeds: tuple = (0, 19)  # inclusive
    episodes_per_seed: int = 10
    train_episodes_per_seed: int = 3
    ablation: Ablation = field(default_factory=Ablation)
    detection_mode: str = STUBBORN
    exploration: str = STUBBORN
    sensor: SensorParams = field(default_factory=SensorParams)
    detector: DetectorParams = field(default_factory=DetectorParams)
    world: WorldParams = field(default_factory=WorldParams)
    motion: MotionParams = field(default_factory=MotionParams)
    target_categories: tuple = (1, 3, 5)
    master_seed: int = 0
    map_side: int = 480
    window: int = 0  # 0 -> map_side // 6
    max_steps: int = 500
    initial_corner: int = 0
    late_trigger_step: int = 200
    bootstrap_resamples: int = 10000

    def __post_init__(self):
        self.train_seeds = tuple(self.train_seeds)
        self.eval_seeds = tuple(self.eval_seeds)
        self.target_categories = tuple(self.target_categories)
        for name, kind in (("ablation", Ablation), ("sensor", SensorParams), ("detector", DetectorParams), ("world", WorldParams), ("motion", MotionParams)):
            v = getattr(self, name)
            if isinstance(v, dict):
                setattr(self, name, kind(**v))

    @property
    def window_cells(self):
        return self.window or self.map_side // 6

    def validate(self):
        a0, a1 = self.train_seeds
        b0, b1 = self.eval_seeds
        if a0 > a1 or b0 > b1:
            raise ValueError("seed ranges must be ascending")
        if a0 <= b1 and b0 <= a1:
            raise ValueError("train and eval seed ranges overlap")
        if self.detection_mode not in (STUBBORN, SINGLE_FRAME, COLLECT):
            raise ValueError(f"unknown detection mode {self.detection_mode!r}")
        if self.exploration not in (STUBBORN, FRONTIER):
            raise ValueError(f"unknown exploration strategy {self.exploration!r}")
        if self.window_cells > self.map_side:
            raise ValueError("window larger than map")
        return self

    def world_params(self, seed):
        cats = self.target_categories
        return replace(self.world, target_category=cats[seed % len(cats)])

    def to_dict(self):
        d = asdict(self)
        d["world"]["confusable"] = {str(k): v for k, v in d["world"]["confusable"].items()}
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        if "world" in d and isinstance(d["world"], dict):
            w = dict(d["world"])
            if "confusable" in w:
                w["confusable"] = {int(k): int(v) for k, v in w["confusable"].items()}
            if "trap_length_m" in w:
                w["trap_length_m"] = tuple(w["trap_length_m"])
            d["world"] = WorldParams(**w)
        return cls(**d)

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def parse_seed_range(text):
    """``"A..B"`` (inclusive) or a single integer."""
    if ".." in text:
        a, b = text.split("..", 1)
        return int(a), int(b)
    v = int(text)
    return v, v


def seed_list(seed_range):
    a, b = seed_range
    return list(range(a, b + 1))


# ---------------------------------------------------------------- frontier baseline


@njit(cache=True)
def _mark_rays(observed, x0, y0, angles_rad, lengths):
    H, W = observed.shape
    for r in range(angles_rad.shape[0]):
        L = lengths[r]
        if not L >= 0.0:
            continue
        dx = math.cos(angles_rad[r])
        dy = -math.sin(angles_rad[r])
        n = int(math.ceil(L * 2.0)) + 1
        for k in range(n + 1):
            f = L * k / n
            cx = int(math.floor(x0 + f * dx))
            cy = int(math.floor(y0 + f * dy))
            if 0 <= cx < W and 0 <= cy < H:
                observed[cy, cx] = True


def mark_observed(observed, grid, pose, scan):
    """Cells crossed by each non-dropout ray up to its (noisy) return, hit cell included."""
    cs = grid.cell_size_m
    lengths = np.where(np.isnan(scan.ranges_m), np.nan, scan.ranges_m / cs + 0.5)
    _mark_rays(
        observed,
        pose.x_m / cs + grid.offset[0],
        pose.y_m / cs + grid.offset[1],
        np.radians(scan.angles_deg),
        lengths,
    )
    x, y = grid.cell_of(pose.x_m, pose.y_m)
    if grid.inside(x, y):
        observed[y, x] = True


def frontier_baseline_goal(window, observed, agent_cell):
    """Closest unobserved cell bordering observed free space, by pessimistic-view travel time.

    ``observed`` is the full-map mask. Returns a global cell or None.
    """
    s = window.slices
    obs = observed[s]
    blocked = window.obstacle_view(PESSIMISTIC)
    seen_free = obs & ~blocked
    grown = seen_free.copy()
    grown[1:, :] |= seen_free[:-1, :]
    grown[:-1, :] |= seen_free[1:, :]
    grown[:, 1:] |= seen_free[:, :-1]
    grown[:, :-1] |= seen_free[:, 1:]
    g2 = grown.copy()
    g2[1:, 1:] |= seen_free[:-1, :-1]
    g2[1:, :-1] |= seen_free[:-1, 1:]
    g2[:-1, 1:] |= seen_free[1:, :-1]
    g2[:-1, :-1] |= seen_free[1:, 1:]
    frontier = g2 & ~obs & ~blocked
    if not frontier.any():
        return None
    ax, ay = window.to_local(agent_cell)
    if blocked[ay, ax]:
        return None
    T, _, _ = arrival_times(blocked, [(ay, ax)])
    cost = np.where(frontier, T, np.inf)
    if not np.isfinite(cost).any():
        return None
    best = np.min(cost)
    ys, xs = np.nonzero(cost == best)
    i = np.lexsort((xs, ys))[0]
    return window.to_global((int(xs[i]), int(ys[i])))


# ---------------------------------------------------------------- episode


@dataclass
class EpisodeOutput:
    result: EpisodeResult
    trace: list
    events: list
    grid: MapGrid = None


def run_episode(world, spec, config, nb=None, rng=None, record_trace=False, episode=-1, keep_map=False, snapshot=None):
    """Run one episode of the full agent loop.

    ``snapshot`` is an optional ``(out_dir, run_id, steps)`` triple; the map is
    written as PGMs after each listed step and once more at the end.

    Raises :class:`TargetUnreachable` when the oracle cannot reach the target
    (callers exclude such episodes).
    """
    target = spec.target_category
    flags = config.ablation
    mode = config.detection_mode
    if mode == STUBBORN and nb is None:
        raise ValueError("stubborn detection needs a trained verifier")
    rng = rng if rng is not None else np.random.default_rng(0)
    oracle = oracle_shortest_path(world, spec.start, target)
    cs = world.cell_size_m
    N, K = config.map_side, config.window_cells
    sx, sy = world.cell_of(spec.start.x_m, spec.start.y_m)
    grid = MapGrid(N, cs, offset=(N // 2 - sx, N // 2 - sy))
    observed = np.zeros((N, N), dtype=bool) if config.exploration == FRONTIER else None

    agent = spec.start
    expl = ExplorationState(config.initial_corner)
    untrap = UntrapState()
    cand = CandidateState()
    positions = [(agent.x_m, agent.y_m)]
    trace, events = [], []
    gt = False
    stopped = False
    triggers = rejects = 0

    for t in range(spec.max_steps):
        scan = sense_depth(world, agent, rng, spec.sensor)
        grid.integrate_depth(agent, scan)
        frame = sense_detector(world, agent, scan, spec.detector, rng)
        cells = grid.world_to_map(frame.cells)
        grid.update_detection_channels(cells, frame.confidences, target)
        if flags.vis_path:
            grid.mark_visited_free(agent)
        if not gt and gt_view_fraction(world, scan, target) >= metrics.GT_VIEW_THRESHOLD:
            gt = True
        if observed is not None:
            mark_observed(observed, grid, agent, scan)

        action = None
        goal_kind = EXPLORATION
        view = ""
        infeasible = False
        if cand.phase == EXPLORING:
            c = detect_candidate(cells, frame.confidences, target, cand.blacklist)
            if c is not None:
                cand.start_approach(c, t)
                triggers += 1
        if cand.phase == APPROACHING and should_verify(agent, grid.cell_center_m(cand.target_cell)):
            decision = _decide(cand, grid, world, target, mode, nb, config, events, t)
            if decision in (DECIDE_STOP, STOP_WITHOUT_VERIFICATION):
                action = STOP
                goal_kind = TARGET
            else:
                cand.reject_current()
                rejects += 1

        if action is None:
            agent_cell = grid.cell_of(agent.x_m, agent.y_m)
            window = grid.window_at(agent_cell, K)
            res = None
            if cand.phase == APPROACHING:
                goal_kind = TARGET
                res = plan_step(window, cand.target_cell, TARGET, agent_cell, agent.heading_deg, untrap, flags)
                if res.infeasible:
                    # unreachable candidate: drop it like a rejected one
                    cand.reject_current()
                    rejects += 1
                    res = None
            if res is None:
                goal_kind = EXPLORATION
                for _ in range(4):
                    goal = None
                    if observed is not None:
                        goal = frontier_baseline_goal(window, observed, agent_cell)
                    if goal is None:
                        goal = current_goal(expl, window)
                    res = plan_step(window, goal, EXPLORATION, agent_cell, agent.heading_deg, untrap, flags)
                    if not res.infeasible:
                        break
                    infeasible = True
                    expl = on_infeasible(expl)
            view = res.view_used
            # boxed in on every corner: push forward and let the collision/untrap logic react
            action = res.action if res.action is not None else FORWARD

        new_agent, collided = step(world, agent, action, config.motion)
        if action == STOP:
            stopped = True
        elif collided:
            grid.record_collision(agent, config.motion.forward_m)
        moved = action == FORWARD and not collided
        prev_mode = untrap.mode
        untrap = untrap_update(untrap, action == FORWARD, moved, enabled=flags.bf_untrap)
        agent = new_agent
        if snapshot is not None and t in snapshot[2]:
            write_map_snapshot(grid, snapshot[0], snapshot[1], t)
        positions.append((agent.x_m, agent.y_m))
        if record_trace:
            trace.append(
                {
                    "step": t,
                    "mode": UNTRAP if prev_mode == UNTRAP else "normal",
                    "goal_kind": goal_kind,
                    "corner_index": expl.corner_index,
                    "view_used": view,
                    "action": action,
                    "collided": bool(collided),
                    "infeasible": bool(infeasible),
                }
            )
        if stopped:
            break

    if snapshot is not None:
        write_map_snapshot(grid, snapshot[0], snapshot[1], agent.steps_taken)
    stop_dist = distance_to_target(world, agent.x_m, agent.y_m, target) if stopped else math.inf
    success = stopped and stop_dist <= 1.0
    trapped = metrics.is_trapped(positions, success)
    result = EpisodeResult(
        success=bool(success),
        oracle_len=float(oracle),
        agent_len=float(agent.path_length_m),
        steps=int(agent.steps_taken),
        trapped=bool(trapped),
        gt_explored=bool(gt),
        failure_tag=metrics.failure_tag(success, stopped, trapped, gt),
        world_seed=int(world.seed),
        episode=int(episode),
        stopped=bool(stopped),
        stop_distance_m=float(stop_dist),
        trigger_count=triggers,
        reject_count=rejects,
    )
    return EpisodeOutput(result, trace, events, grid if keep_map else None)


def _decide(cand, grid, world, target, mode, nb, config, events, t):
    if mode == SINGLE_FRAME:
        return DECIDE_STOP
    if mode == COLLECT:
        feats = extract_features(grid, cand.target_cell)
        wx, wy = grid.map_to_world(cand.target_cell)[0]
        label = bool(world.in_bounds(wx, wy) and world.labels[wy, wx] == target)
        events.append(
            {
                "world_seed": int(world.seed),
                "step": int(t),
                "cell": [int(wx), int(wy)],
                "category": int(target),
                "features": [float(v) for v in feats],
                "label": int(label),
            }
        )
        return DECIDE_STOP if label else "blacklist_and_resume"
    if cand.trigger_step > config.late_trigger_step:
        return verification_decision(cand.trigger_step, None, config.late_trigger_step)
    if target not in nb:
        # training never produced both outcomes for this category: nothing to verify with
        return DECIDE_STOP
    pred = nb_predict(nb, extract_features(grid, cand.target_cell), target)
    return verification_decision(cand.trigger_step, pred, config.late_trigger_step)


# ---------------------------------------------------------------- suites


def episode_rng(master_seed, world_seed, episode):
    return np.random.default_rng([int(master_seed), int(world_seed), int(episode), 7])


def episode_specs(world, config, n):
    rng = np.random.default_rng([int(config.master_seed), int(world.seed), 11])
    starts = sample_starts(world, n, rng)
    return [
        EpisodeSpec(
            world_seed=world.seed,
            start=s,
            target_category=world.target_category,
            max_steps=config.max_steps,
            sensor=config.sensor,
            detector=config.detector,
        )
        for s in starts
    ]


def build_world(seed, config):
    return generate_world(seed, config.world_params(seed))


def _threads():
    try:
        return max(1, int(os.environ.get("STUBBORN_THREADS", "1")))
    except ValueError:
        return 1


def _run_world(args):
    seed, config, nb_json, n, record_trace, world = args
    nb = NBModel.from_json(nb_json) if nb_json else None
    world = world if world is not None else build_world(seed, config)
    out = []
    for i, spec in enumerate(episode_specs(world, config, n)):
        try:
            ep = run_episode(world, spec, config, nb, episode_rng(config.master_seed, seed, i), record_trace, episode=i)
        except TargetUnreachable as exc:
            out.append(("excluded", seed, i, str(exc)))
            continue
        out.append(("ok", seed, i, ep))
    return out


def run_episodes(config, seeds, n_per_seed, nb=None, record_trace=False, worlds=None):
    """Run ``n_per_seed`` episodes on each world seed; merged in seed order."""
    worlds = worlds or {}
    nb_json = nb.to_json() if nb is not None else None
    jobs = [(s, config, nb_json, n_per_seed, record_trace, worlds.get(s)) for s in seeds]
    threads = min(_threads(), len(jobs)) if jobs else 1
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            chunks = list(pool.map(_run_world, jobs))
    else:
        chunks = [_run_world(j) for j in jobs]
    done, excluded = [], []
    for chunk in chunks:
        for status, seed, i, payload in chunk:
            if status == "ok":
                done.append(payload)
            else:
                excluded.append({"world_seed": seed, "episode": i, "reason": payload})
    return done, excluded


def collect_training_events(config, worlds=None):
    cfg = replace(config, detection_mode=COLLECT)
    done, _ = run_episodes(cfg, seed_list(config.train_seeds), config.train_episodes_per_seed, worlds=worlds)
    return [e for ep in done for e in ep.events]


def train_verifier(events):
    """Fit one verifier per category that has both positive and negative events."""
    by_cat = {}
    for e in events:
        by_cat.setdefault(int(e["category"]), []).append((e["features"], bool(e["label"])))
    model = NBModel()
    for cat, samples in sorted(by_cat.items()):
        labels = {lbl for _, lbl in samples}
        if labels == {True, False}:
            model.fit({cat: samples})
    return model


def summarize(config_id, results, resamples=10000, seed=0):
    n = len(results)
    row = {"config_id": config_id, "n": n}
    if n == 0:
        return row | {k: float("nan") for k in SUMMARY_COLUMNS[2:]}
    succ = [float(r.success) for r in results]
    lo, hi = metrics.bootstrap_ci(succ, resamples=resamples, seed=seed)
    row.update(
        success_rate=metrics.success_rate(results),
        ci_lo=lo,
        ci_hi=hi,
        spl=metrics.spl(results),
        gt_explore_rate=metrics.gt_exploration_rate(results),
        trapped_rate=metrics.trapped_rate(results),
        mean_steps=float(np.mean([r.steps for r in results])),
    )
    return row


def metric_cis(results, resamples=10000, seed=0):
    """Bootstrap intervals for every headline metric."""
    out = {}
    per_ep = {
        "success_rate": [float(r.success) for r in results],
        "spl": [metrics.spl_term(r.success, r.oracle_len, r.agent_len) for r in results],
        "gt_explore_rate": [float(r.gt_explored) for r in results],
        "trapped_rate": [float(r.trapped) for r in results],
        "false_detection_rate": [float(r.failure_tag == metrics.FALSE_DETECTION) for r in results],
    }
    for k, v in per_ep.items():
        lo, hi = metrics.bootstrap_ci(v, resamples=resamples, seed=seed)
        out[k] = {"mean": float(np.mean(v)), "ci_lo": lo, "ci_hi": hi}
    return out


@dataclass
class MetricsReport:
    rows: list
    results: dict  # config_id -> list of EpisodeResult
    excluded: dict
    traces: dict = field(default_factory=dict)
    cis: dict = field(default_factory=dict)
    model: NBModel = None

    def row(self, config_id):
        for r in self.rows:
            if r["config_id"] == config_id:
                return r
        raise KeyError(config_id)

    def csv_text(self):
        buf = _io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(SUMMARY_COLUMNS)
        for r in self.rows:
            w.writerow([_fmt(r[c]) for c in SUMMARY_COLUMNS])
        return buf.getvalue()

    def write(self, out_dir):
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "summary.csv"), "w") as fh:
            fh.write(self.csv_text())
        with open(os.path.join(out_dir, "summary.json"), "w") as fh:
            json.dump({"rows": self.rows, "cis": self.cis, "excluded": self.excluded}, fh, indent=2, sort_keys=True)
        write_jsonl(
            os.path.join(out_dir, "episodes.jsonl"),
            ({"config_id": cid} | r.to_dict() for cid, rs in self.results.items() for r in rs),
        )
        write_jsonl(
            os.path.join(out_dir, "traces.jsonl"),
            (rec for cid, recs in self.traces.items() for rec in recs),
        )
        if self.model is not None:
            self.model.save(os.path.join(out_dir, "model.json"))


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.6f}"
    return str(v)


def run_configs(configs, model=None, worlds=None, record_trace=True, train_config=None):
    """Evaluate several configurations on the same eval worlds.

    Trains the verifier once (on ``train_config`` or the first config) when a
    stubborn-detection row needs one and no model is given.
    """
    configs = [c.validate() for c in configs]
    if model is None and any(c.detection_mode == STUBBORN for c in configs):
        base = train_config or configs[0]
        model = train_verifier(collect_training_events(base, worlds))
    rows, results, excluded, traces, cis = [], {}, {}, {}, {}
    for cfg in configs:
        done, exc = run_episodes(cfg, seed_list(cfg.eval_seeds), cfg.episodes_per_seed, model, record_trace, worlds)
        res = [d.result for d in done]
        results[cfg.config_id] = res
        excluded[cfg.config_id] = exc
        if record_trace:
            traces[cfg.config_id] = [
                {"config_id": cfg.config_id, "world_seed": d.result.world_seed, "episode": d.result.episode} | rec
                for d in done
                for rec in d.trace
            ]
        rows.append(summarize(cfg.config_id, res, cfg.bootstrap_resamples, cfg.master_seed))
        if res:
            cis[cfg.config_id] = metric_cis(res, cfg.bootstrap_resamples, cfg.master_seed)
    return MetricsReport(rows, results, excluded, traces, cis, model)


def run_suite(config, model=None, worlds=None, out_dir=None, record_trace=True):
    report = run_configs([config], model=model, worlds=worlds, record_trace=record_trace)
    if out_dir:
        report.write(out_dir)
    return report


def ablation_configs(base):
    return [replace(base, config_id=row, ablation=flags) for row, flags in ABLATION_LADDER.items()]


def run_ablation(base, model=None, worlds=None, out_dir=None, record_trace=True):
    """Rows I..V of the collision-avoidance ladder on a shared verifier."""
    report = run_configs(ablation_configs(base), model=model, worlds=worlds, record_trace=record_trace)
    if out_dir:
        report.write(out_dir)
    return report


def detection_configs(base):
    return [
        replace(base, config_id=STUBBORN, detection_mode=STUBBORN),
        replace(base, config_id=SINGLE_FRAME, detection_mode=SINGLE_FRAME),
    ]


def run_detection_comparison(base, model=None, worlds=None, out_dir=None, record_trace=False):
    report = run_configs(detection_configs(base), model=model, worlds=worlds, record_trace=record_trace)
    if out_dir:
        report.write(out_dir)
    return report


def load_worlds(world_dir, seeds):
    from .io import load_world, world_filename

    out = {}
    for s in seeds:
        path = os.path.join(world_dir, world_filename(s))
        if os.path.exists(path):
            out[s] = load_world(path)
    return out
