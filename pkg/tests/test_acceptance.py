"""Acceptance criteria 1-9. Each test records a one-line verdict printed at the end of the run."""

import math
import time
from collections import deque

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import dijkstra
from scipy.stats import norm

from stubborn import metrics
from stubborn.cli import main as cli_main
from stubborn.detection import ACCEPT, REJECT, NBModel, nb_predict, nb_train
from stubborn.fmm import arrival_times
from stubborn.grid_map import MapGrid
from stubborn.harness import SuiteConfig, run_ablation, run_detection_comparison
from stubborn.metrics import EpisodeResult, bootstrap_ci, spl
from stubborn.planner import LEFT, NORMAL, UNTRAP, UntrapState, untrap_action, untrap_update
from stubborn.world_sim import FORWARD, TURN_LEFT, TURN_RIGHT


def dijkstra8(blocked, src):
    """8-connected graph distances through scipy's csgraph (axis 1, diagonal sqrt 2)."""
    H, W = blocked.shape
    idx = np.arange(H * W).reshape(H, W)
    rows, cols, wts = [], [], []
    for dy, dx in ((0, 1), (1, 0), (1, 1), (1, -1)):
        y0, x0 = np.nonzero(np.ones((H - dy, W - abs(dx)), bool))
        x0 = x0 + max(0, -dx)
        y1, x1 = y0 + dy, x0 + dx
        ok = ~blocked[y0, x0] & ~blocked[y1, x1]
        rows.append(idx[y0[ok], x0[ok]])
        cols.append(idx[y1[ok], x1[ok]])
        wts.append(np.full(ok.sum(), math.sqrt(2.0) if dx and dy else 1.0))
    g = coo_matrix((np.concatenate(wts), (np.concatenate(rows), np.concatenate(cols))), shape=(H * W, H * W)).tocsr()
    return dijkstra(g, directed=False, indices=src[0] * W + src[1]).reshape(H, W)


# ---------------------------------------------------------------- 1


def test_criterion_1_fmm_sandwich(criterion):
    rng = np.random.default_rng(2024)
    ys, xs = np.mgrid[:64, :64]
    worst = 0.0
    fmm_time = 0.0
    bad = 0
    for _ in range(50):
        b = rng.random((64, 64)) < 0.2
        free = np.argwhere(~b)
        src = tuple(free[rng.integers(len(free))])
        t0 = time.perf_counter()
        T, _, _ = arrival_times(b, [src])
        fmm_time += time.perf_counter() - t0
        D = dijkstra8(b, src)
        E = np.hypot(ys - src[0], xs - src[1])
        m = ~b & np.isfinite(D)
        bad += int((T[m] < E[m] - 1e-9).sum() + (T[m] > D[m] + 1e-9).sum())
        bad += int((np.isfinite(T) != np.isfinite(D))[~b].sum())
        worst = max(worst, float(np.max(T[m] - D[m])))
    ok = bad == 0 and fmm_time < 10.0
    criterion(1, ok, f"violations={bad} max(T-dijkstra8)={worst:.2e} fmm_time={fmm_time:.2f}s")
    assert bad == 0
    assert fmm_time < 10.0


# ---------------------------------------------------------------- 2


def _ep(s, l, p):
    return EpisodeResult(bool(s), float(l), float(p), 1, False, False)


def test_criterion_2_spl_exact(criterion):
    ex = [
        spl([_ep(1, 4.0, 4.0)]) == 1.0,
        spl([_ep(0, 4.0, 4.0)]) == 0.0,
        abs(spl([_ep(1, 3, 6), _ep(1, 5, 5)]) - 0.75) <= 1e-12,
    ]
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(1000):
        s = rng.random() < 0.6
        l = rng.uniform(0.0, 30.0)
        p = l + rng.exponential(5.0) if rng.random() < 0.8 else rng.uniform(0.0, 30.0)
        straight = (1.0 if s else 0.0) * l / max(p, l) if max(p, l) > 0 else float(s)
        worst = max(worst, abs(spl([_ep(s, l, p)]) - straight))
    ok = all(ex) and worst <= 1e-12
    criterion(2, ok, f"examples={ex} max_abs_diff={worst:.1e}")
    assert all(ex) and worst <= 1e-12


# ---------------------------------------------------------------- 3


def _oracle(entry, x):
    lp = math.log(entry.prior_pos)
    ln = math.log(entry.prior_neg)
    for i in range(4):
        lp += norm.logpdf(x[i], loc=entry.means_pos[i], scale=math.sqrt(entry.vars_pos[i]))
        ln += norm.logpdf(x[i], loc=entry.means_neg[i], scale=math.sqrt(entry.vars_neg[i]))
    return ACCEPT if lp > ln else REJECT


def test_criterion_3_nb_oracle(criterion):
    rng = np.random.default_rng(99)
    mismatches = 0
    total = 0
    for k in range(5):
        n = int(rng.integers(10, 60))
        mu_p, mu_n = rng.uniform(0, 5, 4), rng.uniform(0, 5, 4)
        y = rng.random(n) < 0.4
        y[:2] = (True, False)
        X = np.where(y[:, None], rng.normal(mu_p, rng.uniform(0.3, 2, 4), (n, 4)), rng.normal(mu_n, rng.uniform(0.3, 2, 4), (n, 4)))
        entry = nb_train(list(zip(X, y)), k + 1)
        model = NBModel({k + 1: entry})
        for x in rng.uniform(-2, 7, size=(200, 4)):
            total += 1
            mismatches += nb_predict(model, x, k + 1) != _oracle(entry, x)
    criterion(3, mismatches == 0, f"{total} vectors, {mismatches} mismatches")
    assert total == 1000 and mismatches == 0


# ---------------------------------------------------------------- 4


class RefUntrap:
    """Independent reading of the rule: 10 failed forwards in a row -> scripted turn/forward until a forward succeeds."""

    __slots__ = ("normal", "fails", "entries", "phase")

    def __init__(self):
        self.normal, self.fails, self.entries, self.phase = True, 0, 0, 0

    def key(self):
        return (self.normal, self.fails, self.entries % 2, self.phase % 2)

    def clone(self):
        r = RefUntrap()
        r.normal, r.fails, r.entries, r.phase = self.normal, self.fails, self.entries, self.phase
        return r

    def expected(self):
        if self.normal:
            return None
        if self.phase % 2 == 0:
            return TURN_LEFT if self.entries % 2 == 1 else TURN_RIGHT
        return FORWARD

    def outcomes(self):
        if self.normal:
            return ("turn", "fail", "ok")
        return ("turn",) if self.phase % 2 == 0 else ("fail", "ok")

    def feed(self, o):
        if self.normal:
            if o == "ok":
                self.fails = 0
            elif o == "fail":
                self.fails += 1
                if self.fails == 10:
                    self.normal, self.entries, self.phase = False, self.entries + 1, 0
        else:
            if o == "ok":
                self.normal, self.fails = True, 0
            else:
                self.phase += 1


def _advance(state, o):
    return untrap_update(state, o != "turn", o == "ok")


def _check(state, ref):
    if (state.mode == UNTRAP) != (not ref.normal):
        return False
    if state.mode == UNTRAP and untrap_action(state) != ref.expected():
        return False
    return True


def test_criterion_4_untrap_exhaustive(criterion):
    # brute force over every outcome sequence up to length 12
    sequences = 0
    bad = 0
    stack = [(UntrapState(), RefUntrap(), 0)]
    while stack:
        s, r, d = stack.pop()
        sequences += 1
        if not _check(s, r):
            bad += 1
            continue
        if d == 12:
            continue
        for o in r.outcomes():
            r2 = r.clone()
            r2.feed(o)
            stack.append((_advance(s, o), r2, d + 1))
    # product-automaton search to depth 25 covers every longer sequence
    seen = {(UntrapState(), RefUntrap().key())}
    frontier = deque([(UntrapState(), RefUntrap(), 0)])
    pairs = 0
    entries_seen = 0
    while frontier:
        s, r, d = frontier.popleft()
        pairs += 1
        if not _check(s, r):
            bad += 1
            continue
        entries_seen = max(entries_seen, r.entries)
        if d == 25:
            continue
        for o in r.outcomes():
            r2 = r.clone()
            r2.feed(o)
            s2 = _advance(s, o)
            k = (s2, r2.key())
            if k not in seen:
                seen.add(k)
                frontier.append((s2, r2, d + 1))
    # the shortest route to a second entry is 10 fails, a turn, a success, then 10 fails
    ok = bad == 0 and entries_seen >= 2
    criterion(4, ok, f"{sequences} sequences (len<=12) + {pairs} product states (len<=25), {bad} counterexamples")
    assert bad == 0 and entries_seen >= 2
    assert UntrapState().side == LEFT and UntrapState().mode == NORMAL


# ---------------------------------------------------------------- 5


def _margin_ok(report, metric, better, worse, sign):
    a = report.cis[better][metric]
    b = report.cis[worse][metric]
    margin = sign * (a["mean"] - b["mean"])
    half = max((a["ci_hi"] - a["ci_lo"]) / 2.0, (b["ci_hi"] - b["ci_lo"]) / 2.0)
    return margin > half, margin, half


@pytest.mark.slow
def test_criterion_5_ablation_trend(criterion):
    cfg = SuiteConfig()
    assert cfg.world.invisible_fraction > 0
    t0 = time.perf_counter()
    report = run_ablation(cfg, record_trace=False)
    elapsed = time.perf_counter() - t0
    assert [r["config_id"] for r in report.rows] == ["I", "II", "III", "IV", "V"]
    assert all(r["n"] == 200 for r in report.rows)
    trap_ok, tm, th = _margin_ok(report, "trapped_rate", "I", "V", 1.0)
    gt_ok, gm, gh = _margin_ok(report, "gt_explore_rate", "V", "I", 1.0)
    I, V = report.row("I"), report.row("V")
    ok = trap_ok and gt_ok and elapsed < 600
    criterion(
        5,
        ok,
        f"trapped I={I['trapped_rate']:.3f} V={V['trapped_rate']:.3f} (margin {tm:.3f} > {th:.3f}); "
        f"gt I={I['gt_explore_rate']:.3f} V={V['gt_explore_rate']:.3f} (margin {gm:.3f} > {gh:.3f}); {elapsed:.0f}s",
    )
    assert trap_ok and gt_ok
    assert elapsed < 600


# ---------------------------------------------------------------- 6


@pytest.mark.slow
def test_criterion_6_multi_frame_detection(criterion):
    lines = []
    wins = 0
    for ms in (0, 1, 2):
        cfg = SuiteConfig(master_seed=ms, bootstrap_resamples=1000)
        assert cfg.detector.confusion == 0.15
        rep = run_detection_comparison(cfg)
        s, f = rep.results["stubborn"], rep.results["single_frame"]
        sr_s, sr_f = metrics.success_rate(s), metrics.success_rate(f)
        fd_s, fd_f = metrics.false_detection_rate(s), metrics.false_detection_rate(f)
        won = sr_s >= sr_f and fd_s < fd_f
        wins += won
        lines.append(f"seed{ms}: SR {sr_s:.3f}/{sr_f:.3f} FD {fd_s:.3f}/{fd_f:.3f}")
    criterion(6, wins == 3, f"{wins}/3 seeds; " + "; ".join(lines))
    assert wins == 3


# ---------------------------------------------------------------- 7

frame = st.lists(
    st.tuples(st.integers(0, 7), st.integers(0, 7), st.lists(st.floats(0.0, 1.0), min_size=4, max_size=4)),
    max_size=12,
)


@settings(max_examples=200, deadline=None)
@given(st.lists(frame, max_size=15), st.integers(1, 4))
def channel_arithmetic(history, target):
    g = MapGrid(8, 0.05)
    prev = [c.copy() for c in g.channels]
    for fr in history:
        cells = np.array([(x, y) for x, y, _ in fr], dtype=np.int64).reshape(-1, 2)
        conf = np.array([c for _, _, c in fr], dtype=np.float64).reshape(-1, 4)
        g.update_detection_channels(cells, conf, target)
        # monotone: evidence never decreases
        for k in range(3, 7):
            assert (g.channels[k] >= prev[k]).all()
        prev = [c.copy() for c in g.channels]
    # recompute from the full history, in arrival order
    cnt = np.zeros((8, 8), np.int32)
    csum = np.zeros((8, 8))
    cmax = np.zeros((8, 8))
    omax = np.zeros((8, 8))
    for fr in history:
        for x, y, c in fr:
            cnt[y, x] += 1
            csum[y, x] += c[target - 1]
            cmax[y, x] = max(cmax[y, x], c[target - 1])
            omax[y, x] = max(omax[y, x], max(c[:target - 1] + c[target:]))
    assert np.array_equal(g.ch_view_count, cnt)
    assert np.array_equal(g.ch_conf_sum, csum)
    assert np.array_equal(g.ch_conf_max, cmax)
    assert np.array_equal(g.ch_other_max, omax)
    # ordering: max <= sum <= count, everything zero where never seen
    assert (g.ch_conf_max <= g.ch_conf_sum + 1e-12).all()
    assert (g.ch_conf_sum <= g.ch_view_count + 1e-12).all()
    unseen = g.ch_view_count == 0
    assert not (g.ch_conf_sum[unseen].any() or g.ch_conf_max[unseen].any() or g.ch_other_max[unseen].any())


def test_criterion_7_channel_arithmetic(criterion):
    try:
        channel_arithmetic()
    except AssertionError:
        criterion(7, False, "counterexample found (see traceback)")
        raise
    criterion(7, True, "200 random view histories; channels 4-7 match recomputation exactly, monotone and ordered")


# ---------------------------------------------------------------- 8


def test_criterion_8_ablate_determinism(tmp_path, criterion):
    import json

    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"eval_seeds": [0, 2], "train_seeds": [100, 103], "episodes_per_seed": 3, "master_seed": 5, "bootstrap_resamples": 500}))
    outs = []
    for name in ("a", "b"):
        assert cli_main(["ablate", "--config", str(cfg), "--out", str(tmp_path / name)]) == 0
        outs.append(tmp_path / name)
    files = ["summary.csv", "episodes.jsonl", "traces.jsonl"]
    same = [(outs[0] / f).read_bytes() == (outs[1] / f).read_bytes() for f in files]
    rows = (outs[0] / "summary.csv").read_text().splitlines()
    criterion(8, all(same) and len(rows) == 6, f"identical={dict(zip(files, same))}")
    assert all(same) and len(rows) == 6


# ---------------------------------------------------------------- 9


def test_criterion_9_bootstrap_coverage(criterion):
    hits = 0
    for rep in range(100):
        x = np.random.default_rng(10_000 + rep).random(200) < 0.5
        lo, hi = bootstrap_ci(x.astype(float), level=0.95, resamples=10000, seed=rep)
        hits += lo <= 0.5 <= hi
    criterion(9, hits >= 90, f"coverage {hits}/100")
    assert hits >= 90
