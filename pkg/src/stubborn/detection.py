"""Two-stage target detection.

Stage one triggers a candidate cell from a single frame. Stage two runs once the
agent is close to the candidate: a per-category Gaussian Naive Bayes classifier
looks at the evidence the map accumulated for that cell over the whole episode
and either accepts (stop) or rejects (blacklist the cell and keep exploring).
"""

import json
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

TRIGGER_THRESHOLD = 0.5
VERIFY_DISTANCE_M = 1.0
LATE_TRIGGER_STEP = 200
VAR_FLOOR = 1e-6

EXPLORING = "exploring"
APPROACHING = "approaching"
DONE = "done"

ACCEPT = "accept"
REJECT = "reject"

STOP = "stop"
BLACKLIST_AND_RESUME = "blacklist_and_resume"
STOP_WITHOUT_VERIFICATION = "stop_without_verification"


class FeatureVector4(NamedTuple):
    total_view: float
    conf_sum: float
    conf_max: float
    other_max: float


@dataclass
class CandidateState:
    phase: str = EXPLORING
    target_cell: tuple = None
    trigger_step: int = -1
    blacklist: set = field(default_factory=set)

    def start_approach(self, cell, step):
        if cell in self.blacklist:
            raise ValueError("cannot approach a blacklisted cell")
        self.phase = APPROACHING
        self.target_cell = cell
        self.trigger_step = step

    def reject_current(self):
        self.blacklist.update(blacklist_cells(self.target_cell))
        self.phase = EXPLORING
        self.target_cell = None
        self.trigger_step = -1


def blacklist_cells(cell):
    x, y = cell
    return {(x + dx, y + dy) for dy in (-1, 0, 1) for dx in (-1, 0, 1)}


def detect_candidate(cells, confidences, target, blacklist=()):
    """Non-blacklisted cell with the highest target confidence above 0.5, or None.

    Ties on confidence go to the lowest ``(y, x)``.
    """
    if len(cells) == 0:
        return None
    c = np.asarray(confidences)[:, target - 1]
    idx = np.nonzero(c > TRIGGER_THRESHOLD)[0]
    if len(idx) == 0:
        return None
    cells = np.asarray(cells)
    best = None
    for i in idx:
        cell = (int(cells[i, 0]), int(cells[i, 1]))
        if cell in blacklist:
            continue
        key = (-c[i], cell[1], cell[0])
        if best is None or key < best[0]:
            best = (key, cell)
    return None if best is None else best[1]


def should_verify(agent, target_center_m):
    return math.hypot(agent.x_m - target_center_m[0], agent.y_m - target_center_m[1]) <= VERIFY_DISTANCE_M


def extract_features(grid, cell):
    x, y = cell
    n = int(grid.ch_view_count[y, x])
    if n == 0:
        raise ValueError("unseen cell")
    return FeatureVector4(float(n), float(grid.ch_conf_sum[y, x]), float(grid.ch_conf_max[y, x]), float(grid.ch_other_max[y, x]))


def verification_decision(trigger_step, prediction=None, late_step=LATE_TRIGGER_STEP):
    if trigger_step > late_step:
        return STOP_WITHOUT_VERIFICATION
    if prediction is None:
        raise ValueError("prediction required for an early trigger")
    return STOP if prediction == ACCEPT else BLACKLIST_AND_RESUME


# ---------------------------------------------------------------- naive bayes


@dataclass
class NBEntry:
    prior_pos: float
    prior_neg: float
    means_pos: np.ndarray
    vars_pos: np.ndarray
    means_neg: np.ndarray
    vars_neg: np.ndarray
    n_pos: int
    n_neg: int

    def log_joint(self, x):
        """Log prior plus Gaussian log likelihood for (positive, negative)."""
        x = np.asarray(x, dtype=np.float64)

        def ll(mu, var):
            return float(np.sum(-0.5 * np.log(2.0 * np.pi * var) - (x - mu) ** 2 / (2.0 * var)))

        return (
            math.log(self.prior_pos) + ll(self.means_pos, self.vars_pos),
            math.log(self.prior_neg) + ll(self.means_neg, self.vars_neg),
        )

    def to_dict(self):
        return {
            "prior_pos": self.prior_pos,
            "prior_neg": self.prior_neg,
            "means_pos": [float(v) for v in self.means_pos],
            "vars_pos": [float(v) for v in self.vars_pos],
            "means_neg": [float(v) for v in self.means_neg],
            "vars_neg": [float(v) for v in self.vars_neg],
            "n_pos": int(self.n_pos),
            "n_neg": int(self.n_neg),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            prior_pos=float(d["prior_pos"]),
            prior_neg=float(d["prior_neg"]),
            means_pos=np.asarray(d["means_pos"], dtype=np.float64),
            vars_pos=np.asarray(d["vars_pos"], dtype=np.float64),
            means_neg=np.asarray(d["means_neg"], dtype=np.float64),
            vars_neg=np.asarray(d["vars_neg"], dtype=np.float64),
            n_pos=int(d["n_pos"]),
            n_neg=int(d["n_neg"]),
        )


def nb_train(samples, category=None, var_floor=VAR_FLOOR):
    """Fit priors and per-feature Gaussians from ``(features, is_positive)`` pairs."""
    X = np.asarray([f for f, _ in samples], dtype=np.float64).reshape(-1, 4)
    y = np.asarray([bool(lbl) for _, lbl in samples], dtype=bool)
    n_pos, n_neg = int(y.sum()), int((~y).sum())
    if n_pos == 0 or n_neg == 0:
        raise ValueError("degenerate training set")
    pos, neg = X[y], X[~y]
    return NBEntry(
        prior_pos=n_pos / len(y),
        prior_neg=n_neg / len(y),
        means_pos=pos.mean(axis=0),
        vars_pos=np.maximum(pos.var(axis=0), var_floor),
        means_neg=neg.mean(axis=0),
        vars_neg=np.maximum(neg.var(axis=0), var_floor),
        n_pos=n_pos,
        n_neg=n_neg,
    )


class NBModel:
    """Per-category verifiers."""

    def __init__(self, entries=None):
        self.entries = dict(entries or {})

    def __contains__(self, category):
        return category in self.entries

    def fit(self, samples_by_category):
        for cat, samples in samples_by_category.items():
            self.entries[int(cat)] = nb_train(samples, cat)
        return self

    def predict(self, features, category):
        return nb_predict(self, features, category)

    def to_json(self):
        return json.dumps({str(k): v.to_dict() for k, v in sorted(self.entries.items())}, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text):
        data = json.loads(text)
        return cls({int(k): NBEntry.from_dict(v) for k, v in data.items()})

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(self.to_json())

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_json(fh.read())


def nb_predict(model, features, category):
    """Accept only if the positive log posterior is strictly larger."""
    if category not in model.entries:
        raise KeyError(f"no verifier trained for category {category}")
    lp, ln = model.entries[category].log_joint(features)
    return ACCEPT if lp > ln else REJECT
