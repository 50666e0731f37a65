import numpy as np
import pytest

from stubborn.world_sim import World

_CRITERIA = {}


def make_world(occupancy, labels=None, invisible=None, target=1, distractor=0, seed=0, cell_size=0.05, num_categories=6):
    """Hand-built square world for scripted scenarios."""
    occ = np.asarray(occupancy, dtype=bool)
    n = occ.shape[0]
    labels = np.zeros((n, n), dtype=np.int16) if labels is None else np.asarray(labels, dtype=np.int16)
    invisible = np.zeros((n, n), dtype=bool) if invisible is None else np.asarray(invisible, dtype=bool)
    instances = []
    for cat in np.unique(labels[labels > 0]):
        ys, xs = np.nonzero(labels == cat)
        instances.append((int(cat), np.stack([xs, ys], axis=1)))
    return World(
        side_cells=n,
        cell_size_m=cell_size,
        occupancy=occ,
        invisible_mask=invisible,
        labels=labels,
        instances=instances,
        seed=seed,
        target_category=target,
        distractor_category=distractor,
        num_categories=num_categories,
    )


def boxed(n):
    """Occupancy with a one-cell solid rim."""
    occ = np.zeros((n, n), dtype=bool)
    occ[0, :] = occ[-1, :] = occ[:, 0] = occ[:, -1] = True
    return occ


@pytest.fixture
def criterion():
    """Record a one-line verdict for an acceptance criterion."""

    def record(number, passed, detail=""):
        _CRITERIA[number] = (passed, detail)

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_CRITERIA):
        passed, detail = _CRITERIA[k]
        terminalreporter.write_line(f"criterion {k}: {'PASS' if passed else 'FAIL'}  {detail}")
