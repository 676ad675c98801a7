import time

import numpy as np
import pytest

from scorefuse.types import LabelSpace, ProbVector, ScoreRow, ScoreTable

_SESSION_STARTED = time.perf_counter()


def pytest_sessionfinish(session, exitstatus):
    elapsed = time.perf_counter() - _SESSION_STARTED
    within = "yes" if elapsed < 120.0 else "NO"
    print(f"\nprimary suite wall time: {elapsed:.1f}s (under the 120s budget: {within})")


@pytest.fixture
def binary_space():
    return LabelSpace.of(("no", "yes"))


@pytest.fixture
def four_space():
    return LabelSpace.of(("no_tumor", "glioma", "meningioma", "pituitary"))


def random_prob_vector(rng, k):
    raw = rng.uniform(0.01, 1.0, size=k)
    return ProbVector(tuple(float(v) for v in raw / raw.sum()))


def random_table(rng, space, n, model_id="m", with_labels=True, sample_ids=None, labels=None):
    ids = sample_ids or [f"s{i:03d}" for i in range(n)]
    if labels is None and with_labels:
        labels = [str(rng.choice(space.classes)) for _ in range(n)]
    rows = tuple(
        ScoreRow(
            ids[i],
            random_prob_vector(rng, len(space)),
            labels[i] if labels is not None else None,
        )
        for i in range(n)
    )
    return ScoreTable(space, model_id, rows)


def blob_dataset(rng, centers, n_per_class, scale=0.6):
    """Gaussian blobs in 2-D; returns (X, label names, label space)."""
    xs, ys = [], []
    names = [f"c{j}" for j in range(len(centers))]
    for j, center in enumerate(centers):
        xs.append(rng.normal(loc=center, scale=scale, size=(n_per_class, 2)))
        ys.extend([names[j]] * n_per_class)
    return np.vstack(xs), ys, LabelSpace.of(tuple(names))
