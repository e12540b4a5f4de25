import os
from pathlib import Path

import numpy as np
import pytest

from csgm.dataset import DataError, builtin_config, locate_file

REPO = Path(__file__).resolve().parents[1]
DATA_DIR = Path(os.environ.get("CSGM_DATA_DIR", REPO / "data"))


def dataset_available(name: str) -> bool:
    try:
        locate_file(builtin_config(name), DATA_DIR)
    except DataError:
        return False
    return True


def require_dataset(name: str):
    if not dataset_available(name):
        pytest.skip(f"{name} credit data not present under {DATA_DIR}")


def mixture_sample(rng, means, covs, weights, n):
    """Draw ``n`` points from a Gaussian mixture; returns (X, component index)."""
    z = rng.choice(len(weights), size=n, p=weights)
    X = np.empty((n, len(means[0])))
    for k in range(len(weights)):
        idx = z == k
        X[idx] = rng.multivariate_normal(means[k], covs[k], size=idx.sum())
    return X, z


def random_spd(rng, d, jitter=0.5):
    A = rng.normal(size=(d, d))
    return A @ A.T / d + jitter * np.eye(d)


@pytest.fixture
def data_dir():
    return DATA_DIR


# acceptance lines, echoed at the end of every pytest run
ACCEPTANCE_LINES = []


def acceptance_line(criterion, ok: bool, detail: str):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {criterion}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
