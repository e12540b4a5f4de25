"""SMOTE oversampling with a single nearest neighbour."""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np

from . import _kernels
from .dataset import EncodedDataset
from .errors import DataError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SmoteConfig:
    seed: int = 0
    target: str = "balance-to-majority"

    def __post_init__(self):
        if self.target != "balance-to-majority":
            raise ValueError(f"unsupported SMOTE target {self.target!r}")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")


def _open_unit_uniform(rng, size):
    alpha = rng.random(size)
    while np.any(alpha == 0.0):
        zero = alpha == 0.0
        alpha[zero] = rng.random(int(zero.sum()))
    return alpha


def smote_balance(train: EncodedDataset, cfg: SmoteConfig) -> EncodedDataset:
    """Grow the minority class until both classes have the majority count.

    Each synthetic row is ``x1 + alpha * (x2 - x1)`` where ``x1`` is a
    minority row drawn uniformly with replacement, ``x2`` its nearest other
    minority row (Euclidean, ties to the lowest index) and
    ``alpha ~ U(0, 1)`` exclusive of both ends. The input rows come first,
    unchanged; synthetic rows are appended.
    """
    n_zero, n_one = train.class_counts()
    if n_zero == 0 or n_one == 0:
        raise DataError("SMOTE needs both classes present", stage="smote")
    if n_zero == n_one:
        return train
    minority = 0 if n_zero < n_one else 1
    need = abs(n_one - n_zero)
    P = np.ascontiguousarray(train.features[train.labels == minority])
    rng = np.random.default_rng(int(cfg.seed))

    if P.shape[0] == 1:
        logger.warning("minority class has a single member; duplicating it %d times", need)
        synth = np.repeat(P, need, axis=0)
    else:
        neighbour = _kernels.kernels.nearest_neighbours(P)
        first = rng.integers(0, P.shape[0], size=need)
        alpha = _open_unit_uniform(rng, need)[:, None]
        x1 = P[first]
        x2 = P[neighbour[first]]
        synth = x1 + alpha * (x2 - x1)
        # rounding must not push a coordinate outside the segment's box
        synth = np.clip(synth, np.minimum(x1, x2), np.maximum(x1, x2))

    features = np.vstack([train.features, synth])
    labels = np.concatenate([train.labels, np.full(need, minority)])
    return replace(train, features=features, labels=labels)
