"""Binary credit classifier built from an unsupervised Gaussian mixture.

Pipeline:

1. every sample gets a dependency probability for each mixture component
   (its posterior responsibility) and is assigned to the most probable one;
2. each cluster records the share of good-credit training members it holds
   and is labeled good when that share exceeds one half;
3. the probability of good credit for any sample is the dependency-weighted
   average of the cluster shares;
4. a sample is labeled good when that probability exceeds the decision
   boundary ``D``.

Shares and ``D`` are frozen after training; scoring new data only repeats
steps 1 and 4.
"""

from __future__ import annotations

import contextlib
import json
from dataclasses import dataclass, replace

import numpy as np

from . import gmm as _gmm
from .dataset import EncodedDataset, Standardization
from .errors import CsgmError, DataError, NumericalError
from .gmm import EmConfig, FitReport, GmmParams
from .resample import SmoteConfig, smote_balance

DEFAULT_RANGE = (1, 12)
DEFAULT_BOUNDARY = 0.5


@dataclass(frozen=True)
class ClusterLabeling:
    ratio_good: np.ndarray
    cluster_labels: np.ndarray
    cluster_counts: np.ndarray  # (K, 2): count of label 0, count of label 1
    empty: np.ndarray


@dataclass(frozen=True)
class CsgmModel:
    gmm: GmmParams
    ratio_good: np.ndarray
    cluster_labels: np.ndarray
    decision_boundary: float = DEFAULT_BOUNDARY
    cluster_counts: np.ndarray | None = None
    empty_clusters: np.ndarray | None = None
    standardization: Standardization | None = None
    seed: int | None = None

    def __post_init__(self):
        k = self.gmm.n_components
        ratio = np.asarray(self.ratio_good, dtype=float)
        labels = np.asarray(self.cluster_labels, dtype=np.int64)
        if ratio.shape != (k,) or labels.shape != (k,):
            raise ValueError(f"expected {k} cluster ratios and labels")
        if np.any(ratio < 0) or np.any(ratio > 1):
            raise ValueError("cluster ratios must lie in [0, 1]")
        if not np.array_equal(labels, (ratio > 0.5).astype(np.int64)):
            raise ValueError("cluster labels must equal (ratio_good > 0.5)")
        if not 0.0 <= self.decision_boundary <= 1.0:
            raise ValueError(f"decision boundary must lie in [0, 1], got {self.decision_boundary}")
        counts = (np.zeros((k, 2), dtype=np.int64) if self.cluster_counts is None
                  else np.asarray(self.cluster_counts, dtype=np.int64).reshape(k, 2))
        empty = (counts.sum(axis=1) == 0 if self.empty_clusters is None
                 else np.asarray(self.empty_clusters, dtype=bool))
        for arr in (ratio, labels, counts, empty):
            arr.setflags(write=False)
        object.__setattr__(self, "ratio_good", ratio)
        object.__setattr__(self, "cluster_labels", labels)
        object.__setattr__(self, "cluster_counts", counts)
        object.__setattr__(self, "empty_clusters", empty)

    @property
    def n_components(self) -> int:
        return self.gmm.n_components

    def with_boundary(self, boundary: float) -> "CsgmModel":
        return replace(self, decision_boundary=float(boundary))

    def to_dict(self) -> dict:
        return {
            "gmm": self.gmm.to_dict(),
            "ratio_good": self.ratio_good.tolist(),
            "cluster_labels": self.cluster_labels.tolist(),
            "decision_boundary": self.decision_boundary,
            "cluster_counts": self.cluster_counts.tolist(),
            "empty_clusters": self.empty_clusters.tolist(),
            "standardization": None if self.standardization is None else self.standardization.to_dict(),
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "CsgmModel":
        st = doc.get("standardization")
        return cls(
            gmm=GmmParams.from_dict(doc["gmm"]),
            ratio_good=np.asarray(doc["ratio_good"], dtype=float),
            cluster_labels=np.asarray(doc["cluster_labels"]),
            decision_boundary=float(doc["decision_boundary"]),
            cluster_counts=np.asarray(doc["cluster_counts"]),
            empty_clusters=np.asarray(doc["empty_clusters"]) if "empty_clusters" in doc else None,
            standardization=None if st is None else Standardization.from_dict(st),
            seed=doc.get("seed"),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "CsgmModel":
        return cls.from_dict(json.loads(text))


# --------------------------------------------------------------------------
# the four steps
# --------------------------------------------------------------------------


def dependency_probabilities(x, gmm: GmmParams) -> np.ndarray:
    """Posterior component probabilities; a vector for one sample, a matrix for many."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    resp, _ = _gmm._normalize(_gmm.weighted_log_densities(np.atleast_2d(x), gmm))
    return resp[0] if single else resp


def assign_cluster(probs):
    """Index of the most probable cluster; exact ties go to the lowest index."""
    probs = np.asarray(probs, dtype=float)
    if probs.size == 0:
        raise ValueError("empty probability vector")
    if probs.ndim == 1:
        return int(np.argmax(probs))
    return np.argmax(probs, axis=1)


def label_clusters(assignments, labels, n_components: int) -> ClusterLabeling:
    """Good-credit share and majority label of every cluster.

    A cluster labeled 1 needs a strictly greater share of good members;
    a 50/50 cluster is labeled 0. A cluster with no members receives the
    overall good-credit rate and is flagged as empty.
    """
    if n_components <= 0:
        raise ValueError("n_components must be positive")
    assignments = np.asarray(assignments, dtype=np.int64)
    labels = np.asarray(labels, dtype=np.int64)
    if assignments.shape != labels.shape:
        raise ValueError("assignments and labels differ in length")
    if assignments.size and (assignments.min() < 0 or assignments.max() >= n_components):
        raise ValueError("cluster index out of range")
    ones = np.bincount(assignments[labels == 1], minlength=n_components)
    zeros = np.bincount(assignments[labels == 0], minlength=n_components)
    size = ones + zeros
    empty = size == 0
    prior = labels.mean() if labels.size else 0.5
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(empty, prior, ones / np.maximum(size, 1))
    return ClusterLabeling(
        ratio_good=ratio.astype(float),
        cluster_labels=(ratio > 0.5).astype(np.int64),
        cluster_counts=np.stack([zeros, ones], axis=1),
        empty=empty,
    )


def posterior_good(x, model: CsgmModel):
    """Probability of good credit: sum_k share_k * p(x in cluster k)."""
    probs = dependency_probabilities(x, model.gmm)
    p = np.clip(probs @ model.ratio_good, 0.0, 1.0)
    return float(p) if np.ndim(p) == 0 else p


def predict(x, model: CsgmModel):
    """1 when the good-credit probability is strictly above the boundary."""
    p = posterior_good(x, model)
    if np.ndim(p) == 0:
        return int(p > model.decision_boundary)
    return (p > model.decision_boundary).astype(np.int64)


def predict_hard(x, model: CsgmModel):
    """Label of the most probable cluster (the hard-assignment path)."""
    k = assign_cluster(dependency_probabilities(x, model.gmm))
    if np.ndim(k) == 0:
        return int(model.cluster_labels[k])
    return model.cluster_labels[k]


# --------------------------------------------------------------------------
# training
# --------------------------------------------------------------------------


@dataclass
class TrainingReport:
    em: FitReport
    n_components: int
    criterion: str
    train_class_counts: tuple
    smote_applied: bool
    train_accuracy: float
    train_data: EncodedDataset | None = None

    def to_dict(self) -> dict:
        return {
            "n_components": self.n_components,
            "criterion": self.criterion,
            "train_class_counts": list(self.train_class_counts),
            "smote_applied": self.smote_applied,
            "train_accuracy": self.train_accuracy,
            "em": self.em.to_dict(),
        }


@contextlib.contextmanager
def _stage(name):
    try:
        yield
    except CsgmError as exc:
        if exc.stage is None:
            raise type(exc)(str(exc), stage=name) from exc
        raise
    except ValueError as exc:
        raise NumericalError(str(exc), stage=name) from exc


def fit_csgm(train: EncodedDataset, em_cfg: EmConfig, n_range=DEFAULT_RANGE, criterion="bic",
             smote: SmoteConfig | None = None, boundary: float = DEFAULT_BOUNDARY):
    """Optional SMOTE, component selection, EM fit, then cluster labeling.

    Returns ``(model, report, selection_table)``.
    """
    if not 0.0 <= boundary <= 1.0:
        raise DataError(f"decision boundary must lie in [0, 1], got {boundary}", stage="fit_csgm")
    data = train
    if smote is not None:
        with _stage("smote"):
            data = smote_balance(train, smote)
    with _stage("select"):
        chosen, table, fits = _gmm._select(data.features, n_range, em_cfg, criterion)
    params, em_report = fits[chosen]
    with _stage("label"):
        probs = dependency_probabilities(data.features, params)
        labeling = label_clusters(assign_cluster(probs), data.labels, chosen)
    model = CsgmModel(
        gmm=params,
        ratio_good=labeling.ratio_good,
        cluster_labels=labeling.cluster_labels,
        decision_boundary=float(boundary),
        cluster_counts=labeling.cluster_counts,
        empty_clusters=labeling.empty,
        standardization=train.standardization,
        seed=int(em_cfg.seed),
    )
    train_pred = (np.clip(probs @ model.ratio_good, 0.0, 1.0) > boundary).astype(np.int64)
    report = TrainingReport(
        em=em_report,
        n_components=chosen,
        criterion=criterion.lower(),
        train_class_counts=data.class_counts(),
        smote_applied=data is not train,
        train_accuracy=float(np.mean(train_pred == data.labels)),
        train_data=data,
    )
    return model, report, table
