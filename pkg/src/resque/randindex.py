"""Contingency tables, the complement of the Adjusted Rand Index, and the
new-task index pipeline."""

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from ._validation import check_labels
from .clustering import (
    centroids_from_labels,
    kmeanspp_init,
    lloyd,
    random_init_least_entropy,
    INIT_SCHEMES,
)
from .exceptions import ParameterError, ResqueError, StageError
from .trainer import extract_embeddings, retrain_one_epoch


@dataclass
class ContingencyTable:
    """``counts[i, j]``: samples in cluster ``i`` with true label ``j``."""

    counts: np.ndarray

    @property
    def row_sums(self):
        return self.counts.sum(axis=1)

    @property
    def col_sums(self):
        return self.counts.sum(axis=0)

    @property
    def n(self):
        return int(self.counts.sum())


def contingency(cluster_labels, true_labels, n_c):
    c = check_labels(cluster_labels, num_classes=n_c, name="cluster_labels")
    t = check_labels(true_labels, n=c.shape[0], num_classes=n_c, name="true_labels")
    counts = np.zeros((n_c, n_c), dtype=np.int64)
    np.add.at(counts, (c, t), 1)
    return ContingencyTable(counts)


def _pairs(values):
    # Python ints: pair counts and their products overflow int64 quickly.
    return sum(int(v) * (int(v) - 1) // 2 for v in np.asarray(values).ravel())


def adjusted_rand_index(table):
    """Exact ARI of a contingency table as a Fraction.

    A zero denominator (both partitions trivial in the same way) is defined
    as perfect agreement.
    """
    n = table.n
    if n < 2:
        raise ParameterError(f"need at least 2 samples, got {n}")
    total = n * (n - 1) // 2
    index = _pairs(table.counts)
    a = _pairs(table.row_sums)
    b = _pairs(table.col_sums)
    numerator = 2 * (index * total - a * b)
    denominator = (a + b) * total - 2 * a * b
    if denominator == 0:
        return Fraction(1)
    return Fraction(numerator, denominator)


def resque_task_index(table):
    """``1 - ARI``; zero for identical partitions, near one for chance, >1 below chance."""
    return float(1 - adjusted_rand_index(table))


def ari_score(cluster_labels, true_labels):
    c = check_labels(cluster_labels, name="cluster_labels")
    t = check_labels(true_labels, n=c.shape[0], name="true_labels")
    n_c = int(max(c.max(initial=0), t.max(initial=0))) + 1
    return float(adjusted_rand_index(contingency(c, t, n_c)))


@dataclass
class TaskIndexResult:
    index: float
    init_scheme: str
    seed: int
    epochs_used: int = 1
    cluster_labels: np.ndarray = None

    def to_dict(self):
        return {"index": self.index, "init_scheme": self.init_scheme,
                "epochs_used": self.epochs_used, "seed": self.seed}


def _stage(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except ResqueError as exc:
        raise StageError(name, exc) from exc


def initial_centroids(scheme, reps, labels, k, seed):
    if scheme == "labels":
        return centroids_from_labels(reps, labels, k)
    if scheme == "k-means++":
        return kmeanspp_init(reps, k, seed)
    if scheme == "random-entropy":
        return random_init_least_entropy(reps, labels, k, seed)
    raise ParameterError(f"unknown init scheme {scheme!r}; expected one of {INIT_SCHEMES}")


def resque_task_pipeline(original_params, new_task_ds, config, init_scheme="labels"):
    """Index how far the new task's classes are from separable for this model.

    One retraining epoch on the new task (fresh head), a forward pass for the
    representations, k-means with ``init_scheme`` starts, then ``1 - ARI``
    against the true labels.
    """
    k = new_task_ds.num_classes
    if k < 2:
        raise StageError("validate", ParameterError(f"new task needs >= 2 classes, got {k}"))
    if init_scheme not in INIT_SCHEMES:
        raise StageError("validate", ParameterError(f"unknown init scheme {init_scheme!r}"))
    params = _stage("retrain", retrain_one_epoch, original_params, new_task_ds, config)
    emb = _stage("embed", extract_embeddings, params, new_task_ds)
    init = _stage("init", initial_centroids, init_scheme, emb.representations,
                  emb.labels, k, config.seed)
    result = _stage("cluster", lloyd, emb.representations, init)
    table = _stage("score", contingency, result.labels, emb.labels, k)
    index = _stage("score", resque_task_index, table)
    return TaskIndexResult(index, init_scheme, config.seed, 1, result.labels)
