"""Lloyd's k-means with three centroid initialization schemes.

* ``"labels"``: per-class means of the representations (no randomness)
* ``"k-means++"``: D^2 seeding
* ``"random-entropy"``: the best of 20 random-partition starts, judged by the
  size-weighted entropy of true labels inside each final cluster
"""

from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_labels, check_matrix, check_positive_int
from .exceptions import MissingClassError, ParameterError

INIT_SCHEMES = ("labels", "k-means++", "random-entropy")
ENTROPY_SEEDS = 20


@dataclass
class ClusterAssignment:
    labels: np.ndarray
    centroids: np.ndarray
    inertia: float
    n_iter: int
    inertia_history: list = field(default_factory=list)


def centroids_from_labels(points, labels, k):
    """Mean representation of every label ``0..k-1``."""
    X = check_matrix(points, "points")
    y = check_labels(labels, n=X.shape[0], num_classes=k)
    sums = np.zeros((k, X.shape[1]))
    np.add.at(sums, y, X)
    counts = np.bincount(y, minlength=k)
    for i in range(k):
        if counts[i] == 0:
            raise MissingClassError(i)
    return sums / counts[:, None]


def _sq_dists(X, C):
    # Exact differences rather than the expanded form keep ties reproducible.
    out = np.empty((X.shape[0], C.shape[0]))
    for j in range(C.shape[0]):
        d = X - C[j]
        out[:, j] = np.einsum("ij,ij->i", d, d)
    return out


def _n_distinct(X):
    return np.unique(X, axis=0).shape[0]


def kmeanspp_init(points, k, seed=0):
    """k-means++ seeding: uniform first pick, then proportional to D^2."""
    X = check_matrix(points, "points")
    k = check_positive_int(k, "k", 1)
    if _n_distinct(X) < k:
        raise ParameterError(f"need at least {k} distinct points for k-means++")
    rng = np.random.default_rng(seed)
    chosen = [int(rng.integers(X.shape[0]))]
    d2 = _sq_dists(X, X[chosen])[:, 0]
    for _ in range(1, k):
        total = d2.sum()
        idx = int(rng.choice(X.shape[0], p=d2 / total))
        chosen.append(idx)
        d2 = np.minimum(d2, _sq_dists(X, X[[idx]])[:, 0])
    return X[chosen].copy()


def label_entropy(cluster_labels, true_labels):
    """Size-weighted entropy (nats) of true labels within each cluster."""
    c = np.asarray(cluster_labels)
    t = np.asarray(true_labels)
    n = c.shape[0]
    total = 0.0
    for cl in np.unique(c):
        members = t[c == cl]
        p = np.bincount(members) / members.size
        p = p[p > 0]
        total += members.size / n * float(-(p * np.log(p)).sum())
    return total


def _random_partition_centroids(X, k, rng):
    labels = rng.integers(0, k, size=X.shape[0])
    counts = np.bincount(labels, minlength=k)
    for j in np.flatnonzero(counts == 0):
        donors = np.flatnonzero(counts[labels] > 1)
        p = donors[rng.integers(donors.size)]
        counts[labels[p]] -= 1
        labels[p] = j
        counts[j] = 1
    sums = np.zeros((k, X.shape[1]))
    np.add.at(sums, labels, X)
    return sums / counts[:, None]


def random_init_least_entropy(points, true_labels, k, base_seed=0, n_seeds=ENTROPY_SEEDS,
                              tol=1e-4, max_iter=300, return_details=False):
    """Initial centroids of the least-entropy run among ``n_seeds`` random starts.

    Seeds ``base_seed .. base_seed + n_seeds - 1`` each draw a uniform random
    partition; its cluster means start a full Lloyd run. The run whose final
    clustering has the lowest label entropy wins (earliest seed on ties).
    """
    X = check_matrix(points, "points")
    k = check_positive_int(k, "k", 1)
    y = check_labels(true_labels, n=X.shape[0])
    if X.shape[0] < k:
        raise ParameterError(f"need at least {k} points")
    best = None
    entropies = []
    for s in range(base_seed, base_seed + n_seeds):
        init = _random_partition_centroids(X, k, np.random.default_rng(s))
        result = lloyd(X, init, tol=tol, max_iter=max_iter)
        h = label_entropy(result.labels, y)
        entropies.append(h)
        if best is None or h < best[0] - 1e-12:
            best = (h, s, init)
    if return_details:
        return best[2], {"seed": best[1], "entropy": best[0], "entropies": entropies}
    return best[2]


def _data_spread(X):
    return float(np.sqrt(np.sum(np.var(X, axis=0))))


def lloyd(points, init, tol=1e-4, max_iter=300):
    """Alternate nearest-centroid assignment and mean updates.

    Stops once no centroid moves more than ``tol`` times the data spread (RMS
    distance to the global mean) or after ``max_iter`` iterations. An empty
    cluster is reseeded with the point farthest from its current centroid.
    A final assignment against the returned centroids guarantees every label
    is that point's nearest centroid (ties to the lowest index).
    """
    X = check_matrix(points, "points")
    C = np.array(init, dtype=np.float64)
    if C.ndim != 2 or C.shape[1] != X.shape[1]:
        raise ParameterError(f"init has shape {C.shape}, points have {X.shape[1]} features")
    k = C.shape[0]
    if k > X.shape[0]:
        raise ParameterError(f"{k} centroids but only {X.shape[0]} points")
    max_iter = check_positive_int(max_iter, "max_iter")
    threshold = tol * _data_spread(X)

    history = []
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        d2 = _sq_dists(X, C)
        labels = np.argmin(d2, axis=1)
        counts = np.bincount(labels, minlength=k)
        if np.any(counts == 0):
            own = d2[np.arange(X.shape[0]), labels]
            for j in np.flatnonzero(counts == 0):
                candidates = np.flatnonzero(counts[labels] > 1)
                far = candidates[np.argmax(own[candidates])]
                counts[labels[far]] -= 1
                labels[far] = j
                counts[j] = 1
                own[far] = 0.0
        sums = np.zeros_like(C)
        np.add.at(sums, labels, X)
        new_C = sums / counts[:, None]
        shift = float(np.max(np.linalg.norm(new_C - C, axis=1)))
        C = new_C
        diff = X - C[labels]
        history.append(float(np.einsum("ij,ij->", diff, diff)))
        if shift <= threshold:
            break
    d2 = _sq_dists(X, C)
    labels = np.argmin(d2, axis=1)
    inertia = float(d2[np.arange(X.shape[0]), labels].sum())
    return ClusterAssignment(labels, C, inertia, n_iter, history)


class KMeans(ClusterMixin, BaseEstimator):
    """k-means estimator with label-mean, k-means++ or least-entropy starts.

    ``fit(X, y)`` needs the true labels ``y`` for ``init="labels"`` and
    ``init="random-entropy"``.
    """

    def __init__(self, n_clusters=8, init="labels", tol=1e-4, max_iter=300,
                 random_state=0, n_entropy_seeds=ENTROPY_SEEDS):
        self.n_clusters = n_clusters
        self.init = init
        self.tol = tol
        self.max_iter = max_iter
        self.random_state = random_state
        self.n_entropy_seeds = n_entropy_seeds

    def _initial_centroids(self, X, y):
        k = check_positive_int(self.n_clusters, "n_clusters", 1)
        if self.init not in INIT_SCHEMES:
            raise ParameterError(f"unknown init {self.init!r}; expected one of {INIT_SCHEMES}")
        if self.init == "k-means++":
            return kmeanspp_init(X, k, self.random_state)
        if y is None:
            raise ParameterError(f"init={self.init!r} needs true labels y")
        if self.init == "labels":
            return centroids_from_labels(X, y, k)
        return random_init_least_entropy(X, y, k, self.random_state, self.n_entropy_seeds,
                                         self.tol, self.max_iter)

    def fit(self, X, y=None):
        X = check_matrix(X, "X")
        init = self._initial_centroids(X, y)
        result = lloyd(X, init, self.tol, self.max_iter)
        self.init_centroids_ = init
        self.cluster_centers_ = result.centroids
        self.labels_ = result.labels
        self.inertia_ = result.inertia
        self.n_iter_ = result.n_iter
        return self

    def predict(self, X):
        check_is_fitted(self, "cluster_centers_")
        return np.argmin(_sq_dists(check_matrix(X, "X"), self.cluster_centers_), axis=1)
