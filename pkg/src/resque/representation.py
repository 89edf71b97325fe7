"""Class-wise embedding directions and the distribution-shift index."""

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_labels, check_matrix
from .exceptions import DegenerateError, MissingClassError, ParameterError
from .tensorio import read_tensor_file, write_tensor_file


@dataclass
class ClassEmbeddingSet:
    """Unit-norm summed representation per class, stacked as a ``(k, d)`` matrix."""

    vectors: np.ndarray

    @property
    def k(self):
        return self.vectors.shape[0]

    @property
    def rep_dim(self):
        return self.vectors.shape[1]

    def save(self, path):
        write_tensor_file(path, self.vectors, np.arange(self.k))

    @classmethod
    def load(cls, path):
        data, labels = read_tensor_file(path)
        vectors = np.asarray(data, dtype=np.float64)
        if labels is not None:
            vectors = vectors[np.argsort(labels, kind="stable")]
        return cls(vectors)


def class_embeddings(representations, labels, k):
    """Sum each class's representation rows and scale the sum to unit length.

    Sums are accumulated in float64.
    """
    X = check_matrix(representations, "representations")
    y = check_labels(labels, n=X.shape[0], num_classes=k)
    sums = np.zeros((k, X.shape[1]))
    np.add.at(sums, y, X)
    counts = np.bincount(y, minlength=k)
    for l in range(k):
        if counts[l] == 0:
            raise MissingClassError(l)
    norms = np.linalg.norm(sums, axis=1)
    zero = np.flatnonzero(norms == 0)
    if zero.size:
        raise DegenerateError(f"summed embedding of class {int(zero[0])} is the zero vector")
    return ClassEmbeddingSet(sums / norms[:, None])


def resque_dist(a, b):
    """Mean over classes of the angle (radians) between matching class directions."""
    if a.k != b.k or a.rep_dim != b.rep_dim:
        raise ParameterError(
            f"embedding sets differ: k {a.k} vs {b.k}, dim {a.rep_dim} vs {b.rep_dim}")
    dots = np.clip(np.einsum("ij,ij->i", a.vectors, b.vectors), -1.0, 1.0)
    return float(np.mean(np.arccos(dots)))


class ResqueDist(BaseEstimator):
    """Fit on original-distribution embeddings, then score shifted ones.

    Parameters
    ----------
    n_classes : int or None
        Number of classes; inferred from the labels seen in ``fit`` if None.

    Attributes
    ----------
    reference_ : ClassEmbeddingSet
    """

    def __init__(self, n_classes=None):
        self.n_classes = n_classes

    def fit(self, X, y):
        y = check_labels(y)
        self.n_classes_ = self.n_classes or int(y.max()) + 1
        self.reference_ = class_embeddings(X, y, self.n_classes_)
        return self

    def index(self, X, y):
        """RESQUE_dist between the fitted reference and ``(X, y)``."""
        check_is_fitted(self, "reference_")
        return resque_dist(self.reference_, class_embeddings(X, y, self.n_classes_))
