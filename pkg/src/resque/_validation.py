"""Input checks shared by the estimators and functional APIs."""

from decimal import ROUND_HALF_UP, Decimal

import numpy as np

from .exceptions import ParameterError


def round_half_away(fraction, n):
    """``round(fraction * n)`` with halves rounded away from zero.

    The product is formed in decimal arithmetic so that e.g. ``0.7 * 25``
    is exactly 17.5 rather than a binary approximation of it.
    """
    value = Decimal(repr(float(fraction))) * Decimal(int(n))
    return int(value.to_integral_value(rounding=ROUND_HALF_UP))


def check_labels(labels, n=None, num_classes=None, name="labels"):
    lab = np.asarray(labels)
    if lab.ndim != 1:
        raise ParameterError(f"{name} must be one-dimensional, got shape {lab.shape}")
    if lab.size and not np.issubdtype(lab.dtype, np.integer):
        if not np.all(np.equal(np.mod(lab, 1), 0)):
            raise ParameterError(f"{name} must be integers")
    lab = lab.astype(np.int64)
    if n is not None and lab.shape[0] != n:
        raise ParameterError(f"{name} has length {lab.shape[0]}, expected {n}")
    if lab.size and lab.min() < 0:
        raise ParameterError(f"{name} must be non-negative")
    if num_classes is not None and lab.size and lab.max() >= num_classes:
        raise ParameterError(
            f"{name} contains {lab.max()} which is out of range for {num_classes} classes"
        )
    return lab


def check_matrix(X, name="X", min_rows=1):
    arr = np.asarray(X, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        arr = arr.reshape(arr.shape[0], -1)
    if arr.shape[0] < min_rows:
        raise ParameterError(f"{name} needs at least {min_rows} rows, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise ParameterError(f"{name} contains non-finite values")
    return arr


def check_fraction(value, name, allow_zero=False):
    value = float(value)
    lo_ok = value >= 0 if allow_zero else value > 0
    if not (lo_ok and value <= 1):
        bound = "[0, 1]" if allow_zero else "(0, 1]"
        raise ParameterError(f"{name} must be in {bound}, got {value}")
    return value


def check_positive_int(value, name, minimum=1):
    if isinstance(value, bool) or int(value) != value or value < minimum:
        raise ParameterError(f"{name} must be an integer >= {minimum}, got {value!r}")
    return int(value)
