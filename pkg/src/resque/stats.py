"""Pearson and Spearman correlation with two-sided Student-t p-values."""

from dataclasses import dataclass

import numpy as np
from scipy.special import betainc
from scipy.stats import rankdata

from .exceptions import ParameterError


class UndefinedCorrelationError(ParameterError):
    """One of the series is constant."""


@dataclass(frozen=True)
class CorrelationResult:
    coefficient: float
    p_value: float
    n: int


def _check_pair(x, y):
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.shape != y.shape:
        raise ParameterError(f"series lengths differ: {x.size} vs {y.size}")
    if x.size < 3:
        raise ParameterError(f"need at least 3 observations, got {x.size}")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ParameterError("series contain non-finite values")
    if np.all(x == x[0]) or np.all(y == y[0]):
        raise UndefinedCorrelationError("correlation is undefined for a constant series")
    return x, y


def _r(x, y):
    xc = x - x.mean()
    yc = y - y.mean()
    r = float(np.dot(xc, yc) / np.sqrt(np.dot(xc, xc) * np.dot(yc, yc)))
    return min(1.0, max(-1.0, r))


def t_pvalue(r, n):
    """Two-sided p-value of ``r`` under H0 via t with ``n - 2`` dof.

    Uses ``P(|T| >= t) = I_{df/(df+t^2)}(df/2, 1/2)``, rewritten in terms of
    r so that |r| = 1 maps cleanly to 0.
    """
    df = n - 2
    one_minus = max(0.0, (1.0 - r) * (1.0 + r))
    # df / (df + t^2) with t^2 = df r^2 / (1 - r^2) simplifies to 1 - r^2.
    return float(betainc(0.5 * df, 0.5, one_minus))


def pearson(x, y):
    x, y = _check_pair(x, y)
    r = _r(x, y)
    return CorrelationResult(r, t_pvalue(r, x.size), x.size)


def spearman(x, y):
    """Pearson correlation of average ranks."""
    x, y = _check_pair(x, y)
    r = _r(rankdata(x), rankdata(y))
    return CorrelationResult(r, t_pvalue(r, x.size), x.size)


def permutation_pvalue(x, y, method="pearson", n_resamples=100_000, seed=0,
                       chunk=10_000):
    """Two-sided permutation p-value ``(1 + #{|r_perm| >= |r|}) / (1 + B)``."""
    x, y = _check_pair(x, y)
    if method == "spearman":
        x, y = rankdata(x), rankdata(y)
    elif method != "pearson":
        raise ParameterError(f"unknown method {method!r}")
    xc = x - x.mean()
    yc = y - y.mean()
    scale = np.sqrt(np.dot(xc, xc) * np.dot(yc, yc))
    observed = abs(np.dot(xc, yc) / scale)
    rng = np.random.default_rng(seed)
    hits = 0
    done = 0
    while done < n_resamples:
        m = min(chunk, n_resamples - done)
        perms = rng.permuted(np.broadcast_to(yc, (m, yc.size)), axis=1)
        r = np.abs(perms @ xc) / scale
        hits += int(np.sum(r >= observed - 1e-12))
        done += m
    return (1 + hits) / (1 + n_resamples)
