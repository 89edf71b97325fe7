"""Corruption ladders: Gaussian noise, Gaussian blur and salt-and-pepper."""

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.ndimage import correlate1d
from sklearn.base import BaseEstimator, TransformerMixin

from ._validation import round_half_away
from .exceptions import ParameterError

KINDS = ("gaussian", "blur", "salt_pepper")
MAX_LEVEL = 10


@dataclass(frozen=True)
class NoiseSpec:
    kind: str
    level: int
    seed: int = 0

    def to_dict(self):
        return {"kind": self.kind, "level": self.level, "seed": self.seed}


def _check_kind_level(kind, level):
    if kind not in KINDS:
        raise ParameterError(f"unknown shift kind {kind!r}; expected one of {KINDS}")
    if isinstance(level, bool) or int(level) != level or not 0 <= level <= MAX_LEVEL:
        raise ParameterError(f"level must be an integer in 0..{MAX_LEVEL}, got {level!r}")
    return int(level)


def level_params(kind, level):
    """Ladder parameters for ``kind`` at ``level`` (linear in the level)."""
    level = _check_kind_level(kind, level)
    if kind == "gaussian":
        return {"sigma": float(Fraction(3, 100) * level)}
    if kind == "blur":
        sigma = float(Fraction(15, 100) * level)
        return {"sigma": sigma, "radius": math.ceil(Fraction(15, 100) * level * 2)}
    return {"p": float(Fraction(15, 1000) * level)}


def gaussian_kernel(sigma, radius):
    if radius == 0 or sigma == 0:
        return np.ones(1)
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


def _as_images(samples):
    x = np.asarray(samples)
    if x.ndim == 3:
        return x[..., None], True
    if x.ndim != 4:
        raise ParameterError(f"expected (n, H, W[, C]) samples, got shape {x.shape}")
    return x, False


def shift_samples(samples, kind, level, seed=0):
    """Apply one corruption to an array of images with values in ``[0, 1]``."""
    params = level_params(kind, level)
    x, squeezed = _as_images(samples)
    if x.size and (np.nanmin(x) < 0 or np.nanmax(x) > 1 or not np.all(np.isfinite(x))):
        raise ParameterError("sample values must lie in [0, 1]")
    if level == 0:
        return np.array(samples, copy=True)

    rng = np.random.default_rng(seed)
    if kind == "gaussian":
        noisy = x.astype(np.float64) + rng.normal(0.0, params["sigma"], size=x.shape)
        out = np.clip(noisy, 0.0, 1.0)
    elif kind == "blur":
        kernel = gaussian_kernel(params["sigma"], params["radius"])
        out = correlate1d(x.astype(np.float64), kernel, axis=1, mode="reflect")
        out = correlate1d(out, kernel, axis=2, mode="reflect")
        out = np.clip(out, 0.0, 1.0)
    else:
        n, h, w, _ = x.shape
        count = round_half_away(params["p"], h * w)
        out = x.astype(np.float64).copy()
        flat = out.reshape(n, h * w, -1)
        for i in range(n):
            pos = rng.choice(h * w, size=count, replace=False)
            flat[i, pos, :] = rng.integers(0, 2, size=count)[:, None]
    out = out.astype(np.asarray(samples).dtype)
    return out[..., 0] if squeezed else out


def apply_shift(ds, spec):
    """Corrupt a :class:`~resque.datasets.LabeledDataset`; labels are kept."""
    return ds.with_samples(shift_samples(ds.samples, spec.kind, spec.level, spec.seed))


class ShiftTransformer(TransformerMixin, BaseEstimator):
    """Stateless transformer wrapper around :func:`shift_samples`."""

    def __init__(self, kind="gaussian", level=0, seed=0):
        self.kind = kind
        self.level = level
        self.seed = seed

    def fit(self, X, y=None):
        level_params(self.kind, self.level)
        return self

    def transform(self, X):
        return shift_samples(X, self.kind, self.level, self.seed)
