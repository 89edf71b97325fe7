"""Synthetic texture datasets and the original/shifted split protocol.

All randomness comes from ``numpy.random.default_rng`` (PCG64) seeded with an
explicit integer, so a fixed seed reproduces the same bytes on every run.
"""

from dataclasses import dataclass

import numpy as np

from ._validation import (
    check_fraction,
    check_labels,
    check_positive_int,
    round_half_away,
)
from .exceptions import ParameterError
from .tensorio import read_tensor_file, write_tensor_file

NOISE_SIGMA = 0.05
AMPLITUDE = 0.35
FREQ_RANGE = (2.5, 5.0)
PHASE_SPAN = 2.0 * np.pi


@dataclass
class LabeledDataset:
    """Samples of shape ``(n, H, W, C)`` in ``[0, 1]`` plus integer labels."""

    samples: np.ndarray
    labels: np.ndarray
    num_classes: int

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float32)
        self.labels = check_labels(self.labels, n=self.samples.shape[0],
                                   num_classes=self.num_classes)
        if self.num_classes < 1:
            raise ParameterError("num_classes must be >= 1")

    def __len__(self):
        return self.samples.shape[0]

    @property
    def image_shape(self):
        return tuple(self.samples.shape[1:])

    def class_counts(self):
        return np.bincount(self.labels, minlength=self.num_classes)

    def subset(self, indices):
        idx = np.asarray(indices, dtype=np.int64)
        return LabeledDataset(self.samples[idx], self.labels[idx], self.num_classes)

    def with_samples(self, samples):
        return LabeledDataset(samples, self.labels.copy(), self.num_classes)


@dataclass(frozen=True)
class SplitSpec:
    original_fraction: float = 0.70
    shifted_fraction: float = 0.50
    overlap_fraction: float = 0.20
    seed: int = 0

    def validate(self):
        o = check_fraction(self.original_fraction, "original_fraction")
        s = check_fraction(self.shifted_fraction, "shifted_fraction")
        v = check_fraction(self.overlap_fraction, "overlap_fraction", allow_zero=True)
        if v > min(o, s) + 1e-12:
            raise ParameterError("overlap_fraction must not exceed either split fraction")
        if o + s - v > 1 + 1e-12:
            raise ParameterError("original + shifted - overlap must be <= 1")
        return self

    def sizes(self, n):
        """Return ``(n_original, n_shifted, n_overlap)`` for ``n`` samples.

        When rounding makes the union exceed ``n`` (e.g. n=25 with the
        defaults: 18 + 13 - 5 = 26) the overlap absorbs the excess.
        """
        self.validate()
        n_orig = round_half_away(self.original_fraction, n)
        n_shift = round_half_away(self.shifted_fraction, n)
        n_over = round_half_away(self.overlap_fraction, n)
        n_over = max(n_over, n_orig + n_shift - n)
        n_over = min(n_over, n_orig, n_shift)
        return n_orig, n_shift, n_over


def class_patterns(num_classes, channels, pattern_seed, freq_range=FREQ_RANGE):
    """Per-class grating parameters: (frequency, orientation, channel gains).

    Frequencies are in cycles per image, drawn uniformly from ``freq_range``.
    """
    rng = np.random.default_rng(pattern_seed)
    offset = rng.uniform(0.0, 1.0)
    orient = (np.arange(num_classes) + offset) * np.pi / num_classes
    orient = rng.permutation(orient)
    freq = rng.uniform(freq_range[0], freq_range[1], size=num_classes)
    gains = rng.uniform(0.5, 1.0, size=(num_classes, channels))
    return freq, orient, gains


def shared_patterns(num_classes, channels, pattern_seed, donor_seed, n_shared):
    """Class textures where the first ``n_shared`` classes reuse a donor task's.

    Lets a roster of tasks overlap a target task by a controlled number of
    classes.
    """
    own = class_patterns(num_classes, channels, pattern_seed)
    if not n_shared:
        return own
    if n_shared > num_classes:
        raise ParameterError("n_shared exceeds num_classes")
    donor = class_patterns(max(n_shared, 2), channels, donor_seed)
    return tuple(np.concatenate([d[:n_shared], o[n_shared:]]) for d, o in zip(donor, own))


def generate_synthetic(num_classes, samples_per_class, height, width, channels=1,
                       seed=0, pattern_seed=None, patterns=None, freq_range=FREQ_RANGE):
    """Oriented sinusoidal gratings, one frequency/orientation per class.

    Each sample draws a random phase and adds Gaussian pixel noise
    (sigma 0.05). ``pattern_seed`` fixes the class textures independently of
    the per-sample draws (default: ``seed``); ``patterns`` overrides them with
    explicit ``(freq, orientation, gains)`` arrays.
    """
    num_classes = check_positive_int(num_classes, "num_classes", 2)
    samples_per_class = check_positive_int(samples_per_class, "samples_per_class", 8)
    height = check_positive_int(height, "height")
    width = check_positive_int(width, "width")
    channels = check_positive_int(channels, "channels")
    if patterns is None:
        patterns = class_patterns(num_classes, channels,
                                  seed if pattern_seed is None else pattern_seed, freq_range)
    freq, orient, gains = (np.asarray(a, dtype=np.float64) for a in patterns)
    if freq.shape != (num_classes,) or gains.shape != (num_classes, channels):
        raise ParameterError("patterns do not match num_classes/channels")

    rng = np.random.default_rng(seed)
    yy, xx = np.meshgrid(np.arange(height) / height, np.arange(width) / width,
                         indexing="ij")
    n = num_classes * samples_per_class
    labels = np.repeat(np.arange(num_classes), samples_per_class)
    phase = rng.uniform(0.0, PHASE_SPAN, size=n)
    noise = rng.normal(0.0, NOISE_SIGMA, size=(n, height, width, channels))

    f = freq[labels][:, None, None]
    th = orient[labels][:, None, None]
    proj = xx[None] * np.cos(th) + yy[None] * np.sin(th)
    wave = np.sin(2.0 * np.pi * f * proj + phase[:, None, None])
    images = 0.5 + AMPLITUDE * wave[..., None] * gains[labels][:, None, None, :]
    images = np.clip(images + noise, 0.0, 1.0).astype(np.float32)
    return LabeledDataset(images, labels, num_classes)


def _apportion(shares, total, caps):
    """Integer allocation summing to ``total`` with ``0 <= a_i <= caps_i``.

    Starts from the floors of ``shares`` and hands out the remaining units by
    largest fractional remainder (ties to the lowest index).
    """
    shares = np.asarray(shares, dtype=np.float64)
    caps = np.asarray(caps, dtype=np.int64)
    alloc = np.minimum(np.floor(shares + 1e-9).astype(np.int64), caps)
    rem = shares - alloc
    diff = total - int(alloc.sum())
    order = np.lexsort((np.arange(len(shares)), -rem))
    while diff > 0:
        progressed = False
        for i in order:
            if diff == 0:
                break
            if alloc[i] < caps[i]:
                alloc[i] += 1
                diff -= 1
                progressed = True
        if not progressed:
            raise ParameterError("dataset too small for the requested split")
    while diff < 0:
        progressed = False
        for i in order[::-1]:
            if diff == 0:
                break
            if alloc[i] > 0:
                alloc[i] -= 1
                diff += 1
                progressed = True
        if not progressed:
            raise ParameterError("dataset too small for the requested split")
    return alloc


def split_indices(labels, spec):
    """Index arrays ``(original, shifted)`` for the retraining protocol.

    Per class: the original part is drawn uniformly, the overlap is drawn
    uniformly from the original part, and the rest of the shifted part comes
    from samples not in the original split.
    """
    spec.validate()
    labels = np.asarray(labels, dtype=np.int64)
    n = labels.shape[0]
    n_orig, n_shift, n_over = spec.sizes(n)
    classes = np.unique(labels)
    counts = np.array([(labels == c).sum() for c in classes])

    orig_c = _apportion(counts * n_orig / n, n_orig, counts)
    over_c = _apportion(counts * n_over / n, n_over, orig_c)
    only_c = _apportion(counts * (n_shift - n_over) / n, n_shift - n_over, counts - orig_c)

    rng = np.random.default_rng(spec.seed)
    original, shifted = [], []
    for c, no, nv, ns in zip(classes, orig_c, over_c, only_c):
        idx = np.flatnonzero(labels == c)
        perm = rng.permutation(idx)
        orig = perm[:no]
        rest = perm[no:]
        overlap = rng.choice(orig, size=nv, replace=False) if nv else orig[:0]
        original.append(orig)
        shifted.append(np.concatenate([overlap, rest[:ns]]))
    original = np.sort(np.concatenate(original))
    shifted = np.sort(np.concatenate(shifted))
    return original, shifted


def split_for_retraining(ds, spec=None):
    """Split ``ds`` into (original training data, base of the shifted data)."""
    spec = spec or SplitSpec()
    orig_idx, shift_idx = split_indices(ds.labels, spec)
    original, shifted = ds.subset(orig_idx), ds.subset(shift_idx)
    missing = [c for c in range(ds.num_classes)
               if not (original.class_counts()[c] and shifted.class_counts()[c])]
    if missing:
        raise ParameterError(f"classes {missing} are absent from one of the splits")
    return original, shifted


def stratified_holdout(labels, fraction, seed):
    """Stratified ``(train_idx, eval_idx)`` with ``fraction`` held out per class."""
    labels = np.asarray(labels, dtype=np.int64)
    rng = np.random.default_rng(seed)
    train, held = [], []
    for c in np.unique(labels):
        idx = rng.permutation(np.flatnonzero(labels == c))
        k = round_half_away(fraction, idx.size)
        if idx.size > 1:
            k = min(max(k, 1), idx.size - 1)
        else:
            k = 0
        held.append(idx[:k])
        train.append(idx[k:])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(held))


def save_dataset(path, ds):
    write_tensor_file(path, ds.samples, ds.labels)


def load_dataset(path, num_classes=None):
    samples, labels = read_tensor_file(path)
    if labels is None:
        raise ParameterError(f"{path} carries no labels")
    if samples.ndim == 3:
        samples = samples[..., None]
    k = int(num_classes) if num_classes else int(labels.max()) + 1
    return LabeledDataset(samples, labels, k)
