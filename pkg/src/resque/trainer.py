"""Desk-scale neural network trainer with retraining instrumentation.

Two reference architectures are supported:

* ``mlp``: ``input -> hidden ReLU layers -> linear head``
* ``convnet``: two 3x3 / stride 2 / pad 1 ReLU convolutions, then a linear head

The representation used by the RESQUE indices is the activation of the layer
feeding the head, flattened per sample. Everything runs in float64 numpy on the
CPU and is deterministic for a fixed seed.
"""

import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from .datasets import LabeledDataset, stratified_holdout
from .exceptions import DegenerateError, NumericalError, ParameterError
from .tensorio import read_tensor_file, write_tensor_file

ARCHS = ("mlp", "convnet")
OPTIMIZERS = ("sgd", "adam")


@dataclass(frozen=True)
class ModelSpec:
    arch: str
    input_shape: tuple
    num_classes: int
    hidden: tuple = (64,)
    channels: tuple = (8, 16)

    def __post_init__(self):
        if self.arch not in ARCHS:
            raise ParameterError(f"unknown arch {self.arch!r}; expected one of {ARCHS}")
        shape = tuple(int(s) for s in self.input_shape)
        if len(shape) == 2:
            shape = shape + (1,)
        if len(shape) != 3 or min(shape) < 1:
            raise ParameterError(f"input_shape must be (H, W, C), got {self.input_shape}")
        object.__setattr__(self, "input_shape", shape)
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        object.__setattr__(self, "channels", tuple(int(c) for c in self.channels))
        if self.num_classes < 1:
            raise ParameterError("num_classes must be >= 1")
        if self.arch == "mlp" and not self.hidden:
            raise ParameterError("mlp needs at least one hidden layer")
        if self.arch == "convnet" and not self.channels:
            raise ParameterError("convnet needs at least one conv layer")

    def with_classes(self, num_classes):
        return ModelSpec(self.arch, self.input_shape, num_classes, self.hidden, self.channels)

    def conv_shapes(self):
        """``[(H_in, W_in, C_in, H_out, W_out, C_out), ...]`` for each conv layer."""
        h, w, c = self.input_shape
        out = []
        for c_out in self.channels:
            ho, wo = (h - 1) // 2 + 1, (w - 1) // 2 + 1
            out.append((h, w, c, ho, wo, c_out))
            h, w, c = ho, wo, c_out
        return out

    def layer_shapes(self):
        """Weight shapes ``(fan_in, fan_out)`` for every parametrized layer."""
        if self.arch == "mlp":
            dims = [int(np.prod(self.input_shape))] + list(self.hidden) + [self.num_classes]
            return [(a, b) for a, b in zip(dims[:-1], dims[1:])]
        shapes = [(9 * c, c_out) for (_, _, c, _, _, c_out) in self.conv_shapes()]
        _, _, _, ho, wo, c_out = self.conv_shapes()[-1]
        shapes.append((ho * wo * c_out, self.num_classes))
        return shapes

    @property
    def rep_dim(self):
        return self.layer_shapes()[-1][0]

    def forward_macs(self):
        """Multiply-accumulates for one forward pass of one sample."""
        if self.arch == "mlp":
            return sum(a * b for a, b in self.layer_shapes())
        macs = sum(ho * wo * 9 * c * c_out for (_, _, c, ho, wo, c_out) in self.conv_shapes())
        a, b = self.layer_shapes()[-1]
        return macs + a * b

    def to_dict(self):
        return {"arch": self.arch, "input_shape": list(self.input_shape),
                "num_classes": self.num_classes, "hidden": list(self.hidden),
                "channels": list(self.channels)}

    @classmethod
    def from_dict(cls, d):
        return cls(d["arch"], tuple(d["input_shape"]), int(d["num_classes"]),
                   tuple(d.get("hidden", (64,))), tuple(d.get("channels", (8, 16))))


@dataclass
class ModelParams:
    """Per-layer ``(W, b)`` pairs; value-semantic (updates return copies)."""

    spec: ModelSpec
    layers: list

    def __post_init__(self):
        shapes = self.spec.layer_shapes()
        if len(shapes) != len(self.layers):
            raise ParameterError(f"expected {len(shapes)} layers, got {len(self.layers)}")
        fixed = []
        for (fan_in, fan_out), (W, b) in zip(shapes, self.layers):
            W = np.asarray(W, dtype=np.float64)
            b = np.asarray(b, dtype=np.float64)
            if W.shape != (fan_in, fan_out) or b.shape != (fan_out,):
                raise ParameterError(
                    f"layer shape mismatch: got W{W.shape} b{b.shape}, "
                    f"expected W({fan_in}, {fan_out}) b({fan_out},)")
            fixed.append((W, b))
        self.layers = fixed

    @property
    def num_layers(self):
        return len(self.layers)

    def arrays(self):
        return [a for layer in self.layers for a in layer]

    def copy(self):
        return ModelParams(self.spec, [(W.copy(), b.copy()) for W, b in self.layers])

    def with_arrays(self, arrays):
        it = iter(arrays)
        return ModelParams(self.spec, [(next(it), next(it)) for _ in self.layers])

    def flat(self):
        return np.concatenate([a.ravel() for a in self.arrays()])

    @classmethod
    def from_flat(cls, spec, vector):
        vector = np.asarray(vector, dtype=np.float64).ravel()
        layers, pos = [], 0
        for fan_in, fan_out in spec.layer_shapes():
            W = vector[pos:pos + fan_in * fan_out].reshape(fan_in, fan_out)
            pos += fan_in * fan_out
            b = vector[pos:pos + fan_out]
            pos += fan_out
            layers.append((W, b))
        if pos != vector.size:
            raise ParameterError(f"parameter vector has {vector.size} values, spec needs {pos}")
        return cls(spec, layers)

    def is_finite(self):
        return all(np.all(np.isfinite(a)) for a in self.arrays())


def _he_layer(rng, fan_in, fan_out):
    W = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_in, fan_out))
    return W, np.zeros(fan_out)


def init_params(spec, seed=0):
    """He-normal weights, zero biases, drawn from ``default_rng(seed)``."""
    rng = np.random.default_rng(seed)
    return ModelParams(spec, [_he_layer(rng, a, b) for a, b in spec.layer_shapes()])


def reinit_head(params, num_classes, seed=0):
    """Replace the classifier head with a freshly initialized one of new width."""
    spec = params.spec.with_classes(num_classes)
    rng = np.random.default_rng([seed, 0x4EAD])
    fan_in = spec.layer_shapes()[-1][0]
    layers = [(W.copy(), b.copy()) for W, b in params.layers[:-1]]
    layers.append(_he_layer(rng, fan_in, num_classes))
    return ModelParams(spec, layers)


# --------------------------------------------------------------------------
# forward / backward


def _im2col(x):
    """3x3 / stride 2 / pad 1 patches: (n, H, W, C) -> (n, Ho, Wo, 9C)."""
    n, h, w, c = x.shape
    ho, wo = (h - 1) // 2 + 1, (w - 1) // 2 + 1
    xp = np.pad(x, ((0, 0), (1, 1), (1, 1), (0, 0)))
    cols = [xp[:, i:i + 2 * ho:2, j:j + 2 * wo:2, :] for i in range(3) for j in range(3)]
    return np.concatenate(cols, axis=-1)


def _col2im(dcols, shape):
    n, h, w, c = shape
    ho, wo = dcols.shape[1:3]
    dxp = np.zeros((n, h + 2, w + 2, c))
    k = 0
    for i in range(3):
        for j in range(3):
            dxp[:, i:i + 2 * ho:2, j:j + 2 * wo:2, :] += dcols[..., k * c:(k + 1) * c]
            k += 1
    return dxp[:, 1:-1, 1:-1, :]


def _prepare_input(spec, X):
    x = np.asarray(X, dtype=np.float64)
    h, w, c = spec.input_shape
    if x.ndim == 3 and c == 1:
        x = x[..., None]
    if x.ndim == 2 and x.shape[1] == h * w * c:
        x = x.reshape(-1, h, w, c)
    if x.shape[1:] != (h, w, c):
        raise ParameterError(f"input shape {x.shape[1:]} does not match model {(h, w, c)}")
    return x


def _forward(params, X):
    spec = params.spec
    x = _prepare_input(spec, X)
    cache = []
    if spec.arch == "mlp":
        a = x.reshape(x.shape[0], -1)
        for W, b in params.layers[:-1]:
            z = a @ W + b
            cache.append((a, z))
            a = np.maximum(z, 0.0)
    else:
        a = x
        for W, b in params.layers[:-1]:
            cols = _im2col(a)
            z = cols @ W + b
            cache.append((a.shape, cols, z))
            a = np.maximum(z, 0.0)
    rep = a.reshape(a.shape[0], -1)
    W, b = params.layers[-1]
    logits = rep @ W + b
    return logits, rep, cache


def forward(params, X):
    """Return ``(logits, representations)`` for a batch of samples."""
    logits, rep, _ = _forward(params, X)
    return logits, rep


def _softmax(logits):
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def loss_and_grads(params, X, y, weight_decay=0.0):
    """Mean cross-entropy plus ``weight_decay / 2 * ||theta||^2`` and its gradient.

    Gradients are returned in the same order as :meth:`ModelParams.arrays`.
    """
    logits, rep, cache = _forward(params, X)
    y = np.asarray(y, dtype=np.int64)
    n = logits.shape[0]
    if y.shape != (n,):
        raise ParameterError("labels do not match batch size")
    if y.size and (y.min() < 0 or y.max() >= logits.shape[1]):
        raise ParameterError("label out of range for the classifier head")
    probs = _softmax(logits)
    loss = -np.mean(np.log(probs[np.arange(n), y] + 1e-300))
    arrays = params.arrays()
    if weight_decay:
        loss += 0.5 * weight_decay * sum(float(np.sum(a * a)) for a in arrays)

    dlogits = probs
    dlogits[np.arange(n), y] -= 1.0
    dlogits /= n

    grads = []
    W, _ = params.layers[-1]
    grads.append((rep.T @ dlogits, dlogits.sum(axis=0)))
    da = dlogits @ W.T
    spec = params.spec
    for (W, _), entry in zip(reversed(params.layers[:-1]), reversed(cache)):
        if spec.arch == "mlp":
            a_in, z = entry
            dz = da.reshape(z.shape) * (z > 0)
            grads.append((a_in.T @ dz, dz.sum(axis=0)))
            da = dz @ W.T
        else:
            shape, cols, z = entry
            dz = da.reshape(z.shape) * (z > 0)
            flat_dz = dz.reshape(-1, dz.shape[-1])
            grads.append((cols.reshape(-1, cols.shape[-1]).T @ flat_dz, flat_dz.sum(axis=0)))
            da = _col2im(dz @ W.T, shape)
    grads.reverse()
    flat = [g for pair in grads for g in pair]
    if weight_decay:
        flat = [g + weight_decay * a for g, a in zip(flat, arrays)]
    return float(loss), flat


# --------------------------------------------------------------------------
# optimization


@dataclass
class TrainConfig:
    optimizer: str = "adam"
    lr: float = 1e-3
    lr_decay_epochs: tuple = ()
    lr_decay_factor: float = 0.1
    weight_decay: float = 1e-4
    momentum: float = 0.9
    batch_size: int = 32
    cutoff_accuracy: float = 0.90
    max_epochs: int = 50
    eval_fraction: float = 0.2
    seed: int = 0

    def __post_init__(self):
        if self.optimizer not in OPTIMIZERS:
            raise ParameterError(f"unknown optimizer {self.optimizer!r}")
        if not 0.0 <= self.cutoff_accuracy <= 1.0:
            raise ParameterError("cutoff_accuracy must be in [0, 1]")
        if int(self.max_epochs) < 1:
            raise ParameterError("max_epochs must be >= 1")
        if int(self.batch_size) < 1:
            raise ParameterError("batch_size must be >= 1")
        if self.lr < 0 or self.weight_decay < 0:
            raise ParameterError("lr and weight_decay must be non-negative")
        if not 0.0 <= self.eval_fraction < 1.0:
            raise ParameterError("eval_fraction must be in [0, 1)")
        self.lr_decay_epochs = tuple(int(e) for e in self.lr_decay_epochs)

    def lr_at(self, epoch):
        """Learning rate for 1-based ``epoch`` (decayed after each listed epoch)."""
        drops = sum(1 for e in self.lr_decay_epochs if epoch > e)
        return self.lr * self.lr_decay_factor ** drops

    def to_dict(self):
        d = asdict(self)
        d["lr_decay_epochs"] = list(self.lr_decay_epochs)
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


class Optimizer:
    """SGD (with momentum) or Adam; keeps per-parameter state across steps."""

    def __init__(self, kind="adam", momentum=0.9, beta1=0.9, beta2=0.999, eps=1e-8):
        if kind not in OPTIMIZERS:
            raise ParameterError(f"unknown optimizer {kind!r}")
        self.kind = kind
        self.momentum = momentum
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.t = 0
        self.state = None

    def step(self, arrays, grads, lr):
        if self.state is None:
            self.state = [[np.zeros_like(a), np.zeros_like(a)] for a in arrays]
        self.t += 1
        out = []
        if self.kind == "sgd":
            for a, g, st in zip(arrays, grads, self.state):
                st[0] = self.momentum * st[0] + g
                out.append(a - lr * st[0])
            return out
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for a, g, st in zip(arrays, grads, self.state):
            st[0] = self.beta1 * st[0] + (1.0 - self.beta1) * g
            st[1] = self.beta2 * st[1] + (1.0 - self.beta2) * g * g
            out.append(a - lr * (st[0] / c1) / (np.sqrt(st[1] / c2) + self.eps))
        return out


def grad_step(params, X, y, config, optimizer=None, lr=None):
    """One optimizer update; returns ``(new_params, global_grad_norm)``.

    The gradient norm is taken over all parameter gradients (L2 term
    included) before the update is applied.
    """
    if optimizer is None:
        optimizer = Optimizer(config.optimizer, config.momentum)
    lr = config.lr if lr is None else lr
    # overflow is detected explicitly below, so numpy's warnings are noise
    with np.errstate(over="ignore", invalid="ignore"):
        loss, grads = loss_and_grads(params, X, y, config.weight_decay)
        if not np.isfinite(loss):
            raise NumericalError(f"non-finite loss {loss}")
        norm = float(np.sqrt(sum(float(np.sum(g * g)) for g in grads)))
        if not np.isfinite(norm):
            raise NumericalError("non-finite gradient")
        new = params.with_arrays(optimizer.step(params.arrays(), grads, lr))
    if not new.is_finite():
        raise NumericalError("parameters became non-finite")
    return new, norm


def param_change_interval(prev, cur):
    """Per-layer normalized change ``||W_t - W_{t-1}|| / sqrt(||W_t||)``.

    Weights and biases of a layer are treated as one vector; all norms are L2.
    """
    if len(prev.layers) != len(cur.layers):
        raise ParameterError("parameter sets have different layer counts")
    out = []
    for l, ((W0, b0), (W1, b1)) in enumerate(zip(prev.layers, cur.layers)):
        if W0.shape != W1.shape or b0.shape != b1.shape:
            raise ParameterError(f"layer {l} shapes differ")
        with np.errstate(over="ignore", invalid="ignore"):
            diff = np.sqrt(np.sum((W1 - W0) ** 2) + np.sum((b1 - b0) ** 2))
            size = np.sqrt(np.sum(W1 ** 2) + np.sum(b1 ** 2))
        if not (np.isfinite(diff) and np.isfinite(size)):
            raise NumericalError(f"layer {l} parameter norms overflowed")
        if size == 0:
            raise DegenerateError(f"layer {l} has all-zero parameters")
        out.append(diff / np.sqrt(size))
    return np.array(out)


# --------------------------------------------------------------------------
# training loops


@dataclass
class RetrainMeasures:
    epochs: int = 0
    total_grad_norm: float = 0.0
    param_change: float = 0.0
    wall_clock_s: float = 0.0
    flops_estimate: float = 0.0
    reached_cutoff: bool = False
    accuracy_trace: list = field(default_factory=list)
    halt_reason: str = ""
    steps: int = 0
    valid: bool = True

    @property
    def peak_accuracy(self):
        return max(self.accuracy_trace) if self.accuracy_trace else 0.0

    def to_dict(self):
        d = asdict(self)
        d["peak_accuracy"] = self.peak_accuracy
        return d

    @classmethod
    def from_dict(cls, d):
        d = {k: v for k, v in d.items() if k != "peak_accuracy"}
        return cls(**d)

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)


PROXIMITY_HALTS = ((25, 0.005), (50, 0.01))


def halt_decision(epoch, accuracy, cutoff, max_epochs):
    """Decide whether to stop after 1-based ``epoch``.

    Returns ``(stop, reason)``. Reaching the cutoff wins over the proximity
    halts (within 0.5% from epoch 25, within 1% from epoch 50), which in turn
    win over the ``max_epochs`` hard stop.
    """
    if accuracy >= cutoff:
        return True, "cutoff"
    for start, slack in reversed(PROXIMITY_HALTS):
        if epoch >= start and accuracy >= cutoff - slack - 1e-12:
            return True, f"within_{slack:g}_at_{start}"
    if epoch >= max_epochs:
        return True, "max_epochs"
    return False, ""


def accuracy(params, X, y):
    if len(y) == 0:
        return 0.0
    logits, _ = forward(params, X)
    return float(np.mean(np.argmax(logits, axis=1) == np.asarray(y)))


def _batches(n, batch_size, seed, epoch):
    order = np.random.default_rng([seed, epoch]).permutation(n)
    return [order[i:i + batch_size] for i in range(0, n, batch_size)]


def _run_epochs(params, train_x, train_y, eval_x, eval_y, config, stop_rule):
    """Shared loop; ``stop_rule(epoch, acc) -> (stop, reason)``."""
    optimizer = Optimizer(config.optimizer, config.momentum)
    measures = RetrainMeasures()
    change = np.zeros(params.num_layers)
    macs = params.spec.forward_macs()
    start = time.perf_counter()
    epoch = 0
    try:
        while True:
            epoch += 1
            snapshot = params
            lr = config.lr_at(epoch)
            for idx in _batches(len(train_y), config.batch_size, config.seed, epoch):
                params, norm = grad_step(params, train_x[idx], train_y[idx], config,
                                         optimizer, lr)
                measures.total_grad_norm += norm
                measures.steps += 1
                measures.flops_estimate += 6.0 * macs * len(idx)
            change += param_change_interval(snapshot, params)
            acc = accuracy(params, eval_x, eval_y)
            measures.accuracy_trace.append(acc)
            measures.epochs = epoch
            stop, reason = stop_rule(epoch, acc)
            if stop:
                measures.halt_reason = reason
                break
    except NumericalError as exc:
        measures.valid = False
        measures.halt_reason = "numerical_error"
        measures.param_change = float(change.sum() / params.num_layers)
        measures.wall_clock_s = time.perf_counter() - start
        exc.measures = measures
        raise
    measures.param_change = float(change.sum() / params.num_layers)
    measures.wall_clock_s = time.perf_counter() - start
    return params, measures


def _holdout(ds, config):
    if config.eval_fraction > 0:
        tr, ev = stratified_holdout(ds.labels, config.eval_fraction, config.seed)
    else:
        tr = ev = np.arange(len(ds))
    x = ds.samples.astype(np.float64)
    return x[tr], ds.labels[tr], x[ev], ds.labels[ev]


def _check_head(params, ds):
    if params.spec.num_classes != ds.num_classes:
        raise ParameterError(
            f"model head has {params.spec.num_classes} outputs but dataset has "
            f"{ds.num_classes} classes; call reinit_head first")


def train_to_cutoff(params, ds, config, eval_ds=None):
    """Train until the held-out accuracy reaches ``config.cutoff_accuracy``.

    The evaluation split is carved from ``ds`` (stratified,
    ``config.eval_fraction``) unless ``eval_ds`` is given.
    """
    _check_head(params, ds)
    train_x, train_y, eval_x, eval_y = _holdout(ds, config)
    if eval_ds is not None:
        train_x, train_y = ds.samples.astype(np.float64), ds.labels
        eval_x, eval_y = eval_ds.samples.astype(np.float64), eval_ds.labels

    def rule(epoch, acc):
        return halt_decision(epoch, acc, config.cutoff_accuracy, config.max_epochs)

    params, measures = _run_epochs(params, train_x, train_y, eval_x, eval_y, config, rule)
    measures.reached_cutoff = measures.halt_reason not in ("max_epochs", "numerical_error")
    return params, measures


def train_fixed_epochs(params, ds, config, epochs, eval_ds=None):
    """Train for exactly ``epochs`` epochs, tracing held-out accuracy."""
    _check_head(params, ds)
    train_x, train_y, eval_x, eval_y = _holdout(ds, config)
    if eval_ds is not None:
        train_x, train_y = ds.samples.astype(np.float64), ds.labels
        eval_x, eval_y = eval_ds.samples.astype(np.float64), eval_ds.labels

    def rule(epoch, acc):
        return (epoch >= epochs, "fixed_epochs" if epoch >= epochs else "")

    params, measures = _run_epochs(params, train_x, train_y, eval_x, eval_y, config, rule)
    measures.reached_cutoff = measures.peak_accuracy >= config.cutoff_accuracy
    return params, measures


def retrain_one_epoch(params, new_task_ds, config, return_steps=False):
    """Re-initialize the head to the new class count and run one full epoch.

    Every layer is updated. The epoch covers the whole dataset (no held-out
    split).
    """
    params = reinit_head(params, new_task_ds.num_classes, config.seed)
    optimizer = Optimizer(config.optimizer, config.momentum)
    x = new_task_ds.samples.astype(np.float64)
    y = new_task_ds.labels
    lr = config.lr_at(1)
    steps = 0
    for idx in _batches(len(y), config.batch_size, config.seed, 1):
        params, _ = grad_step(params, x[idx], y[idx], config, optimizer, lr)
        steps += 1
    return (params, steps) if return_steps else params


@dataclass
class EmbeddingBatch:
    representations: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        self.representations = np.asarray(self.representations, dtype=np.float64)
        if self.representations.ndim != 2:
            self.representations = self.representations.reshape(
                self.representations.shape[0], -1)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.representations.shape[0] != self.labels.shape[0]:
            raise ParameterError("representation rows and labels differ in length")

    def __len__(self):
        return self.labels.shape[0]


def extract_embeddings(params, ds, batch_size=512):
    """Forward-only representations for every sample of ``ds``."""
    x = ds.samples if isinstance(ds, LabeledDataset) else np.asarray(ds)
    labels = ds.labels if isinstance(ds, LabeledDataset) else np.zeros(len(x), np.int64)
    reps = [forward(params, x[i:i + batch_size])[1] for i in range(0, len(x), batch_size)]
    if not reps:
        reps = [np.zeros((0, params.spec.rep_dim))]
    return EmbeddingBatch(np.concatenate(reps), labels)


# --------------------------------------------------------------------------
# checkpoints


def save_checkpoint(path, params):
    """Flat f32 parameter vector in a tensor file plus a ``.json`` spec sidecar."""
    path = Path(path)
    write_tensor_file(path, params.flat().astype(np.float32))
    Path(str(path) + ".json").write_text(json.dumps(params.spec.to_dict(), indent=2))


def load_checkpoint(path):
    path = Path(path)
    spec = ModelSpec.from_dict(json.loads(Path(str(path) + ".json").read_text()))
    vector, _ = read_tensor_file(path)
    return ModelParams.from_flat(spec, vector)


# --------------------------------------------------------------------------
# estimator


class RetrainableNet(ClassifierMixin, BaseEstimator):
    """Scikit-learn style wrapper: ``fit`` trains to the cutoff from scratch,
    ``retrain`` continues from the fitted weights, ``transform`` returns the
    representation used by the RESQUE indices.

    ``X`` is an image array of shape ``(n, H, W, C)`` (or ``(n, H, W)``).
    """

    def __init__(self, arch="convnet", hidden=(64,), channels=(8, 16), optimizer="adam",
                 lr=3e-3, weight_decay=1e-4, batch_size=32, cutoff_accuracy=0.9,
                 max_epochs=50, eval_fraction=0.2, random_state=0):
        self.arch = arch
        self.hidden = hidden
        self.channels = channels
        self.optimizer = optimizer
        self.lr = lr
        self.weight_decay = weight_decay
        self.batch_size = batch_size
        self.cutoff_accuracy = cutoff_accuracy
        self.max_epochs = max_epochs
        self.eval_fraction = eval_fraction
        self.random_state = random_state

    def _config(self, **overrides):
        kw = dict(optimizer=self.optimizer, lr=self.lr, weight_decay=self.weight_decay,
                  batch_size=self.batch_size, cutoff_accuracy=self.cutoff_accuracy,
                  max_epochs=self.max_epochs, eval_fraction=self.eval_fraction,
                  seed=self.random_state)
        kw.update(overrides)
        return TrainConfig(**kw)

    @staticmethod
    def _dataset(X, y):
        X = np.asarray(X, dtype=np.float32)
        if X.ndim == 3:
            X = X[..., None]
        if X.ndim != 4:
            raise ParameterError(f"X must have shape (n, H, W[, C]), got {X.shape}")
        y = np.asarray(y)
        classes, encoded = np.unique(y, return_inverse=True)
        return LabeledDataset(X, encoded, len(classes)), classes

    def fit(self, X, y):
        ds, self.classes_ = self._dataset(X, y)
        spec = ModelSpec(self.arch, ds.image_shape, ds.num_classes, self.hidden, self.channels)
        self.params_, self.measures_ = train_to_cutoff(
            init_params(spec, self.random_state), ds, self._config())
        return self

    def retrain(self, X, y, **config_overrides):
        """Continue training on new data; a new label set gets a fresh head."""
        check_is_fitted(self, "params_")
        ds, classes = self._dataset(X, y)
        params = self.params_
        if len(classes) != len(self.classes_) or np.any(classes != self.classes_):
            params = reinit_head(params, len(classes), self.random_state)
        self.classes_ = classes
        self.params_, self.measures_ = train_to_cutoff(params, ds,
                                                       self._config(**config_overrides))
        return self

    def predict_proba(self, X):
        check_is_fitted(self, "params_")
        logits, _ = forward(self.params_, X)
        return _softmax(logits)

    def predict(self, X):
        return self.classes_[np.argmax(self.predict_proba(X), axis=1)]

    def transform(self, X):
        check_is_fitted(self, "params_")
        return extract_embeddings(self.params_, np.asarray(X)).representations
