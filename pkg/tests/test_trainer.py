from pathlib import Path

import numpy as np
import pytest
from sklearn.base import clone

from _oracles import finite_difference_grads, nearest_centroid_accuracy, relative_error
from resque.datasets import generate_synthetic
from resque.exceptions import NumericalError, ParameterError
from resque.tensorio import read_tensor_file
from resque.trainer import (
    ModelParams,
    ModelSpec,
    RetrainableNet,
    TrainConfig,
    extract_embeddings,
    forward,
    grad_step,
    halt_decision,
    init_params,
    load_checkpoint,
    loss_and_grads,
    param_change_interval,
    retrain_one_epoch,
    save_checkpoint,
    train_fixed_epochs,
    train_to_cutoff,
)

DATA = Path(__file__).parent / "data"
MLP = ModelSpec("mlp", (8, 8, 1), 3, hidden=(16,))
CONV = ModelSpec("convnet", (8, 8, 1), 3, channels=(4, 6))


def zero_params(spec):
    return ModelParams(spec, [(np.zeros(s), np.zeros(s[1])) for s in spec.layer_shapes()])


@pytest.mark.parametrize("spec", [MLP, CONV])
def test_zero_weights_give_zero_logits(spec, rng):
    logits, rep = forward(zero_params(spec), rng.random((5, 8, 8, 1)))
    assert np.all(logits == 0)
    assert rep.shape == (5, spec.rep_dim)


def test_golden_mlp_logits():
    import sys
    sys.path.insert(0, str(DATA))
    from make_golden import golden_inputs, golden_params
    expected, _ = read_tensor_file(DATA / "mlp_logits.bin")
    logits, _ = forward(golden_params(), golden_inputs())
    np.testing.assert_allclose(logits, expected, rtol=1e-6, atol=1e-6)


def test_gradient_single_layer_single_sample(rng):
    spec = ModelSpec("mlp", (2, 2, 1), 3, hidden=(2,))
    params = init_params(spec, 4)
    X, y = rng.random((1, 2, 2, 1)), np.array([2])
    _, analytic = loss_and_grads(params, X, y)
    numeric = finite_difference_grads(params, X, y, h=1e-3)
    for a, n in zip(analytic, numeric):
        assert relative_error(a, n) <= 1e-4


@pytest.mark.parametrize("spec", [MLP, CONV])
def test_gradient_check_with_weight_decay(spec, rng):
    params = init_params(spec, 1)
    X, y = rng.random((4, 8, 8, 1)), np.array([0, 1, 2, 1])
    _, analytic = loss_and_grads(params, X, y, 1e-2)
    numeric = finite_difference_grads(params, X, y, 1e-2)
    for a, n in zip(analytic, numeric):
        assert relative_error(a, n) <= 1e-4


def test_duplicated_batch_same_gradient(rng):
    params = init_params(CONV, 2)
    X, y = rng.random((4, 8, 8, 1)), np.array([0, 1, 2, 0])
    _, g1 = loss_and_grads(params, X, y)
    _, g2 = loss_and_grads(params, np.concatenate([X, X]), np.concatenate([y, y]))
    for a, b in zip(g1, g2):
        np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-14)


@pytest.mark.parametrize("opt", ["sgd", "adam"])
def test_zero_lr_leaves_params(opt, rng):
    params = init_params(MLP, 0)
    X, y = rng.random((6, 8, 8, 1)), np.array([0, 1, 2, 0, 1, 2])
    new, n0 = grad_step(params, X, y, TrainConfig(optimizer=opt, lr=0.0))
    _, n1 = grad_step(params, X, y, TrainConfig(optimizer=opt, lr=0.5))
    assert all(np.array_equal(a, b) for a, b in zip(new.arrays(), params.arrays()))
    assert n0 == n1 > 0


def test_param_change_hand_cases():
    spec = ModelSpec("mlp", (1, 1, 1), 1, hidden=(1,))
    prev = zero_params(spec)
    cur = ModelParams(spec, [(np.array([[3.0]]), np.array([4.0]))] * 2)
    np.testing.assert_allclose(param_change_interval(prev, cur), 5 / np.sqrt(5), rtol=0, atol=1e-12)
    np.testing.assert_array_equal(param_change_interval(cur, cur), 0.0)


def test_param_change_scaling(rng):
    a, b = init_params(MLP, 0), init_params(MLP, 1)
    scale = lambda p, c: p.with_arrays([c * x for x in p.arrays()])
    base = param_change_interval(a, b)
    np.testing.assert_allclose(param_change_interval(scale(a, 4), scale(b, 4)),
                               base * 4 / np.sqrt(4), rtol=1e-12)


@pytest.mark.parametrize("epoch,acc,expected", [
    (25, 0.896, (True, "within_0.005_at_25")),
    (24, 0.896, (False, "")),
    (50, 0.893, (True, "within_0.01_at_50")),
    (49, 0.893, (False, "")),
    (30, 0.91, (True, "cutoff")),
    (60, 0.80, (True, "max_epochs")),
])
def test_halt_rule(epoch, acc, expected):
    assert halt_decision(epoch, acc, 0.90, 60) == expected


def test_halt_precedence():
    assert halt_decision(50, 0.95, 0.9, 50) == (True, "cutoff")
    assert halt_decision(50, 0.895, 0.9, 50)[1] == "within_0.01_at_50"


def test_vacuous_cutoff_stops_after_one_epoch(small_ds):
    _, m = train_to_cutoff(init_params(MLP, 0), small_ds, TrainConfig(cutoff_accuracy=0.0))
    assert m.epochs == 1 and m.reached_cutoff


def test_zero_lr_run_has_zero_change(small_ds):
    _, m = train_fixed_epochs(init_params(MLP, 0), small_ds, TrainConfig(lr=0.0), 2)
    assert m.param_change == 0.0 and m.total_grad_norm > 0
    _, m = train_fixed_epochs(init_params(MLP, 0), small_ds, TrainConfig(lr=1e-3), 2)
    assert m.param_change > 0 and m.flops_estimate > 0


def test_training_is_deterministic(small_ds):
    cfg = TrainConfig(max_epochs=3, cutoff_accuracy=1.0)
    p1, m1 = train_to_cutoff(init_params(CONV, 3), small_ds, cfg)
    p2, m2 = train_to_cutoff(init_params(CONV, 3), small_ds, cfg)
    assert p1.flat().tobytes() == p2.flat().tobytes()
    m1.wall_clock_s = m2.wall_clock_s = 0
    assert m1 == m2


def test_head_mismatch_rejected(small_ds):
    with pytest.raises(ParameterError):
        train_to_cutoff(init_params(MLP.with_classes(5), 0), small_ds, TrainConfig())


def test_divergence_raises_with_measures(small_ds):
    with pytest.raises(NumericalError) as err:
        train_to_cutoff(init_params(MLP, 0), small_ds,
                        TrainConfig(optimizer="sgd", lr=1e200, cutoff_accuracy=1.0))
    assert err.value.measures.valid is False


def test_retrain_one_epoch_contract(small_ds):
    params = init_params(MLP.with_classes(5), 0)
    cfg = TrainConfig(batch_size=16)
    new, steps = retrain_one_epoch(params, small_ds, cfg, return_steps=True)
    assert steps == int(np.ceil(len(small_ds) / 16))
    assert forward(new, small_ds.samples[:2])[0].shape == (2, 3)
    again = retrain_one_epoch(params, small_ds, cfg)
    assert new.flat().tobytes() == again.flat().tobytes()


def test_embeddings_shape_and_purity(small_ds):
    params = init_params(CONV, 0)
    e1 = extract_embeddings(params, small_ds.subset(np.arange(50)))
    e2 = extract_embeddings(params, small_ds.subset(np.arange(50)))
    assert e1.representations.shape == (50, CONV.rep_dim)
    assert e1.representations.tobytes() == e2.representations.tobytes()


def test_reference_mlp_fits_quickly():
    ds = generate_synthetic(5, 100, 16, 16, 1, seed=1)
    spec = ModelSpec("mlp", (16, 16, 1), 5, hidden=(64,))
    cfg = TrainConfig(lr=3e-3, cutoff_accuracy=0.95, max_epochs=30)
    params, m = train_to_cutoff(init_params(spec, 0), ds, cfg, eval_ds=ds)
    assert m.halt_reason == "cutoff" and m.epochs <= 30


def test_trained_embeddings_beat_raw_pixels():
    ds = generate_synthetic(5, 60, 16, 16, 1, seed=1)
    spec = ModelSpec("convnet", (16, 16, 1), 5)
    params, _ = train_to_cutoff(init_params(spec, 0), ds, TrainConfig(lr=3e-3))
    emb = extract_embeddings(params, ds)
    assert (nearest_centroid_accuracy(emb.representations, ds.labels)
            >= nearest_centroid_accuracy(ds.samples, ds.labels))


def test_checkpoint_round_trip(tmp_path):
    params = init_params(CONV, 7)
    save_checkpoint(tmp_path / "m.bin", params)
    back = load_checkpoint(tmp_path / "m.bin")
    assert back.spec == params.spec
    np.testing.assert_array_equal(back.flat(), params.flat().astype(np.float32))


def test_estimator_api(small_ds):
    X, y = small_ds.samples, np.array(["a", "b", "c"])[small_ds.labels]
    net = RetrainableNet(arch="mlp", hidden=(16,), max_epochs=5, cutoff_accuracy=1.0)
    assert clone(net).get_params() == net.get_params()
    net.fit(X, y)
    assert set(net.predict(X)) <= {"a", "b", "c"}
    np.testing.assert_allclose(net.predict_proba(X).sum(axis=1), 1.0)
    assert net.transform(X).shape == (len(X), 16)
    net.retrain(X[y != "c"], y[y != "c"], max_epochs=2)
    assert list(net.classes_) == ["a", "b"]
    assert net.measures_.epochs <= 2
