import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from resque.exceptions import ParameterError
from resque.shifts import KINDS, NoiseSpec, ShiftTransformer, apply_shift, level_params, shift_samples


def test_ladder_values():
    assert level_params("gaussian", 0)["sigma"] == 0
    assert level_params("gaussian", 10)["sigma"] == pytest.approx(0.30, abs=1e-15)
    assert level_params("salt_pepper", 4)["p"] == pytest.approx(0.06, abs=1e-15)
    assert level_params("blur", 2)["sigma"] == pytest.approx(0.30, abs=1e-15)


@pytest.mark.parametrize("kind,level", [("gaussian", 11), ("blur", -1), ("fog", 1),
                                        ("gaussian", 2.5)])
def test_invalid_kind_or_level(kind, level):
    with pytest.raises(ParameterError):
        level_params(kind, level)


@pytest.mark.parametrize("kind", KINDS)
def test_level_zero_is_identity(kind, small_ds):
    out = apply_shift(small_ds, NoiseSpec(kind, 0, 3))
    assert out.samples.tobytes() == small_ds.samples.tobytes()


@pytest.mark.parametrize("level", range(1, 11))
def test_blur_keeps_constant_image(level):
    x = np.full((2, 12, 12, 3), 0.5, np.float32)
    np.testing.assert_allclose(shift_samples(x, "blur", level), 0.5, atol=1e-7)


def test_salt_pepper_pixel_count():
    x = np.full((4, 32, 32, 1), 0.5, np.float32)
    out = shift_samples(x, "salt_pepper", 10, seed=9)
    changed = (out != x).reshape(4, -1).sum(axis=1)
    assert np.all(changed == round(0.15 * 1024))
    assert set(np.unique(out[out != 0.5]).tolist()) <= {0.0, 1.0}


def test_out_of_range_input_rejected():
    with pytest.raises(ParameterError):
        shift_samples(np.full((1, 4, 4), 1.5), "gaussian", 1)


def test_gaussian_error_monotone_in_level(small_ds):
    for seed in range(3):
        err = [np.abs(shift_samples(small_ds.samples, "gaussian", lv, seed)
                      - small_ds.samples).mean() for lv in range(1, 11)]
        inversions = sum(b < a for a, b in zip(err, err[1:]))
        assert inversions <= 1


@settings(max_examples=30, deadline=None)
@given(st.sampled_from(KINDS), st.integers(0, 10), st.integers(0, 1000))
def test_labels_and_determinism(kind, level, seed):
    x = np.random.default_rng(seed).random((3, 6, 6, 2)).astype(np.float32)
    a = shift_samples(x, kind, level, seed)
    b = shift_samples(x, kind, level, seed)
    assert a.tobytes() == b.tobytes()
    assert a.shape == x.shape and a.dtype == x.dtype
    assert a.min() >= 0 and a.max() <= 1


def test_apply_shift_preserves_labels(small_ds):
    out = apply_shift(small_ds, NoiseSpec("salt_pepper", 5, 1))
    np.testing.assert_array_equal(out.labels, small_ds.labels)


def test_transformer_matches_function(small_ds):
    t = ShiftTransformer("blur", 4, seed=2).fit(small_ds.samples)
    np.testing.assert_array_equal(t.transform(small_ds.samples),
                                  shift_samples(small_ds.samples, "blur", 4, 2))
