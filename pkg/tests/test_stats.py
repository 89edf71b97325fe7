import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats as sps

from resque.exceptions import ParameterError
from resque.stats import UndefinedCorrelationError, pearson, permutation_pvalue, spearman, t_pvalue


def test_perfect_correlations():
    r = pearson([1, 2, 3], [2, 4, 6])
    assert r.coefficient == 1 and r.p_value == 0
    assert pearson([1, 2, 3, 4], [-1, -2, -3, -4]).coefficient == -1
    x = np.linspace(0, 3, 10)
    assert spearman(x, np.exp(x)).coefficient == 1


def test_spearman_hand_case():
    assert spearman([1, 2, 3, 4], [1, 3, 2, 4]).coefficient == pytest.approx(0.8, abs=1e-12)


def test_guards():
    with pytest.raises(UndefinedCorrelationError):
        spearman([1, 1, 1, 1], [1, 2, 3, 4])
    with pytest.raises(ParameterError):
        pearson([1, 2], [1, 2])
    with pytest.raises(ParameterError):
        pearson([1, 2, 3], [1, 2])


def test_against_scipy(rng):
    x, y = rng.normal(size=25), rng.normal(size=25)
    for mine, ref in ((pearson, sps.pearsonr), (spearman, sps.spearmanr)):
        res, (r, p) = mine(x, y), ref(x, y)
        assert res.coefficient == pytest.approx(r, abs=1e-12)
        assert res.p_value == pytest.approx(p, rel=1e-9)


def test_pvalue_monotone_in_r():
    rs = np.linspace(0, 1, 50)
    ps = [t_pvalue(r, 15) for r in rs]
    assert all(b <= a for a, b in zip(ps, ps[1:]))


@settings(max_examples=100, deadline=None)
@given(st.integers(3, 30), st.integers(0, 2 ** 32 - 1),
       st.floats(0.1, 100), st.floats(-100, 100))
def test_invariances_and_symmetry(n, seed, a, b):
    rng = np.random.default_rng(seed)
    x, y = rng.normal(size=n), rng.normal(size=n)
    r = pearson(x, y).coefficient
    assert pearson(a * x + b, y).coefficient == pytest.approx(r, abs=1e-12)
    assert pearson(y, x).coefficient == r
    rho = spearman(x, y).coefficient
    assert spearman(np.exp(x), y ** 3).coefficient == rho
    assert spearman(y, x).coefficient == rho


def test_permutation_oracle_smoke(rng):
    x = rng.normal(size=12)
    y = x + rng.normal(size=12)
    p = permutation_pvalue(x, y, "spearman", n_resamples=20_000, seed=1)
    assert 0.5 < p / spearman(x, y).p_value < 2
