import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scsd.tv import TvConfig, tv_prox, tv_prox_objective, tv_seminorm

from oracles import DenseTvProx, tv_value, two_level_tv_oracle

TIGHT = dict(max_iters=20000, tol=1e-10)


def test_seminorm_examples():
    assert tv_seminorm(np.full(24, 4.0), (4, 3, 2)) == 0.0
    assert tv_seminorm(np.array([0.0, 1.0]), (2, 1, 1)) == 1.0
    # a single bright voxel in the corner has a sqrt(3) gradient at the origin side
    x = np.zeros(8)
    x[0] = 1.0
    assert tv_seminorm(x, (2, 2, 2)) == pytest.approx(3.0)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 31), st.floats(-5, 5), st.floats(-3, 3))
def test_seminorm_matches_oracle_and_is_homogeneous(seed, a, c):
    dims = (4, 3, 5)
    x = np.random.default_rng(seed).normal(size=60)
    tv = tv_seminorm(x, dims)
    assert tv == pytest.approx(tv_value(x, dims), rel=1e-12)
    assert tv_seminorm(a * x + c, dims) == pytest.approx(abs(a) * tv, rel=1e-9, abs=1e-9)


def test_prox_constant_is_fixed_point():
    q = np.full(60, 0.7)
    assert np.allclose(tv_prox(q, TvConfig(weight=0.3), (4, 3, 5)), q)


def test_prox_zero_weight_is_identity():
    q = np.random.default_rng(0).normal(size=60)
    assert np.array_equal(tv_prox(q, TvConfig(weight=0.0), (4, 3, 5)), q)


def test_prox_small_weight_approaches_identity():
    q = np.random.default_rng(0).normal(size=60)
    x = tv_prox(q, TvConfig(weight=1e-6), (4, 3, 5))
    assert np.max(np.abs(x - q)) < 1e-5


@pytest.mark.parametrize("weight", [0.1, 0.5, 2.0])
def test_prox_step_signal_matches_two_level_oracle(weight):
    q = np.r_[np.zeros(6), np.ones(10)]
    res = tv_prox(q, TvConfig(weight=weight, **TIGHT), (16, 1, 1), full_output=True)
    oracle = two_level_tv_oracle(q, weight)
    assert res.objective == pytest.approx(oracle, rel=1e-6, abs=1e-9)
    assert np.mean(res.image) == pytest.approx(np.mean(q), abs=1e-8)


def test_prox_matches_dual_projection_oracle_on_a_volume():
    dims = (4, 4, 3)
    q = 5.0 + np.random.default_rng(3).normal(size=48)  # positive, so the oracle's x >= 0 is inactive
    w = 0.4
    res = tv_prox(q, TvConfig(weight=w, **TIGHT), dims, full_output=True)
    x = DenseTvProx(dims)(q, w, iters=20000)
    ref = tv_prox_objective(x, q, w, dims)
    assert res.objective == pytest.approx(ref, rel=1e-6)
    assert np.linalg.norm(res.image - x) / np.linalg.norm(x) < 1e-3


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2 ** 31), st.floats(0.01, 2.0))
def test_prox_descent_and_mean(seed, weight):
    dims = (5, 4, 3)
    q = np.random.default_rng(seed).normal(size=60)
    res = tv_prox(q, TvConfig(weight=weight), dims, full_output=True)
    assert res.objective <= tv_prox_objective(q, q, weight, dims) + 1e-12
    assert tv_seminorm(res.image, dims) <= tv_seminorm(q, dims) + 1e-9
    assert np.mean(res.image) == pytest.approx(np.mean(q), abs=1e-9)


@pytest.mark.parametrize("kw", [dict(weight=-1), dict(step=0.3), dict(step=0), dict(tol=0), dict(max_iters=-1)])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        TvConfig(**kw)
