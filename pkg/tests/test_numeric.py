import numpy as np
import pytest
from hypothesis import given, strategies as st

from fedsim.errors import ConfigurationError, DivergenceError
from fedsim.numeric import as_vector, axpy, check_finite, rng_stream, weighted_sum


@pytest.mark.parametrize("alpha, x, y, expected", [
    (2.0, [1, 0], [0, 1], [2, 1]),
    (0.0, [5, 5], [1, 2], [1, 2]),
    (-1.0, [3], [3], [0]),
])
def test_axpy_examples(alpha, x, y, expected):
    np.testing.assert_array_equal(axpy(alpha, np.array(x, float), np.array(y, float)), expected)


def test_axpy_dimension_mismatch():
    with pytest.raises(ConfigurationError):
        axpy(1.0, np.zeros(2), np.zeros(3))


@pytest.mark.parametrize("w, vs, expected", [
    ([1.0], [[7, 7]], [7, 7]),
    ([0.5, 0.5], [[0], [10]], [5]),
    ([0.25, 0.75], [[4], [0]], [1]),
])
def test_weighted_sum_examples(w, vs, expected):
    out = weighted_sum(w, [np.array(v, float) for v in vs])
    np.testing.assert_array_equal(out, expected)


def test_weighted_sum_rejects_empty():
    with pytest.raises(ConfigurationError):
        weighted_sum([], [])


@given(m=st.integers(1, 100), d=st.integers(1, 10_000), seed=st.integers(0, 2**32 - 1))
def test_uniform_weighted_sum_is_mean(m, d, seed):
    rng = np.random.default_rng(seed)
    vs = [rng.normal(size=d) for _ in range(m)]
    out = weighted_sum([1.0 / m] * m, vs)
    mean = np.mean(vs, axis=0)
    scale = np.maximum(np.abs(mean), np.mean(np.abs(vs), axis=0))
    assert np.all(np.abs(out - mean) <= 1e-12 * scale + 1e-300)


def test_weighted_sum_is_repeatable():
    rng = np.random.default_rng(3)
    vs = [rng.normal(size=50) for _ in range(30)]
    w = rng.dirichlet(np.ones(30))
    assert weighted_sum(w, vs).tobytes() == weighted_sum(w, vs).tobytes()


def test_check_finite_threshold():
    check_finite(np.array([1e12, -1e12]))
    with pytest.raises(DivergenceError) as info:
        check_finite(np.array([0.0, 2e12]), client=3, step=7)
    assert info.value.client == 3 and info.value.step == 7
    with pytest.raises(DivergenceError):
        check_finite(np.array([np.nan]))


def test_as_vector_dimension():
    assert as_vector([1, 2]).dtype == np.float64
    with pytest.raises(ConfigurationError):
        as_vector([1, 2], dim=3)


def test_rng_streams_are_keyed():
    a = rng_stream(5, 0, 1, 2).random(4)
    assert np.array_equal(a, rng_stream(5, 0, 1, 2).random(4))
    assert not np.array_equal(a, rng_stream(5, 0, 2, 1).random(4))
    assert not np.array_equal(a, rng_stream(6, 0, 1, 2).random(4))
