import statistics

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from balance_forge.core import (
    CohortSample,
    CovariateColumn,
    Scale,
    scale_weights,
    sum_sq_weights,
    weighted_mean,
    weighted_variance,
)
from balance_forge.errors import DataError, NumericalError

positive = st.floats(min_value=1e-3, max_value=1e3, allow_nan=False)
reals = st.floats(min_value=-1e4, max_value=1e4, allow_nan=False)


def test_scale_weights_uniform():
    w = scale_weights([1, 1, 1, 1], [1, 1, 0, 0])
    np.testing.assert_array_equal(w.w, [0.5, 0.5, 0.5, 0.5])


def test_scale_weights_proportional():
    w = scale_weights([2, 6, 3, 1], [1, 1, 0, 0])
    np.testing.assert_allclose(w.w, [0.25, 0.75, 0.75, 0.25], atol=1e-15)
    np.testing.assert_allclose(w.treated, [0.25, 0.75])
    np.testing.assert_allclose(w.control, [0.75, 0.25])


@pytest.mark.parametrize("raw", [[1, 0, 1, 1], [1, -2, 1, 1], [1, float("nan"), 1, 1]])
def test_scale_weights_rejects_non_positive(raw):
    with pytest.raises(DataError, match="index 1"):
        scale_weights(raw, [1, 1, 0, 0])


def test_scale_weights_rejects_empty_group():
    with pytest.raises(DataError, match="non-empty"):
        scale_weights([1, 2, 3], [1, 1, 1])


@settings(max_examples=200)
@given(st.lists(positive, min_size=4, max_size=40), st.floats(min_value=1e-3, max_value=1e3), st.randoms())
def test_scale_weights_idempotent_and_scale_free(raw, c, rnd):
    t = [1, 0] + [rnd.randint(0, 1) for _ in raw[2:]]
    once = scale_weights(raw, t)
    for mask in (once.treatment, ~once.treatment):
        assert abs(once.w[mask].sum() - 1.0) <= 1e-12
    twice = scale_weights(once.w, t)
    np.testing.assert_allclose(twice.w, once.w, rtol=0, atol=1e-12)
    scaled = scale_weights(np.asarray(raw) * c, t)
    np.testing.assert_allclose(scaled.w, once.w, rtol=0, atol=1e-12)
    # order within groups preserved
    for mask in (once.treatment, ~once.treatment):
        r = np.asarray(raw)[mask]
        assert np.array_equal(np.argsort(r, kind="stable"), np.argsort(once.w[mask], kind="stable"))


def test_weighted_mean_examples():
    assert weighted_mean([1, 2, 3], [1 / 3] * 3) == 2.0
    assert weighted_mean([0, 10], [0.9, 0.1]) == pytest.approx(1.0, abs=1e-15)
    assert weighted_mean([1, 2, 3, 4], [0.4, 0.3, 0.2, 0.1]) == pytest.approx(2.0, abs=1e-15)


def test_weighted_mean_length_mismatch():
    with pytest.raises(DataError, match="length mismatch"):
        weighted_mean([1, 2, 3], [0.5, 0.5])


@given(st.lists(reals, min_size=1, max_size=50))
def test_weighted_mean_uniform_is_arithmetic_mean(xs):
    n = len(xs)
    assert weighted_mean(xs, np.full(n, 1.0 / n)) == statistics.fmean(xs)


def test_weighted_variance_examples():
    assert weighted_variance([1, 2, 3], [1 / 3] * 3) == pytest.approx(1.0, rel=1e-14)
    assert weighted_variance([5, 5, 5, 5], [0.1, 0.2, 0.3, 0.4]) == 0.0
    expected = float(oracles.wvar([1, 2, 3, 4], [0.4, 0.3, 0.2, 0.1]))
    assert expected == pytest.approx(10 / 7, rel=1e-15)
    assert weighted_variance([1, 2, 3, 4], [0.4, 0.3, 0.2, 0.1]) == pytest.approx(expected, rel=1e-14)


def test_weighted_variance_degenerate_group():
    with pytest.raises(NumericalError, match="degenerate"):
        weighted_variance([3.0], [1.0])


@given(st.lists(reals, min_size=2, max_size=50))
def test_weighted_variance_uniform_is_sample_variance(xs):
    n = len(xs)
    got = weighted_variance(xs, np.full(n, 1.0 / n))
    want = statistics.variance(xs)
    assert got == pytest.approx(want, rel=1e-12, abs=1e-9)


def test_sum_sq_weights():
    assert sum_sq_weights([0.25] * 4) == 0.25
    assert sum_sq_weights([0.5, 0.3, 0.2]) == pytest.approx(0.38, abs=1e-15)


def test_covariate_validation():
    with pytest.raises(DataError, match="binary"):
        CovariateColumn("b", Scale.BINARY, [0, 1, 2])
    with pytest.raises(DataError, match="1..3"):
        CovariateColumn("o", Scale.ORDINAL, [1, 2, 4], levels=("a", "b", "c"))
    with pytest.raises(DataError, match="K >= 2"):
        CovariateColumn("n", Scale.NOMINAL, [1, 1], levels=("a",))
    with pytest.raises(DataError, match="row 1"):
        CovariateColumn("c", Scale.CONTINUOUS, [1.0, float("nan")])


def test_cohort_sample_validation():
    col = CovariateColumn("x", Scale.CONTINUOUS, [1, 2, 3, 4])
    s = CohortSample([1, 1, 0, 0], [col])
    assert (s.N, s.n, s.m) == (4, 2, 2)
    with pytest.raises(DataError, match="at least 2"):
        CohortSample([1, 0, 0, 0], [col])
    with pytest.raises(DataError, match="expected 5"):
        CohortSample([1, 1, 0, 0, 0], [col])
