import math

import numpy as np
import pytest

from balance_forge.core import CohortSample, CovariateColumn, Scale, scale_weights
from balance_forge.errors import DataError, SingularDesignError
from balance_forge.propensity import (
    WeightScheme,
    clip_ps,
    compute_weights,
    design_matrix,
    fit_logistic,
)

# maximiser of the 2-parameter log-likelihood from a grid search refined by
# Newton iterations in 40-digit arithmetic
HAND_DATA = [(0, 0), (1, 0), (2, 0), (3, 1), (0, 0), (1, 1), (2, 1), (3, 1)]
HAND_COEF = (-2.612867705109587, 1.741911803406391)


def test_intercept_only_closed_form():
    t = np.array([1] * 7 + [0] * 13)
    model = fit_logistic(np.ones((20, 1)), t)
    assert model.converged
    assert model.coefficients[0] == pytest.approx(math.log(7 / 13), abs=1e-10)
    np.testing.assert_allclose(model.fitted_ps, 7 / 20, atol=1e-10)


def test_hand_dataset_matches_independent_maximiser():
    x = np.array([d[0] for d in HAND_DATA], dtype=float)
    t = np.array([d[1] for d in HAND_DATA])
    model = fit_logistic(np.column_stack([np.ones(8), x]), t)
    assert model.converged and not model.separated
    np.testing.assert_allclose(model.coefficients, HAND_COEF, atol=1e-6)
    assert model.max_score <= 1e-6
    assert np.all((model.fitted_ps > 0) & (model.fitted_ps < 1))


def test_perfect_separation_flagged():
    model = fit_logistic(np.column_stack([np.ones(2), [0.0, 1.0]]), [0, 1])
    assert model.separated
    assert not model.converged
    assert "separation" in model.diagnostic


def test_singular_design_names_column():
    x = np.arange(10, dtype=float)
    X = np.column_stack([np.ones(10), x, 2 * x])
    with pytest.raises(SingularDesignError) as info:
        fit_logistic(X, [0, 1] * 5, ["(intercept)", "x", "x2"])
    assert info.value.column == 2
    assert "x2" in str(info.value)


def test_recovers_known_coefficients(rng):
    N = 10_000
    X = np.column_stack([np.ones(N), rng.standard_normal((N, 2))])
    beta = np.array([-0.5, 0.8, -0.4])
    t = (rng.random(N) < 1 / (1 + np.exp(-X @ beta))).astype(float)
    model = fit_logistic(X, t)
    assert model.converged
    p = model.fitted_ps
    cov = np.linalg.inv(X.T @ (X * (p * (1 - p))[:, None]))
    se = np.sqrt(np.diag(cov))
    assert np.all(np.abs(model.coefficients - beta) <= 3 * se)


def test_design_matrix_encoding():
    cols = [
        CovariateColumn("age", Scale.CONTINUOUS, [50, 60, 70, 80, 55, 65]),
        CovariateColumn("prio", Scale.ORDINAL, [1, 2, 3, 1, 2, 3], ("a", "b", "c")),
        CovariateColumn("nom", Scale.NOMINAL, [1, 2, 3, 3, 2, 1], ("x", "y", "z")),
    ]
    X, names = design_matrix(CohortSample([1, 1, 1, 0, 0, 0], cols))
    assert names == ["(intercept)", "age", "prio", "nom[y]", "nom[z]"]
    np.testing.assert_array_equal(X[:, 3], [0, 1, 0, 0, 1, 0])
    np.testing.assert_array_equal(X[:, 2], [1, 2, 3, 1, 2, 3])


@pytest.mark.parametrize("scheme", list(WeightScheme))
def test_constant_half_gives_constant_weights(scheme):
    t = np.array([1, 1, 0, 0, 0])
    w = compute_weights(np.full(5, 0.5), t, scheme)
    assert len(set(w[t == 1])) == 1 and len(set(w[t == 0])) == 1


def test_weight_formulas():
    t = np.array([1, 0])
    np.testing.assert_allclose(compute_weights([0.25, 0.25], t, "iptw"), [4.0, 4 / 3])
    np.testing.assert_allclose(compute_weights([0.2, 0.2], t, "matching"), [1.0, 0.25])
    np.testing.assert_allclose(compute_weights([0.8, 0.8], [1, 1], "matching"), [0.25, 0.25])
    np.testing.assert_allclose(compute_weights([0.3, 0.3], t, "overlap"), [0.7, 0.3])
    np.testing.assert_allclose(compute_weights([0.3, 0.3], t, "att"), [1.0, 0.3 / 0.7])
    np.testing.assert_allclose(compute_weights([0.3, 0.3], t, "atc"), [0.7 / 0.3, 1.0])


def test_iptw_constant_ps_exact():
    t = np.array([1, 1, 0, 0])
    e = 0.3
    w = compute_weights(np.full(4, e), t, WeightScheme.IPTW)
    assert list(w) == [1 / e, 1 / e, 1 / (1 - e), 1 / (1 - e)]


def test_matching_weights_bounded(rng):
    e = rng.uniform(0.01, 0.99, 1000)
    t = np.ones(1000)
    w = compute_weights(e, t, "matching")
    assert np.all(w <= 1.0)
    np.testing.assert_array_equal(w == 1.0, e <= 0.5)


@pytest.mark.parametrize("scheme", list(WeightScheme))
def test_scaled_weights_invariant_to_raw_scale(scheme, rng):
    e = rng.uniform(0.05, 0.95, 50)
    t = np.r_[np.ones(25), np.zeros(25)]
    raw = compute_weights(e, t, scheme)
    a = scale_weights(raw, t)
    b = scale_weights(raw * 17.5, t)
    np.testing.assert_allclose(a.w, b.w, atol=1e-12)
    np.testing.assert_array_equal(a.w, scale_weights(compute_weights(e, t, scheme), t).w)


def test_compute_weights_rejects_boundary_ps():
    with pytest.raises(DataError, match="index 1"):
        compute_weights([0.5, 1.0], [1, 0], "iptw")


def test_clip_ps():
    np.testing.assert_array_equal(clip_ps([0.005, 0.5, 0.999], 0.01, 0.99), [0.01, 0.5, 0.99])
    np.testing.assert_array_equal(clip_ps([0.2, 0.3], 0.01, 0.99), [0.2, 0.3])
    with pytest.raises(DataError):
        clip_ps([0.5], 0.5, 0.4)
