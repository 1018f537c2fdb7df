import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from balance_forge.distributions import (
    chisq_cdf,
    chisq_sf,
    chisq_to_z,
    normal_cdf,
    normal_quantile,
)
from balance_forge.errors import DataError


def test_normal_cdf_values():
    assert normal_cdf(0.0) == 0.5
    assert normal_cdf(1.959963985) == pytest.approx(0.975, abs=1e-10)
    for x in np.linspace(-8, 8, 161):
        assert abs(normal_cdf(x) - float(oracles.normal_cdf(x))) <= 1e-12
        assert normal_cdf(-x) == pytest.approx(1 - normal_cdf(x), abs=1e-15)


def test_normal_cdf_rejects_non_finite():
    with pytest.raises(DataError):
        normal_cdf(float("inf"))


def test_normal_quantile_values():
    assert normal_quantile(0.5) == 0.0
    assert normal_quantile(0.975) == pytest.approx(1.959963985, abs=1e-8)


def test_normal_quantile_matches_bisection():
    def bisect(p):
        lo, hi = -40.0, 40.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if normal_cdf(mid) < p:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)

    for p in (1e-12, 1e-6, 0.001, 0.02425, 0.1, 0.3, 0.7, 0.975, 0.999):
        assert normal_quantile(p) == pytest.approx(bisect(p), abs=1e-9)


@pytest.mark.parametrize("p", [0.0, 1.0, -0.1, 1.5])
def test_normal_quantile_rejects_outside_unit_interval(p):
    with pytest.raises(DataError):
        normal_quantile(p)


@given(st.floats(min_value=1e-15, max_value=1 - 1e-15))
def test_quantile_inverts_cdf_and_is_symmetric(p):
    x = normal_quantile(p)
    assert abs(normal_cdf(x) - p) <= 1e-10
    if 1e-6 <= p <= 1 - 1e-6:
        # 1 - p is only exact to ~1e-16 absolute, so symmetry is checked away from the tails
        assert normal_quantile(1 - p) == pytest.approx(-x, abs=1e-9)


@given(st.floats(min_value=-6, max_value=6))
def test_round_trip(x):
    assert abs(normal_quantile(normal_cdf(x)) - x) <= 1e-8


def test_quantile_monotone():
    ps = np.linspace(1e-6, 1 - 1e-6, 20001)
    qs = [normal_quantile(p) for p in ps]
    assert all(b > a for a, b in zip(qs, qs[1:]))


def test_chisq_cdf_values():
    assert chisq_cdf(0.0, 3) == 0.0
    assert chisq_cdf(2 * math.log(2), 2) == pytest.approx(0.5, abs=1e-15)
    expected = float(oracles.chisq_cdf_by_quadrature(11.0705, 5))
    assert expected == pytest.approx(0.95, abs=1e-4)
    assert chisq_cdf(11.0705, 5) == pytest.approx(expected, abs=1e-12)


@pytest.mark.parametrize("df", [1, 2, 3, 4, 7, 12])
def test_chisq_cdf_against_quadrature(df):
    for x in (0.05, 0.5, 1.0, df, 2.0 * df + 3, 40.0):
        assert abs(chisq_cdf(x, df) - float(oracles.chisq_cdf_by_quadrature(x, df))) <= 1e-12


def test_chisq_df2_closed_form():
    for x in np.linspace(0, 60, 601):
        assert abs(chisq_cdf(x, 2) - (1 - math.exp(-x / 2))) <= 1e-12
        assert chisq_sf(x, 2) == pytest.approx(math.exp(-x / 2), rel=1e-12)


def test_chisq_cdf_monotone_and_bounded():
    for df in (1, 3, 8):
        xs = np.linspace(0, 80, 4001)
        ps = [chisq_cdf(x, df) for x in xs]
        assert all(b >= a for a, b in zip(ps, ps[1:]))
        assert 0.0 <= min(ps) and max(ps) <= 1.0


def test_chisq_rejects_bad_input():
    with pytest.raises(DataError):
        chisq_cdf(-1.0, 2)
    with pytest.raises(DataError):
        chisq_cdf(1.0, 0)


def test_chisq_to_z_tails_stay_finite_and_ordered():
    z0, nudged0 = chisq_to_z(0.0, 2)
    assert math.isfinite(z0) and z0 < -30 and nudged0
    z_big, nudged = chisq_to_z(500.0, 2)
    assert math.isfinite(z_big) and nudged
    # just inside the clamp the upper tail still orders statistics
    assert chisq_to_z(40.0, 2)[0] < chisq_to_z(60.0, 2)[0]
    assert chisq_to_z(2 * math.log(2), 2)[0] == pytest.approx(0.0, abs=1e-12)
