import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from fairdyn.dist import Beta, Gaussian, Tabulated, from_dict, verify_mlr
from oracles import mp_normal_cdf, mp_normal_sf

means = st.floats(-20, 20)
sds = st.floats(0.1, 10)


@settings(max_examples=60, deadline=None)
@given(means, sds, st.floats(-8, 8))
def test_gaussian_cdf_matches_mpmath(m, s, z):
    g = Gaussian(m, s)
    x = m + z * s
    assert g.cdf(x) == pytest.approx(mp_normal_cdf(x, m, s), rel=1e-12, abs=1e-300)
    assert g.sf(x) == pytest.approx(mp_normal_sf(x, m, s), rel=1e-12, abs=1e-300)


@settings(max_examples=60, deadline=None)
@given(means, sds, st.floats(1e-10, 1 - 1e-10))
def test_gaussian_quantile_inverts_cdf(m, s, p):
    g = Gaussian(m, s)
    assert g.cdf(g.quantile(p)) == pytest.approx(p, rel=1e-9)
    assert g.sf(g.isf(p)) == pytest.approx(p, rel=1e-9)


def test_gaussian_scalar_and_array_paths_agree():
    g = Gaussian(1.5, 2.0)
    xs = np.linspace(-10, 10, 41)
    arr = g.cdf(xs)
    assert np.allclose(arr, [g.cdf(float(x)) for x in xs], rtol=1e-14, atol=0)
    assert isinstance(g.cdf(0.3), float)


def test_gaussian_clamps_extreme_quantiles():
    g = Gaussian(0, 1)
    assert g.quantile(0.0) == pytest.approx(-12.0)
    assert g.isf(0.0) == pytest.approx(12.0)


@pytest.mark.parametrize("bad", [0.0, -1.0, math.nan])
def test_gaussian_rejects_bad_stddev(bad):
    with pytest.raises(ValueError):
        Gaussian(0, bad)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.5, 10), st.floats(0.5, 10), st.floats(0.01, 0.99))
def test_beta_matches_scipy(a, b, x):
    d = Beta(a, b)
    ref = stats.beta(a, b)
    assert d.cdf(x) == pytest.approx(ref.cdf(x), rel=1e-10, abs=1e-14)
    assert d.pdf(x) == pytest.approx(ref.pdf(x), rel=1e-10)
    assert d.quantile(d.cdf(x)) == pytest.approx(x, rel=1e-8)


def test_tabulated_renormalises_and_integrates_exactly():
    grid = np.array([0.0, 1.0, 2.0])
    t = Tabulated(grid, np.array([0.0, 2.0, 0.0]))
    assert t.cdf(1.0) == pytest.approx(0.5)
    assert t.cdf(0.5) == pytest.approx(0.125)
    assert t.quantile(0.125) == pytest.approx(0.5)
    assert t.cdf(-1) == 0.0 and t.cdf(3) == 1.0


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(0.0, 5.0), min_size=3, max_size=20).filter(lambda v: sum(v) > 0.1),
       st.floats(0.001, 0.999))
def test_tabulated_quantile_round_trip(dens, p):
    grid = np.linspace(-1, 1, len(dens))
    t = Tabulated(grid, np.array(dens))
    assert t.cdf(t.quantile(p)) == pytest.approx(p, abs=1e-10)


def test_tabulated_flat_segment_detection():
    grid = np.linspace(0, 4, 5)
    assert Tabulated(grid, np.array([1, 0, 0, 1, 1.0])).has_flat_segments
    assert not Tabulated(grid, np.array([1, 1, 0, 1, 1.0])).has_flat_segments


def test_mlr_holds_for_shifted_gaussians_and_fails_for_unequal_spread():
    assert verify_mlr(Gaussian(-1, 1), Gaussian(1, 1)).ok
    res = verify_mlr(Gaussian(-1, 1), Gaussian(1, 3))
    assert not res.ok and res.first_violation is not None


def test_from_dict_names_the_failing_field():
    with pytest.raises(ValueError, match=r"groups\.a\.g0\.stddev"):
        from_dict({"kind": "gaussian", "mean": 0}, "groups.a.g0")
    with pytest.raises(ValueError, match="kind"):
        from_dict({"kind": "cauchy"}, "g")
    g = from_dict(Gaussian(1, 2).to_dict())
    assert g == Gaussian(1, 2)
