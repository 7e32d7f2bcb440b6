import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import special, stats

from temperlevy import ModelSpec, StableParams, TweedieExp
from temperlevy.charfn import cms_bridge, stable_exponent, tempered_exponent
from temperlevy.density import (DensityGrid, batch_pdf_cdf, build_grid, cdf,
                                density_bound_check, pdf, quantile, upper_gamma)
from temperlevy.errors import QuadratureFailure

# symmetric stable density at 0: Gamma(1 + 1/a) / (pi (t c)^(1/a)), c = 2 s K (mpmath)
F0_REFERENCE = 2.87670200459064413961865191131

# mpmath gammainc(a, x)
UPPER_GAMMA = [(-0.75, 0.5, 0.617971334637627888232089039871),
               (-1.75, 2.0, 0.00943090310784025455064509061251),
               (-2.0, 1.0, 0.10969196719776013683858188773),
               (0.3, 1.5, 0.125973364484151587795578339761)]


def levy_pdf(x):
    # one-sided alpha = 1/2 law with sigma+ = 1: scale 2 pi
    return x**-1.5 * np.exp(-np.pi / x)


def levy_cdf(x):
    return special.erfc(np.sqrt(np.pi / x))


def test_symmetric_stable_at_zero(ref_model):
    assert pdf(stable_exponent(ref_model.stable), 1.0, 0.0) == pytest.approx(F0_REFERENCE, rel=1e-9)


@pytest.mark.parametrize("t", [0.5, 2.0])
def test_symmetric_stable_at_zero_scales(ref_model, t):
    # f_t(0) = t^(-1/alpha) f_1(0)
    got = pdf(stable_exponent(ref_model.stable), t, 0.0)
    assert got == pytest.approx(F0_REFERENCE * t ** (-1 / 0.75), rel=1e-9)


def test_cauchy_density():
    c = stable_exponent(StableParams(1.0, 0.5, 0.5, 0.0))
    x = np.array([-5.0, 0.0, 0.3, 2.0])
    g = math.pi / 2
    np.testing.assert_allclose(pdf(c, 1.0, x), g / (math.pi * (g * g + x * x)), rtol=1e-8)


def test_levy_law_pdf_cdf():
    c = stable_exponent(StableParams(0.5, 1.0, 0.0, 0.0))
    x = np.array([0.5, 1.0, 3.0, 10.0, 100.0])
    np.testing.assert_allclose(pdf(c, 1.0, x), levy_pdf(x), rtol=1e-7, atol=1e-10)
    np.testing.assert_allclose(cdf(c, 1.0, x), levy_cdf(x), atol=1e-9)
    assert pdf(c, 1.0, -1.0) == 0.0
    assert cdf(c, 1.0, -1.0) == 0.0


def test_asymmetric_stable_against_scipy():
    params = StableParams(0.7, 1.0, 0.3, 0.2)
    a, b, g, d = cms_bridge(params, 1.5)
    c = stable_exponent(params)
    x = np.array([-3.0, -0.5, 0.4, 1.0, 6.0, 30.0])
    np.testing.assert_allclose(pdf(c, 1.5, x), stats.levy_stable.pdf(x, a, b, loc=d, scale=g),
                               rtol=1e-8)
    np.testing.assert_allclose(cdf(c, 1.5, x), stats.levy_stable.cdf(x, a, b, loc=d, scale=g),
                               atol=1e-9)


def test_tweedie_density_is_inverse_gaussian(tweedie):
    # exponential tilt of the Levy law with c = 1, eta = 2 sqrt(pi)
    ct = tempered_exponent(tweedie)
    x = np.array([0.3, 1.0, 2.0, 5.0])
    expected = np.exp(-x + 2 * math.sqrt(math.pi)) * levy_pdf(x)
    np.testing.assert_allclose(pdf(ct, 1.0, x), expected, rtol=1e-7)


def test_batch_matches_point_queries(ref_model):
    ct = tempered_exponent(ref_model)
    x = np.array([-40.0, -3.0, -0.2, 0.0, 0.05, 1.0, 8.0, 80.0])
    f, F = batch_pdf_cdf(ct, 1.0, x)
    np.testing.assert_allclose(f, pdf(ct, 1.0, x), rtol=1e-7, atol=1e-10)
    np.testing.assert_allclose(F, cdf(ct, 1.0, x), atol=1e-9)


def test_symmetric_cdf_at_center(ref_model):
    assert cdf(tempered_exponent(ref_model), 1.0, 0.0) == pytest.approx(0.5, abs=1e-12)


@given(st.floats(0.01, 0.99))
def test_quantile_inverts_cdf(u):
    c = stable_exponent(StableParams(0.6, 1.0, 0.5, 0.1))
    x = quantile(c, 1.0, u)
    assert cdf(c, 1.0, x) == pytest.approx(u, abs=1e-9)


def test_quantile_rejects_bad_level(ref_model):
    with pytest.raises(ValueError):
        quantile(stable_exponent(ref_model.stable), 1.0, 1.0)


def test_negative_density_raises():
    from temperlevy.density import _clamp_pdf

    with pytest.raises(QuadratureFailure):
        _clamp_pdf(np.array([0.1, -1e-6]))
    np.testing.assert_array_equal(_clamp_pdf(np.array([-1e-14, 0.2])), [0.0, 0.2])


@pytest.mark.parametrize("a,x,expected", UPPER_GAMMA)
def test_upper_gamma(a, x, expected):
    assert upper_gamma(a, x) == pytest.approx(expected, rel=1e-12)


def test_grid_pair_properties(ref_model, ref_grids):
    g_st, g_te = ref_grids
    np.testing.assert_array_equal(g_st.x_grid, g_te.x_grid)
    for g in ref_grids:
        assert g.total_mass() == pytest.approx(1.0, abs=1e-4)
        assert np.all(np.diff(g.cdf_values) >= 0)
        assert g.tolerance < 1e-8
    x = np.array([-2.0, 0.0, 0.7])
    np.testing.assert_allclose(g_te.pdf(x), pdf(tempered_exponent(ref_model), 1.0, x), atol=1e-8)


def test_grid_tails_continuous(ref_grids):
    g = ref_grids[1]
    lo, hi = g.x_range
    eps = 1e-9 * (hi - lo)
    assert g.pdf(hi + eps) == pytest.approx(g.pdf(hi), rel=1e-3)
    assert g.cdf(hi + eps) == pytest.approx(g.cdf(hi), abs=1e-8)
    assert g.cdf(1e6) <= 1.0
    assert g.cdf(-1e6) >= 0.0


@given(st.floats(1e-6, 1 - 1e-6))
def test_grid_quantile_inverts_cdf(u):
    from temperlevy.sampler import cached_grid_pair
    from temperlevy.model import reference_model

    g = cached_grid_pair(reference_model(), 1.0)[1]
    assert g.cdf(g.quantile(u)) == pytest.approx(u, abs=1e-9)


def test_grid_save_load_round_trip(tmp_path, grids_tweedie, tweedie):
    g = grids_tweedie[1]
    path = tmp_path / "grid.bin"
    g.save(path)
    again = DensityGrid.load(path, expected_hash=tweedie.spec_hash())
    x = np.array([0.01, 0.5, 3.0, 50.0])
    np.testing.assert_array_equal(again.pdf(x), g.pdf(x))
    np.testing.assert_array_equal(again.cdf(x), g.cdf(x))
    with pytest.raises(ValueError):
        DensityGrid.load(path, expected_hash="0" * 16)


def test_one_sided_grid(grids_tweedie):
    g = grids_tweedie[1]
    assert g.pdf(-0.1) == 0.0
    assert g.cdf(-0.1) == 0.0
    assert g.x_range[0] >= 0.0


def test_density_bound(ref_model):
    excess, worst_zero = density_bound_check(ref_model, 1.0)
    assert excess <= 1e-6
    assert worst_zero == 0.0


def test_build_grid_needs_points(ref_model):
    with pytest.raises(ValueError):
        build_grid(stable_exponent(ref_model.stable), 1.0, n_points=8)


def test_unverified_integrability():
    from temperlevy.errors import IntegrabilityUnverified

    spec = ModelSpec.build(TweedieExp(1.0, 1.0, 0.5))
    c = stable_exponent(spec.stable)
    with pytest.raises(IntegrabilityUnverified):
        c.cutoff(1.0, level=1e300)
