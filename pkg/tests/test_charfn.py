import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from temperlevy import ModelSpec, PowerLawRosinski, StableParams, TweedieExp, UserRadial
from temperlevy.charfn import (cms_bridge, exponent_identity_check, exponent_identity_rows,
                               s1_exponent, stable_constant, stable_exponent, tempered_exponent)
from temperlevy.errors import IntegrabilityUnverified, UnsupportedAlpha

# mpmath, 30 digits: tempered exponent of the alpha = .75, ell = 1 model at z = 1, 2
CT_ORACLE = {1.0: -0.0496798664317962160366237683991, 2.0: -0.127623191299373449470442617098}


@pytest.mark.parametrize("a", [0.3, 0.5, 0.75, 0.95, 1.0, 1.3, 1.7])
def test_stable_constant_closed_form(a):
    expected = math.pi / 2 if a == 1.0 else math.gamma(1 - a) * math.cos(math.pi * a / 2) / a
    assert stable_constant(a) == pytest.approx(expected, rel=1e-10)


def test_levy_distribution_exponent():
    # one-sided alpha = 1/2 with sigma+ = 1 is the Levy law with scale 2 pi,
    # whose exponent is -sqrt(-2 i c z)
    c = stable_exponent(StableParams(0.5, 1.0, 0.0, 0.0))
    z = np.array([-3.0, -0.5, 0.2, 1.0, 7.0])
    np.testing.assert_allclose(c(z), -np.sqrt(-2j * 2 * np.pi * z), rtol=1e-12)


def test_cauchy_exponent():
    c = stable_exponent(StableParams(1.0, 0.5, 0.5, 0.0))
    z = np.array([-2.0, 0.5, 3.0])
    np.testing.assert_allclose(c(z), -np.pi / 2 * np.abs(z), rtol=1e-12)


def test_alpha_one_asymmetric_unsupported():
    with pytest.raises(UnsupportedAlpha):
        stable_exponent(StableParams(1.0, 1.0, 0.0, 0.0))


@given(st.floats(0.2, 0.95), st.floats(0.0, 3.0), st.floats(0.0, 3.0), st.floats(-2, 2),
       st.floats(0.1, 5.0))
def test_cms_bridge_matches_levy_form(a, sp, sm, b, t):
    if sp + sm < 1e-3:
        sp = 1.0
    params = StableParams(a, sp, sm, b)
    alpha, beta, gamma, delta = cms_bridge(params, t)
    z = np.array([-4.0, -0.3, 0.7, 2.5])
    np.testing.assert_allclose(s1_exponent(alpha, beta, gamma, delta)(z),
                               t * stable_exponent(params)(z), rtol=1e-9, atol=1e-12)


@given(st.floats(-50, 50))
def test_exponent_hermitian_and_dissipative(z):
    spec = ModelSpec.build(TweedieExp(1.0, 2.0, 0.6), b=0.3)
    for c in (stable_exponent(spec.stable), tempered_exponent(spec)):
        v, w = c(np.array([z, -z]))
        assert w == pytest.approx(np.conj(v), abs=1e-12)
        assert v.real <= 1e-15


def test_exponent_vanishes_at_zero(ref_model, tweedie):
    for spec in (ref_model, tweedie):
        assert abs(tempered_exponent(spec)(np.array([0.0]))[0]) < 1e-14


@pytest.mark.parametrize("z", sorted(CT_ORACLE))
def test_tempered_exponent_against_mpmath(ref_model, z):
    assert tempered_exponent(ref_model)(np.array([z]))[0].real == pytest.approx(CT_ORACLE[z], rel=1e-9)


def test_tweedie_closed_form_vs_quadrature(tweedie):
    z = np.array([-3.0, 0.25, 1.0, 6.0])
    closed = tempered_exponent(tweedie)(z)
    quad = tempered_exponent(tweedie, method="quadrature")(z)
    np.testing.assert_allclose(closed, quad, rtol=1e-8, atol=1e-10)


def test_q_mixture_vs_quadrature(ref_model):
    z = np.array([0.1, 1.0, 10.0, 100.0])
    np.testing.assert_allclose(tempered_exponent(ref_model)(z),
                               tempered_exponent(ref_model, method="quadrature")(z), rtol=1e-7)


def test_unknown_method(ref_model):
    with pytest.raises(ValueError):
        tempered_exponent(ref_model, method="fft")


def test_untempered_user_model_is_stable():
    spec = ModelSpec.build(UserRadial.from_expression("1", 0.6, 1.0, 0.5))
    z = np.array([0.5, 2.0])
    np.testing.assert_allclose(tempered_exponent(spec)(z), stable_exponent(spec.stable)(z))


def test_tabulated_matches_exact(ref_model):
    c = tempered_exponent(ref_model)
    z_max = c.cutoff(1.0)
    tab = c.tabulated(z_max)
    z = np.concatenate([-np.geomspace(1e-12, z_max, 40), np.geomspace(1e-12, 2 * z_max, 60)])
    np.testing.assert_allclose(tab(z), c(z), rtol=1e-9, atol=1e-12)


def test_cutoff_level(ref_model):
    c = tempered_exponent(ref_model)
    z = c.cutoff(2.0)
    assert 2.0 * c(np.array([z]))[0].real <= -42.0 + 1e-9
    assert 2.0 * c(np.array([0.9 * z]))[0].real > -42.0


def test_cutoff_rejects_non_decaying_exponent(ref_model):
    from dataclasses import replace

    c = replace(stable_exponent(ref_model.stable), func=lambda z: np.exp(-np.abs(z)) - 1.0 + 0j)
    with pytest.raises(IntegrabilityUnverified):
        c.cutoff(1.0)


def test_identity_reference_model(ref_model):
    assert exponent_identity_check(ref_model) < 1e-6


def test_identity_tweedie_with_drift():
    spec = ModelSpec.build(TweedieExp(0.7, 1.5, 0.4), b=0.5)
    assert exponent_identity_check(spec) < 1e-6


def test_identity_p2_family():
    spec = ModelSpec.build(PowerLawRosinski(0.8, 2.0, 1.0))
    rows = exponent_identity_rows(spec, (0.5, 2.0))
    assert max(r.defect for r in rows) < 1e-6
    assert all(abs(r.big_jump) > 0 for r in rows)
