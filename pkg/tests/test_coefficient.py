import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from levikernel.coefficient import (
    CoefficientError, check_drift_conditions, check_holder, check_kappa_bounds, classify_regime,
    drift_integral, estimate_scaling_exponents, make_coefficient,
)
from levikernel.levy_profile import ScaleFunctions, make_profile

import oracles


@pytest.fixture(scope="module")
def cauchy():
    prof = make_profile("stable", alpha=1.0)
    return prof, ScaleFunctions(prof)


@pytest.fixture(scope="module")
def truncated():
    prof = make_profile("stable", alpha=1.0, integrability_cut=4.0)
    return prof, ScaleFunctions(prof)


R = np.geomspace(1e-4, 1.0, 17)


@pytest.mark.parametrize("b", [0.0, 0.25, 0.5])
def test_one_sided_drift_against_closed_form(cauchy, b):
    prof, sf = cauchy
    coef = make_coefficient("one_sided", a=0.5, b=b, s=0.0)
    D = drift_integral(coef, prof, np.array([0.0, 1.3]), R)
    ratio = np.abs(D) / (R * sf.h(R))[None, :]
    np.testing.assert_allclose(ratio[0], oracles.drift_ratio_one_sided(R, b), rtol=1e-8, atol=1e-14)
    np.testing.assert_allclose(ratio[1], ratio[0], rtol=1e-12)  # s = 0: no x dependence


def test_drift_violating_coefficient_is_rejected(cauchy):
    prof, sf = cauchy
    coef = make_coefficient("one_sided", a=0.5, b=0.0, s=0.0, kappa3=1.0)
    dc = check_drift_conditions(coef, prof, sf, np.array([0.0]), R)
    assert dc.kappa3_emp == pytest.approx(oracles.DRIFT_FAIL_RATIO(R[0]), rel=1e-6)
    assert not dc.bounded  # log growth below the grid
    rep = classify_regime(coef, prof, sf, t_min=0.05)
    assert rep.regime == "rejected"
    assert "drift-bound-stable" in rep.failing


def test_drift_satisfying_coefficient(cauchy):
    prof, sf = cauchy
    coef = make_coefficient("one_sided", a=0.5, b=0.5, s=0.0, kappa3=0.1)
    dc = check_drift_conditions(coef, prof, sf, np.array([0.0]), R)
    assert dc.kappa3_emp == pytest.approx(oracles.DRIFT_PASS_KAPPA3, rel=1e-6)
    assert dc.passed
    assert classify_regime(coef, prof, sf, t_min=0.05).regime == "Q1"


def test_nonsymmetric_test_coefficient_is_critical(truncated):
    prof, sf = truncated
    coef = make_coefficient("one_sided", a=0.5, b=0.5, s=0.5, omega=0.5, modulation="tanh",
                            beta=0.5, kappa3=0.2, kappa4=0.1)
    rep = classify_regime(coef, prof, sf, t_min=0.05)
    assert rep.regime == "Q1", rep.failing
    d = rep.to_dict()
    assert d["failing"] == [] and d["alpha_h"] == 1.0


def test_constant_coefficient(cauchy):
    prof, sf = cauchy
    coef = make_coefficient("constant", value=1.0)
    assert coef.is_constant and coef.z_symmetric
    np.testing.assert_array_equal(drift_integral(coef, prof, np.array([0.0, 2.0]), R), 0.0)
    assert classify_regime(coef, prof, sf).regime == "Q1"


@settings(max_examples=30, deadline=None)
@given(st.floats(-50, 50), st.floats(-10, 10))
def test_kappa_within_declared_bounds(x, z):
    coef = make_coefficient("one_sided", a=0.5, b=0.5, s=0.5, omega=0.5, modulation="tanh")
    k = float(coef.kappa(x, z))
    assert coef.kappa0 - 1e-12 <= k <= coef.kappa1 + 1e-12


def test_bounds_and_holder_checks():
    coef = make_coefficient("one_sided", a=0.5, b=0.5, s=0.5, omega=0.5, modulation="tanh", beta=0.5)
    x = np.linspace(-8, 8, 33)
    lo, hi, ok = check_kappa_bounds(coef, x)
    assert ok and 0 < lo <= hi
    emp, allowed, ok = check_holder(coef, x)
    assert ok and emp <= allowed
    with pytest.raises(CoefficientError):
        check_holder(coef, x, beta=0.9)


def test_understated_holder_constant_fails(cauchy):
    prof, sf = cauchy
    coef = make_coefficient("one_sided", a=0.5, b=0.5, s=0.5, omega=2.0, kappa2=1e-3, kappa3=0.2, kappa4=1.0)
    rep = classify_regime(coef, prof, sf)
    assert "kappa-holder" in rep.failing and rep.regime == "rejected"


def test_balanced_coefficient_cancels_first_moment():
    prof = make_profile("stable", alpha=0.5)
    coef = make_coefficient("one_sided_balanced", a=0.3, b=0.1, profile=prof)
    r = np.array([1e-9, 1e-6, 1e-2])
    D = drift_integral(coef, prof, np.array([0.0]), r)
    # what remains is minus the small-ball moment: -a int_0^r z^{-1/2} dz
    np.testing.assert_allclose(D[0], -0.3 * 2 * np.sqrt(r), rtol=1e-8)


def test_balancing_needs_a_finite_first_moment(cauchy):
    with pytest.raises(CoefficientError, match="diverges"):
        make_coefficient("one_sided_balanced", a=0.3, b=0.1, profile=cauchy[0])


@pytest.mark.parametrize("family, kw", [
    ("nope", {}),
    ("constant", {"beta": 1.5}),
    ("one_sided", {"a": 0.5, "bogus": 1}),
    ("symmetric_modulated", {"a": 1.2}),
    ("one_sided_balanced", {"a": 0.3}),  # needs a profile
])
def test_invalid_coefficients(family, kw):
    with pytest.raises(CoefficientError):
        make_coefficient(family, **kw)


@pytest.mark.parametrize("alpha", [0.6, 1.0, 1.4])
def test_scaling_exponent_estimate(alpha):
    sf = ScaleFunctions(make_profile("stable", alpha=alpha))
    lo, hi = estimate_scaling_exponents(sf)
    assert lo == pytest.approx(alpha, abs=1e-6) and hi == pytest.approx(alpha, abs=1e-6)
