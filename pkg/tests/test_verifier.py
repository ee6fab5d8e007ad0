import dataclasses
import json

import numpy as np
import pytest

from levikernel.coefficient import make_coefficient
from levikernel.levy_profile import ScaleFunctions, make_profile
from levikernel.parametrix import Grid, KernelField, build_parametrix
from levikernel.verifier import (
    CHECK_IDS, FAIL, INCONCLUSIVE, INFO, NOT_APPLICABLE, PASS, PropertyReport, VerifierSettings,
    bump, ratio_field_rows, render_table, signed_bump, verify,
)
from levikernel.verifier import _direction, _trend

SMALL = Grid(8.0, 81, 0.1, 10)
SETTINGS = VerifierSettings(check_times=(0.5, 1.0), bound_times=(0.5, 1.0), ck_times=(0.5, 0.5),
                            n_samples=5)
STATUSES = {PASS, FAIL, INCONCLUSIVE, NOT_APPLICABLE, INFO}


def _setup(kind):
    if kind == "constant":
        prof = make_profile("stable", alpha=1.0)
        coef = make_coefficient("constant", value=1.0)
    else:
        prof = make_profile("stable", alpha=1.0, integrability_cut=4.0)
        coef = make_coefficient("one_sided", a=0.5, b=0.5, s=0.5, omega=0.5, modulation="tanh",
                                kappa3=0.2, kappa4=0.1)
    sf = ScaleFunctions(prof)
    coarse = build_parametrix(coef, prof, sf, SMALL)
    refined = build_parametrix(coef, prof, sf, SMALL.refined())
    return coef, prof, sf, coarse, refined


@pytest.fixture(scope="module", params=["constant", "nonsym"])
def setup(request):
    return _setup(request.param)


@pytest.fixture(scope="module")
def nonsym():
    return _setup("nonsym")


def test_report_covers_every_check(setup):
    coef, prof, sf, coarse, refined = setup
    rep = verify(coarse, coef, prof, sf, SETTINGS, refined)
    assert [c.id for c in rep.checks] == list(CHECK_IDS)
    assert {c.status for c in rep.checks} <= STATUSES
    for cid in ("conservation", "chapman-kolmogorov", "nonnegativity", "series-health", "max-principle"):
        assert rep.by_id(cid).status == PASS, rep.by_id(cid)
    assert rep.by_id("uniqueness-proxy").status == INFO
    with pytest.raises(KeyError):
        rep.by_id("nope")


def test_exactness_and_preconditions(setup):
    coef, prof, sf, coarse, refined = setup
    rep = verify(coarse, coef, prof, sf, SETTINGS, refined)
    exact = rep.by_id("constant-coefficient-exactness").status
    rho_lower = rep.by_id("rho-lower").status
    if coef.is_constant:
        assert exact == PASS and rho_lower == PASS
    else:
        assert exact == NOT_APPLICABLE
        assert rho_lower == NOT_APPLICABLE  # truncated nu is not homogeneous
        assert "homogeneity" in rep.by_id("rho-lower").note


def test_constants_without_refinement_are_inconclusive(nonsym):
    coef, prof, sf, coarse, _ = nonsym
    rep = verify(coarse, coef, prof, sf, SETTINGS)
    for cid in ("upper-estimate", "gradient", "holder-x", "holder-y"):
        c = rep.by_id(cid)
        assert c.status == INCONCLUSIVE and "refine" in c.note
    assert not rep.passed


def test_disabled_checks_are_listed(nonsym):
    coef, prof, sf, coarse, refined = nonsym
    s = dataclasses.replace(SETTINGS, enabled={"pde-residual": False, "uniqueness-proxy": False})
    rep = verify(coarse, coef, prof, sf, s, refined)
    ids = [c.id for c in rep.checks]
    assert "pde-residual" not in ids and "uniqueness-proxy" not in ids
    assert rep.meta["disabled_checks"] == ["pde-residual", "uniqueness-proxy"]


def test_tampered_kernel_fails_conservation(nonsym):
    coef, prof, sf, coarse, refined = nonsym
    bad = dataclasses.replace(coarse, p_kappa=KernelField(coarse.grid, 1.1 * coarse.p_kappa.values, "p_kappa"))
    rep = verify(bad, coef, prof, sf, SETTINGS, refined)
    c = rep.by_id("conservation")
    assert c.status == FAIL and c.value > 0.05
    assert not rep.passed


def test_negative_kernel_fails_nonnegativity(nonsym):
    coef, prof, sf, coarse, refined = nonsym
    vals = coarse.p_kappa.values.copy()
    vals[3, 40, 10] = -0.1 * vals.max()
    bad = dataclasses.replace(coarse, p_kappa=KernelField(coarse.grid, vals, "p_kappa"))
    assert verify(bad, coef, prof, sf, SETTINGS, refined).by_id("nonnegativity").status == FAIL


def test_json_is_deterministic_and_roundtrips(nonsym):
    coef, prof, sf, coarse, refined = nonsym
    a = verify(coarse, coef, prof, sf, SETTINGS, refined).to_json()
    b = verify(coarse, coef, prof, sf, SETTINGS, refined).to_json()
    assert a == b
    d = json.loads(a)
    again = PropertyReport.from_dict(d)
    assert again.to_json() == a
    table = render_table(d)
    assert "overall:" in table and all(cid in table for cid in CHECK_IDS)


def test_sample_points_follow_the_seed(nonsym):
    coef, prof, sf, coarse, refined = nonsym
    m0 = verify(coarse, coef, prof, sf, SETTINGS, refined).meta
    m1 = verify(coarse, coef, prof, sf, dataclasses.replace(SETTINGS, seed=7), refined).meta
    assert not (np.array_equal(m0["sample_x"], m1["sample_x"]) and np.array_equal(m0["sample_y"], m1["sample_y"]))
    m2 = verify(coarse, coef, prof, sf, SETTINGS, refined).meta
    np.testing.assert_array_equal(m0["sample_x"], m2["sample_x"])


def test_ratio_field_rows(nonsym):
    coef, prof, sf, coarse, _ = nonsym
    rows = ratio_field_rows(coarse, sf, [0.5, 1.0], 0.25)
    assert rows.shape[1] == 6 and rows.shape[0] == 2 * 21 * 21
    np.testing.assert_allclose(rows[:, 5], rows[:, 3] / rows[:, 4])


def test_bumps():
    y = np.linspace(-6, 6, 601)
    f, g = bump(y, 4.0), signed_bump(y, 4.0)
    assert f.max() == pytest.approx(1.0) and f.min() == 0.0 and np.all(f[np.abs(y) >= 4] == 0)
    assert g.max() > 0 > g.min() and np.all(np.abs(g) <= 1.0 + 1e-12)


@pytest.mark.parametrize("a, b, tol, expected", [
    (1.0, 1.1, 0.25, "stable"), (1.0, 2.0, 0.25, "growing"), (1.0, 0.5, 0.25, "shrinking"),
])
def test_trend_labels(a, b, tol, expected):
    assert _trend(a, b, tol) == expected


@pytest.mark.parametrize("a, b, expected", [(1.0, 1.0, "unchanged"), (1.0, 0.5, "decreasing"), (1.0, 2.0, "increasing")])
def test_direction_labels(a, b, expected):
    assert _direction(a, b) == expected
