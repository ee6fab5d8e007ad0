import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from levikernel.coefficient import make_coefficient
from levikernel.levy_profile import ScaleFunctions, make_profile
from levikernel.parametrix import (
    Grid, KernelField, ParametrixBuild, ParametrixError, SeriesDivergenceError, _scatter,
    apply_truncated_operator, build_parametrix, sum_series, time_derivative,
)

import oracles

SMALL = Grid(8.0, 81, 0.1, 10)


@pytest.fixture(scope="module")
def const_build():
    prof = make_profile("stable", alpha=1.0)
    sf = ScaleFunctions(prof)
    coef = make_coefficient("constant", value=1.0)
    return build_parametrix(coef, prof, sf, SMALL), coef, prof


@pytest.fixture(scope="module")
def nonsym_build():
    prof = make_profile("stable", alpha=1.0, integrability_cut=4.0)
    sf = ScaleFunctions(prof)
    coef = make_coefficient("one_sided", a=0.5, b=0.5, s=0.5, omega=0.5, modulation="tanh",
                            kappa3=0.2, kappa4=0.1)
    return build_parametrix(coef, prof, sf, SMALL), coef, prof


def test_grid_geometry():
    g = SMALL
    assert g.hx == pytest.approx(0.2) and g.T == pytest.approx(1.0) and g.u_max == 16.0
    assert g.u.size == 2 * g.n_x - 1
    assert g.z_weights.sum() == pytest.approx(2 * g.L)
    assert g.t_index(0.5) == 4 and g.x_index(-8.0) == 0
    r = g.refined(0.5)
    assert (r.n_x, r.tau, r.n_t) == (161, 0.05, 10)
    with pytest.raises(ParametrixError):
        g.t_index(0.55)
    with pytest.raises(ParametrixError):
        g.x_index(0.1)
    with pytest.raises(ParametrixError):
        Grid(8.0, 81, 0.1, 2)


@settings(max_examples=20, deadline=None)
@given(st.integers(5, 12))
def test_scatter_maps_displacements(n):
    D = np.random.default_rng(n).normal(size=(2 * n - 1, n))
    F = _scatter(D, n)
    for i in range(n):
        for j in range(n):
            assert F[i, j] == D[j - i + n - 1, j]


def test_time_derivative_exact_for_quartics():
    g = Grid(1.0, 5, 0.1, 12)
    t = g.t[:, None, None]
    vals = np.broadcast_to(3 * t ** 4 - t ** 3 + 2 * t, (g.n_t, 5, 5)).copy()
    exact = np.broadcast_to(12 * t ** 3 - 3 * t ** 2 + 2, vals.shape)
    np.testing.assert_allclose(time_derivative(KernelField(g, vals, "phi")), exact, atol=1e-10)


def test_kernel_field_interpolation_and_io(tmp_path, const_build):
    b = const_build[0]
    f = b.p_kappa
    assert f(0.5, 1.0, -2.0) == pytest.approx(f.at(0.5)[SMALL.x_index(1.0), SMALL.x_index(-2.0)])
    with pytest.raises(ParametrixError):
        f(0.05, 0.0, 0.0)
    with pytest.raises(ParametrixError):
        f(0.5, 9.0, 0.0)
    with pytest.raises(ParametrixError):
        KernelField(SMALL, np.zeros((2, 2, 2)), "q")
    f.save(tmp_path / "f.npz")
    g = KernelField.load(tmp_path / "f.npz")
    np.testing.assert_array_equal(g.values, f.values)
    f.to_csv(tmp_path / "f.csv", times=[0.5], stride=20)
    lines = (tmp_path / "f.csv").read_text().splitlines()
    assert lines[0] == "t,x,y,value" and len(lines) == 1 + 5 * 5


def test_constant_coefficient_is_exact(const_build):
    b = const_build[0]
    assert not np.any(b.q0.values) and not np.any(b.phi.values)
    np.testing.assert_array_equal(b.p_kappa.values, b.P.values)
    X, Y = np.meshgrid(SMALL.x, SMALL.x, indexing="ij")
    for t in (0.1, 0.5, 1.0):
        np.testing.assert_allclose(b.p_kappa.at(t), oracles.cauchy_density(t, Y - X), atol=1e-9)
        np.testing.assert_allclose(b.dt_p_kappa.at(t), oracles.cauchy_density_dt(t, Y - X), atol=1e-8)
    assert b.diagnostics.n_terms == 1 and b.diagnostics.residual == 0.0


def test_nonsymmetric_build(nonsym_build):
    b, coef, prof = nonsym_build
    d = b.diagnostics
    assert d.converged and d.residual < 1e-3
    assert all(r < 0.1 for r in d.ratios)
    np.testing.assert_allclose(b.p_kappa.values, b.P.values + b.phi.values)
    g = b.grid
    centre = np.abs(g.x) <= g.L / 2
    for t in (0.5, 1.0):
        k = g.t_index(t)
        mass = b.p_kappa.values[k][centre] @ g.z_weights + b.window_tail[k, centre]
        np.testing.assert_allclose(mass, 1.0, atol=1e-2)
    assert b.p_kappa.values.min() > -1e-2 * b.p_kappa.values.max()


def test_q0_vanishes_on_the_diagonal(nonsym_build):
    b = nonsym_build[0]
    diag = np.einsum("kii->ki", b.q0.values)
    np.testing.assert_array_equal(diag, 0.0)


def test_build_roundtrip(tmp_path, nonsym_build):
    b = nonsym_build[0]
    b.meta = {"config_hash": "abc"}
    b.save(tmp_path / "b.npz")
    c = ParametrixBuild.load(tmp_path / "b.npz")
    np.testing.assert_array_equal(c.p_kappa.values, b.p_kappa.values)
    np.testing.assert_array_equal(c.window_tail, b.window_tail)
    assert c.diagnostics.to_dict() == b.diagnostics.to_dict()
    assert c.meta == {"config_hash": "abc"} and c.grid == b.grid


def test_series_divergence_is_detected(nonsym_build):
    q0 = nonsym_build[0].q0
    big = KernelField(q0.grid, 1e4 * q0.values, "q0", envelope=q0.envelope)
    with pytest.raises(SeriesDivergenceError):
        sum_series(big, max_terms=10)


def test_zero_q0_series_is_trivial():
    q, d = sum_series(KernelField(SMALL, np.zeros((10, 81, 81)), "q0"))
    assert d.n_terms == 1 and not np.any(q.values)


@pytest.mark.parametrize("eps", [0.4, 0.2])
def test_truncated_operator_approaches_time_derivative(const_build, eps):
    b, coef, prof = const_build
    t, y = 1.0, 0.0
    xs = np.array([-1.0, 0.0, 1.6])
    val, outside = apply_truncated_operator(b.p_kappa, coef, prof, eps, t, xs, y)
    dt = oracles.cauchy_density_dt(t, y - xs)
    # the omitted small-jump part is O(eps) times the second derivative
    assert np.max(np.abs(val - dt)) < 0.1 * eps
    assert np.all(outside >= 0)


def test_truncated_operator_guards(const_build):
    b, coef, prof = const_build
    with pytest.raises(ParametrixError):
        apply_truncated_operator(b.p_kappa, coef, prof, 1e-3, 1.0, 0.0, 0.0)
    with pytest.raises(ParametrixError):
        apply_truncated_operator(b.p_kappa, coef, prof, 2.0, 1.0, 0.0, 0.0)
