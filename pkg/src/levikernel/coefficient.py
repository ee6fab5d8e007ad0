"""Jump-intensity coefficients ``kappa(x, z)`` and the regime classifier.

Every registered family has the separable form

    kappa(x, z) = base + sum_c a_c(x) g_c(z),

so that the Lévy symbol with ``kappa`` frozen at ``w`` is a linear
combination of a few ``w``-independent component symbols. The frozen-kernel
module relies on this to evaluate each ``z``-integral only once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate

from .levy_profile import ScaleFunctions, UnimodalProfile, certify_scaling

__all__ = [
    "ZComponent", "Coefficient", "CoefficientError", "COEFFICIENT_FAMILIES", "make_coefficient",
    "drift_integral", "drift_component_integrals", "DriftCheck", "check_drift_conditions",
    "check_kappa_bounds", "holder_constant", "check_holder", "RegimeCheck", "RegimeReport",
    "estimate_scaling_exponents", "classify_regime", "default_r_grid",
]


class CoefficientError(ValueError):
    pass


@dataclass(frozen=True)
class ZComponent:
    """A ``z``-profile ``g(z)``, constant between its breakpoints.

    Piecewise constancy is what lets the frozen-kernel module integrate
    oscillatory tails in closed form; it is checked when symbols are built.
    """

    name: str
    fn: Callable[[np.ndarray], np.ndarray] = field(repr=False, compare=False)
    breakpoints: tuple[float, ...] = ()
    even: bool = False

    def __call__(self, z):
        return self.fn(np.asarray(z, dtype=float))


@dataclass(frozen=True)
class Coefficient:
    """``kappa(x, z) = base + sum_c amp_c(x) g_c(z)`` plus declared constants.

    ``kappa0``/``kappa1`` are the declared lower/upper bounds, ``kappa2`` and
    ``beta`` the Hölder constant and exponent in ``x``, ``kappa3``/``kappa4``
    the constants in the two drift conditions.
    """

    family: str
    params: tuple[tuple[str, float | str], ...]
    base: float
    components: tuple[ZComponent, ...]
    amplitudes: tuple[Callable[[np.ndarray], np.ndarray], ...] = field(repr=False, compare=False)
    kappa0: float
    kappa1: float
    kappa2: float
    beta: float
    kappa3: float
    kappa4: float

    @property
    def n_components(self) -> int:
        return len(self.components)

    @property
    def is_constant(self) -> bool:
        return self.n_components == 0

    @property
    def z_symmetric(self) -> bool:
        return all(c.even for c in self.components)

    @property
    def breakpoints(self) -> tuple[float, ...]:
        pts = {b for c in self.components for b in c.breakpoints}
        return tuple(sorted(pts))

    def amplitude_matrix(self, x) -> np.ndarray:
        """``A[c, i] = amp_c(x_i)``; shape ``(n_components, len(x))``."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if self.is_constant:
            return np.zeros((0, x.size))
        return np.vstack([np.broadcast_to(a(x), x.shape) for a in self.amplitudes])

    def kappa(self, x, z):
        x = np.asarray(x, dtype=float)
        z = np.asarray(z, dtype=float)
        out = np.full(np.broadcast(x, z).shape, self.base, dtype=float)
        for amp, comp in zip(self.amplitudes, self.components):
            out = out + amp(x) * comp(z)
        return out

    def declared(self) -> dict[str, float]:
        return {"kappa0": self.kappa0, "kappa1": self.kappa1, "kappa2": self.kappa2,
                "beta": self.beta, "kappa3": self.kappa3, "kappa4": self.kappa4}


# families -----------------------------------------------------------------------

def _indicator(lo: float, hi: float) -> Callable[[np.ndarray], np.ndarray]:
    return lambda z: ((z > lo) & (z < hi)).astype(float)


_MODULATIONS = {"sin": np.sin, "tanh": np.tanh}


def _sine_amp(a: float, s: float, omega: float, offset: float = 1.0, modulation: str = "sin"):
    try:
        m = _MODULATIONS[modulation]
    except KeyError:
        raise CoefficientError(f"unknown modulation {modulation!r}; use one of {sorted(_MODULATIONS)}") from None
    return lambda x: a * (offset + s * m(omega * np.asarray(x, dtype=float)))


def _constant(value: float = 1.0):
    if value <= 0:
        raise CoefficientError("constant coefficient must be positive")
    return value, (), (), {"kappa0": value, "kappa1": value, "kappa2": 0.0,
                           "kappa3": 0.0, "kappa4": 0.0}


def _one_sided(a: float = 0.5, b: float = 0.5, s: float = 0.0, omega: float = 1.0, modulation: str = "sin"):
    """``1 + a (1 + s m(omega x)) 1_{z > b}`` with ``m`` = sin or tanh: extra jumps to the right only."""
    if b < 0:
        raise CoefficientError("one_sided threshold b must be >= 0")
    if not 0 <= s < 1 or a < 0:
        raise CoefficientError("one_sided needs a >= 0 and 0 <= s < 1")
    comp = ZComponent("right_of_b", _indicator(b, math.inf), breakpoints=(b,) if b > 0 else (0.0,))
    amp = _sine_amp(a, s, omega, modulation=modulation)
    holder_nat = a * s * omega  # Lipschitz constant of the amplitude (|m'| <= 1)
    return 1.0, (comp,), (amp,), {"kappa0": 1.0, "kappa1": 1.0 + a * (1 + s),
                                   "lipschitz": holder_nat, "osc": 2 * a * s}


def _symmetric_modulated(a: float = 0.5, omega: float = 1.0, shape: str = "unit", width: float = 1.0):
    """``1 + a sin(omega x) c(|z|)`` with ``c`` either 1 or ``1_{|z| < width}``."""
    if not 0 <= a < 1:
        raise CoefficientError("symmetric_modulated needs 0 <= a < 1")
    if shape == "unit":
        fn, bps = (lambda z: np.ones_like(z)), ()
    elif shape == "indicator":
        fn, bps = (lambda z: (np.abs(z) < width).astype(float)), (-width, width)
    else:
        raise CoefficientError(f"unknown z-shape {shape!r}")
    comp = ZComponent(f"even_{shape}", fn, breakpoints=bps, even=True)
    amp = _sine_amp(a, 1.0, omega, offset=0.0)
    return 1.0, (comp,), (amp,), {"kappa0": 1.0 - a, "kappa1": 1.0 + a,
                                   "lipschitz": a * omega, "osc": 2 * a}


def _one_sided_balanced(a: float = 0.3, b: float = 0.1, s: float = 0.0, omega: float = 1.0,
                        lam: float = 1.0):
    """``1 + a (1 + s sin(omega x)) [1_{0<z<b} - lam 1_{b<z<1}]``.

    ``lam`` is normally chosen by :func:`make_coefficient` so that the first
    moment over ``0 < z < 1`` cancels; the internal drift then decays like the
    small-ball moment, which is what the super-critical regime needs.
    """
    if not 0 < b < 1:
        raise CoefficientError("one_sided_balanced needs 0 < b < 1")
    if not 0 <= s < 1 or a < 0 or lam < 0:
        raise CoefficientError("one_sided_balanced needs a, lam >= 0 and 0 <= s < 1")
    if a * (1 + s) * lam >= 1:
        raise CoefficientError("one_sided_balanced would make kappa non-positive")

    def g(z):
        return _indicator(0.0, b)(z) - lam * _indicator(b, 1.0)(z)

    comp = ZComponent("balanced_right", g, breakpoints=(0.0, b, 1.0))
    amp = _sine_amp(a, s, omega)
    return 1.0, (comp,), (amp,), {"kappa0": 1.0 - a * (1 + s) * lam, "kappa1": 1.0 + a * (1 + s),
                                   "lipschitz": a * s * omega * max(1.0, lam),
                                   "osc": 2 * a * s * max(1.0, lam)}


COEFFICIENT_FAMILIES = {
    "constant": _constant,
    "one_sided": _one_sided,
    "symmetric_modulated": _symmetric_modulated,
    "one_sided_balanced": _one_sided_balanced,
}


def _balancing_lambda(profile: UnimodalProfile, b: float) -> float:
    inner = _signed_moment(profile, lambda z: np.ones_like(z), 0.0, b, side=+1)
    outer = _signed_moment(profile, lambda z: np.ones_like(z), b, 1.0, side=+1)
    if not math.isfinite(inner):
        raise CoefficientError("first moment of J near 0 diverges; no balancing weight exists")
    return inner / outer


def make_coefficient(family: str, beta: float = 0.5, kappa0: float | None = None,
                     kappa1: float | None = None, kappa2: float | None = None,
                     kappa3: float = 0.0, kappa4: float = 0.0,
                     profile: UnimodalProfile | None = None, **params) -> Coefficient:
    """Build a registered coefficient family.

    Unset bounds default to the family's analytic values; the Hölder constant
    defaults to ``min(osc, lip^beta osc^(1-beta))``, which bounds
    ``|a(x) - a(y)| / |x - y|^beta`` for a Lipschitz amplitude with total
    oscillation ``osc``. ``one_sided_balanced`` needs ``profile`` unless
    ``lam`` is given explicitly.
    """
    try:
        builder = COEFFICIENT_FAMILIES[family]
    except KeyError:
        raise CoefficientError(f"unknown coefficient family {family!r}") from None
    if not 0 < beta < 1:
        raise CoefficientError("beta must lie in (0, 1)")
    if family == "one_sided_balanced" and "lam" not in params:
        if profile is None:
            raise CoefficientError("one_sided_balanced needs a profile to fix its balancing weight")
        params["lam"] = _balancing_lambda(profile, float(params.get("b", 0.1)))
    try:
        base, comps, amps, nat = builder(**params)
    except TypeError as exc:
        raise CoefficientError(f"bad parameters for {family}: {exc}") from None
    if "lipschitz" in nat:
        lip, osc = nat["lipschitz"], nat["osc"]
        k2_nat = 0.0 if osc == 0 else min(osc, lip ** beta * osc ** (1 - beta))
    else:
        k2_nat = nat["kappa2"]
    coef = Coefficient(
        family=family, params=tuple(sorted(params.items())), base=float(base), components=comps,
        amplitudes=amps,
        kappa0=float(nat["kappa0"] if kappa0 is None else kappa0),
        kappa1=float(nat["kappa1"] if kappa1 is None else kappa1),
        kappa2=float(k2_nat if kappa2 is None else kappa2),
        beta=float(beta), kappa3=float(kappa3), kappa4=float(kappa4),
    )
    if not 0 < coef.kappa0 <= coef.kappa1:
        raise CoefficientError("declared bounds must satisfy 0 < kappa0 <= kappa1")
    return coef


# drift integrals ---------------------------------------------------------------

def _signed_moment(profile: UnimodalProfile, g, lo: float, hi: float, side: int,
                   points: tuple[float, ...] = ()) -> float:
    """``int_{lo}^{hi} z nu(z) g(side z) dz`` over ``z > 0`` in the log variable."""
    if hi <= lo:
        return 0.0
    skew = 1.0 + side * profile.j_skew

    def f(v):
        if v >= math.log(profile.integrability_cut):
            return 0.0
        w = float(g(np.array(side * math.exp(v))))
        return 0.0 if w == 0.0 else w * math.exp(2.0 * v + float(profile.log_nu(v)))

    if lo == 0.0:
        lo_v = -math.inf
        # the integrand z^2 nu(z) in log r must decay at -inf; quadrature cannot tell otherwise
        far = (-710.0, -700.0)
        if all(float(g(np.array(side * math.exp(v)))) != 0.0 for v in far):
            slope = (float(profile.log_nu(far[1])) - float(profile.log_nu(far[0]))) / 10.0 + 2.0
            if slope <= 1e-9:
                return math.inf
    else:
        lo_v = math.log(lo)
    hi_v = math.log(hi)
    cuts = sorted({math.log(abs(p)) for p in points if p != 0 and lo < abs(p) < hi})
    edges = [lo_v, *cuts, hi_v]
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        val, err = integrate.quad(f, a, b, epsabs=0.0, epsrel=1e-12, limit=200)
        if not math.isfinite(val):
            return math.inf
        total += val
    return skew * total


def drift_component_integrals(coef: Coefficient, profile: UnimodalProfile, r) -> np.ndarray:
    """``I[c, k] = int_{r_k <= |z| < 1} z g_c(z) J(z) dz`` with ``g_0 = 1`` (base).

    Only defined for ``d = 1``; the result is x-independent.
    """
    if profile.d != 1:
        raise CoefficientError("drift integrals are implemented for d = 1")
    r = np.atleast_1d(np.asarray(r, dtype=float))
    if np.any(r <= 0) or np.any(r > 1):
        raise CoefficientError("drift radii must lie in (0, 1]")
    gs = [(lambda z: np.ones_like(z), ())] + [(c.fn, c.breakpoints) for c in coef.components]
    out = np.zeros((len(gs), r.size))
    for c, (g, pts) in enumerate(gs):
        if c > 0 and coef.components[c - 1].even and profile.symmetric:
            continue  # odd integrand: exact cancellation
        if c == 0 and profile.symmetric:
            continue
        for k, rk in enumerate(r):
            right = _signed_moment(profile, g, rk, 1.0, +1, pts)
            left = _signed_moment(profile, g, rk, 1.0, -1, pts)
            out[c, k] = right - left
    return out


def drift_integral(coef: Coefficient, profile: UnimodalProfile, x, r):
    """Internal drift ``D(x, r) = int_{r <= |z| < 1} z kappa(x, z) J(z) dz`` (d = 1).

    Scalar inputs give a float; otherwise an array of shape ``(len(x), len(r))``.
    """
    scalar = np.ndim(x) == 0 and np.ndim(r) == 0
    I = drift_component_integrals(coef, profile, r)
    A = coef.amplitude_matrix(x)
    D = coef.base * I[0][None, :] + A.T @ I[1:]
    return float(D[0, 0]) if scalar else D


def default_r_grid(sf: ScaleFunctions, t_min: float, per_decade: int = 8) -> np.ndarray:
    """Geometric radii from ``h^-1(1/t_min)/8`` up to 1."""
    r_min = min(sf.scale(t_min) / 8.0, 0.5)
    n = max(int(math.ceil(per_decade * math.log10(1.0 / r_min))) + 1, 2)
    return np.geomspace(r_min, 1.0, n)


@dataclass
class DriftCheck:
    kappa3_emp: float
    kappa4_emp: float
    kappa3_pass: bool
    kappa4_pass: bool
    growth: float
    bounded: bool
    ratio: np.ndarray = field(repr=False)
    r_grid: np.ndarray = field(repr=False)
    x_grid: np.ndarray = field(repr=False)

    @property
    def passed(self) -> bool:
        return self.kappa3_pass and self.kappa4_pass and self.bounded

    def to_dict(self) -> dict:
        return {"kappa3_emp": self.kappa3_emp, "kappa4_emp": self.kappa4_emp,
                "kappa3_pass": self.kappa3_pass, "kappa4_pass": self.kappa4_pass,
                "growth_below_grid": self.growth, "bounded": self.bounded,
                "r_min": float(self.r_grid[0]), "n_r": int(self.r_grid.size),
                "x_window": [float(self.x_grid[0]), float(self.x_grid[-1])],
                "n_x": int(self.x_grid.size)}


def check_drift_conditions(coef: Coefficient, profile: UnimodalProfile, sf: ScaleFunctions,
                           x_grid, r_grid, growth_decades: float = 2.0,
                           growth_tol: float = 0.05) -> DriftCheck:
    """Empirical constants in the two internal-drift conditions.

    ``kappa3_emp = max |D(x,r)| / (r h(r))`` and
    ``kappa4_emp = max |D(x,r) - D(y,r)| / (|x-y|^beta r h(r))`` over the
    grids. Because the conditions quantify over all ``r in (0, 1]``, the
    supremum is recomputed on radii extending ``growth_decades`` below the
    grid; growth beyond ``growth_tol`` marks the ratio as unbounded.
    """
    x = np.asarray(x_grid, dtype=float)
    r = np.sort(np.asarray(r_grid, dtype=float))
    D = drift_integral(coef, profile, x, r)
    rh = r * sf.h(r)
    ratio = np.abs(D) / rh[None, :]
    k3 = float(ratio.max()) if ratio.size else 0.0

    k4 = 0.0
    if x.size > 1:
        i, j = np.triu_indices(x.size, k=1)
        dist = np.abs(x[i] - x[j]) ** coef.beta
        diff = np.abs(D[i] - D[j]) / (dist[:, None] * rh[None, :])
        k4 = float(diff.max())

    n_ext = max(int(round(4 * growth_decades)), 1)
    r_ext = r[0] * np.geomspace(10.0 ** -growth_decades, 1.0, n_ext + 1)[:-1]
    D_ext = drift_integral(coef, profile, x, r_ext)
    k3_ext = max(k3, float((np.abs(D_ext) / (r_ext * sf.h(r_ext))[None, :]).max()))
    growth = 0.0 if k3 == 0 else (k3_ext - k3) / k3
    bounded = growth <= growth_tol
    tol = 1e-9
    return DriftCheck(k3, k4, k3 <= coef.kappa3 * (1 + tol) + tol, k4 <= coef.kappa4 * (1 + tol) + tol,
                      float(growth), bool(bounded), ratio, r, x)


# bounds and Hölder -----------------------------------------------------------------

def _z_samples(coef: Coefficient) -> np.ndarray:
    z = np.concatenate([-np.geomspace(1e-4, 1e2, 61)[::-1], np.geomspace(1e-4, 1e2, 61)])
    bps = np.array(coef.breakpoints)
    if bps.size:
        z = np.concatenate([z, bps - 1e-9, bps + 1e-9])
    return np.sort(z)


def check_kappa_bounds(coef: Coefficient, x_grid) -> tuple[float, float, bool]:
    """Empirical ``(min kappa, max kappa, pass)`` on ``x_grid x z-samples``."""
    x = np.asarray(x_grid, dtype=float)
    vals = coef.kappa(x[:, None], _z_samples(coef)[None, :])
    lo, hi = float(vals.min()), float(vals.max())
    ok = lo > 0 and lo >= coef.kappa0 * (1 - 1e-12) and hi <= coef.kappa1 * (1 + 1e-12)
    return lo, hi, bool(ok)


def holder_constant(coef: Coefficient, x_grid, beta: float) -> float:
    """``max |kappa(x,z) - kappa(y,z)| / |x - y|^beta`` over grid pairs and z-samples."""
    x = np.asarray(x_grid, dtype=float)
    if x.size < 2 or coef.is_constant:
        return 0.0
    vals = coef.kappa(x[:, None], _z_samples(coef)[None, :])
    i, j = np.triu_indices(x.size, k=1)
    num = np.abs(vals[i] - vals[j]).max(axis=1)
    return float((num / np.abs(x[i] - x[j]) ** beta).max())


def check_holder(coef: Coefficient, x_grid, beta: float | None = None) -> tuple[float, float, bool]:
    """Hölder check at the declared exponent or at a smaller ``beta``.

    For ``beta < coef.beta`` the admissible constant becomes
    ``max(2 kappa1, kappa2)`` (large separations are controlled by the bound
    on ``kappa``). Returns ``(empirical, admissible, pass)``.
    """
    b = coef.beta if beta is None else float(beta)
    if b > coef.beta:
        raise CoefficientError("a Hölder exponent above the declared beta is not implied")
    allowed = coef.kappa2 if b == coef.beta else max(2 * coef.kappa1, coef.kappa2)
    emp = holder_constant(coef, x_grid, b)
    ok = emp <= allowed * (1 + 1e-9) + 1e-12
    if b < coef.beta:
        ok = ok and holder_constant(coef, x_grid, coef.beta) <= coef.kappa2 * (1 + 1e-9) + 1e-12
    return emp, allowed, bool(ok)


# regime classification -------------------------------------------------------------

@dataclass
class RegimeCheck:
    id: str
    empirical: float | None
    declared: float | None
    passed: bool
    note: str = ""

    def to_dict(self) -> dict:
        return {"id": self.id, "empirical": self.empirical, "declared": self.declared,
                "passed": self.passed, "note": self.note}


@dataclass
class RegimeReport:
    regime: str  # "Q1", "Q2" or "rejected"
    alpha_h: float | None
    beta_h: float | None
    checks: list[RegimeCheck]
    grid: dict = field(default_factory=dict)

    @property
    def failing(self) -> list[str]:
        return [c.id for c in self.checks if not c.passed]

    def to_dict(self) -> dict:
        return {"regime": self.regime, "alpha_h": self.alpha_h, "beta_h": self.beta_h,
                "checks": [c.to_dict() for c in self.checks], "failing": self.failing,
                "grid": self.grid}


def estimate_scaling_exponents(sf: ScaleFunctions, r_lo: float = 1e-8) -> tuple[float, float]:
    """Range ``(min, max)`` of the local index ``-d log h / d log r`` on ``[r_lo, 1]``."""
    lr = np.log(sf.r_table)
    lh = np.log(sf.h_table)
    sel = (sf.r_table >= r_lo) & (sf.r_table <= 1.0)
    slope = -np.gradient(lh[sel], lr[sel])
    return float(slope.min()), float(slope.max())


def classify_regime(coef: Coefficient, profile: UnimodalProfile, sf: ScaleFunctions,
                    t_min: float = 0.05, x_grid=None, r_grid=None,
                    alpha_h: float | None = None, beta_h: float | None = None,
                    C_h: float | None = None, c_h: float | None = None) -> RegimeReport:
    """Decide between the critical (Q1), super-critical (Q2) and rejected cases.

    Q1 needs a lower scaling certificate with exponent 1; Q2 needs lower and
    upper certificates with ``0 < alpha_h <= beta_h < 1`` and
    ``1 - alpha_h < beta ^ alpha_h``. Both need the coefficient bounds, the
    Hölder bound and both drift conditions. Unset exponents are estimated
    from the local index of ``h`` (rounded outward to 1e-3).
    """
    x = np.linspace(-8.0, 8.0, 33) if x_grid is None else np.asarray(x_grid, dtype=float)
    r = default_r_grid(sf, t_min) if r_grid is None else np.asarray(r_grid, dtype=float)
    checks: list[RegimeCheck] = []

    checks.append(RegimeCheck("jump-comparability", profile.gamma0, profile.gamma0, True,
                              "validated on construction"))
    lo, hi, ok = check_kappa_bounds(coef, x)
    checks.append(RegimeCheck("kappa-lower-bound", lo, coef.kappa0, lo >= coef.kappa0 * (1 - 1e-12) and lo > 0))
    checks.append(RegimeCheck("kappa-upper-bound", hi, coef.kappa1, hi <= coef.kappa1 * (1 + 1e-12)))
    emp, allowed, ok = check_holder(coef, x)
    checks.append(RegimeCheck("kappa-holder", emp, allowed, ok, f"beta={coef.beta:g}"))

    dc = check_drift_conditions(coef, profile, sf, x, r)
    checks.append(RegimeCheck("drift-bound", dc.kappa3_emp, coef.kappa3, dc.kappa3_pass))
    checks.append(RegimeCheck("drift-holder", dc.kappa4_emp, coef.kappa4, dc.kappa4_pass))
    checks.append(RegimeCheck("drift-bound-stable", dc.growth, 0.05, dc.bounded,
                              "relative growth of the drift ratio on radii below the grid"))

    lower1 = certify_scaling(sf, 1.0, "lower", declared=C_h)
    regime = "rejected"
    a_used: float | None = None
    b_used: float | None = None
    if lower1.passed and (alpha_h is None or alpha_h == 1.0):
        checks.append(RegimeCheck("lower-scaling", lower1.refined_constant, C_h, True, "alpha_h=1"))
        a_used = 1.0
        regime = "Q1"
    else:
        a_est, b_est = estimate_scaling_exponents(sf)
        a_used = alpha_h if alpha_h is not None else math.floor(a_est * 1000) / 1000
        b_used = beta_h if beta_h is not None else math.ceil(b_est * 1000) / 1000
        low = certify_scaling(sf, a_used, "lower", declared=C_h)
        up = certify_scaling(sf, b_used, "upper", declared=c_h)
        checks.append(RegimeCheck("lower-scaling", low.refined_constant, C_h, low.passed, f"alpha_h={a_used:g}"))
        checks.append(RegimeCheck("upper-scaling", up.refined_constant, c_h, up.passed, f"beta_h={b_used:g}"))
        order_ok = 0 < a_used <= b_used < 1
        checks.append(RegimeCheck("scaling-order", b_used, 1.0, order_ok, "0 < alpha_h <= beta_h < 1"))
        bal = 1 - a_used
        bal_ok = bal < min(coef.beta, a_used)
        checks.append(RegimeCheck("holder-vs-order", bal, min(coef.beta, a_used), bal_ok,
                                  "1 - alpha_h < beta ^ alpha_h"))
        if low.passed and up.passed and order_ok and bal_ok:
            regime = "Q2"
    if any(not c.passed for c in checks):
        regime = "rejected"
    grid = {"x_window": [float(x[0]), float(x[-1])], "n_x": int(x.size),
            "r_min": float(r[0]), "n_r": int(r.size), "t_min": float(t_min)}
    return RegimeReport(regime, a_used, b_used, checks, grid)
