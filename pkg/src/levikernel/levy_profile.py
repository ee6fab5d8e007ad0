"""Unimodal Lévy profiles and the scale functions built from them.

A profile is a radial, non-increasing density ``nu`` on ``(0, inf)`` together
with a jump kernel ``J`` comparable to ``nu(|z|)``. Everything downstream
(time scales, bound functions, drift thresholds) is expressed through

    h(r) = int (1 ^ |x|^2 / r^2) nu(|x|) dx,
    K(r) = r^-2 int_{|x|<r} |x|^2 nu(|x|) dx,

computed here by one-dimensional radial quadrature.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate, interpolate, optimize

log = logging.getLogger(__name__)

QUAD_EPSREL = 1e-12
QUAD_LIMIT = 400


class ProfileError(ValueError):
    """Raised when a profile violates the standing assumptions."""


def sphere_area(d: int) -> float:
    """Surface measure of the unit sphere in R^d."""
    return 2.0 * math.pi ** (d / 2.0) / math.gamma(d / 2.0)


@dataclass(frozen=True)
class UnimodalProfile:
    """Radial Lévy density plus jump kernel.

    The density is stored as ``log nu`` as a function of ``log r`` so that
    radial integrals over many decades never overflow; ``log_nu`` also
    accepts complex arguments (the analytic continuation used when
    oscillatory integrals are rotated into the complex plane). ``j_skew`` tilts the
    jump kernel, ``J(z) = nu(|z|) (1 + j_skew sgn z)`` in one dimension;
    ``gamma0`` is the declared comparability constant. ``integrability_cut``
    is the radius beyond which ``nu`` is treated as zero (``inf`` for
    untruncated families).
    """

    family: str
    params: tuple[tuple[str, float], ...]
    d: int
    log_nu: Callable[[np.ndarray], np.ndarray] = field(repr=False, compare=False)
    gamma0: float = 1.0
    j_skew: float = 0.0
    integrability_cut: float = math.inf

    def nu(self, r):
        r = np.asarray(r, dtype=float)
        with np.errstate(divide="ignore", over="ignore"):
            out = np.exp(self.log_nu(np.log(r)))
        if math.isfinite(self.integrability_cut):
            out = np.where(r < self.integrability_cut, out, 0.0)
        return out

    def J(self, z):
        z = np.asarray(z, dtype=float)
        if self.d == 1:
            return self.nu(np.abs(z)) * (1.0 + self.j_skew * np.sign(z))
        return self.nu(np.linalg.norm(z, axis=-1))

    @property
    def param_dict(self) -> dict[str, float]:
        return dict(self.params)

    @property
    def breakpoints(self) -> tuple[float, ...]:
        return (self.integrability_cut,) if math.isfinite(self.integrability_cut) else ()

    @property
    def symmetric(self) -> bool:
        return self.j_skew == 0.0

    def radial_moment(self, k: float, a: float, b: float) -> float:
        """``int_a^b s^k nu(s) ds`` with ``0 <= a < b <= inf``."""
        if b <= a:
            return 0.0
        cut = self.integrability_cut
        if a >= cut:
            return 0.0
        b = min(b, cut)
        if a == 0.0:
            return _log_quad(self.log_nu, k, b, -math.inf, 0.0)
        if math.isinf(b):
            return _log_quad(self.log_nu, k, a, 0.0, math.inf)
        return _log_quad(self.log_nu, k, a, 0.0, math.log(b / a))


def _log_quad(log_nu, k: float, anchor: float, vlo: float, vhi: float) -> float:
    # s = anchor * e^v; the anchor factor anchor^(k+1) is applied at the end
    la = math.log(anchor)

    def g(v):
        e = (k + 1.0) * v + float(log_nu(la + v))
        return math.exp(e) if e < 700.0 else math.inf

    for v_end in (vlo, vhi):
        # an integrable tail must decay in the log variable
        g1, g2 = g(math.copysign(100.0, v_end)), g(math.copysign(200.0, v_end))
        if math.isinf(v_end) and g2 > 0.99 * g1 and g2 > 0.0:
            raise ProfileError(f"radial integral of order {k} diverges near r={anchor:g}")
    val, err = integrate.quad(g, vlo, vhi, epsabs=0.0, epsrel=QUAD_EPSREL, limit=QUAD_LIMIT)
    if not math.isfinite(val) or (val != 0.0 and err > 1e-6 * abs(val)):
        raise ProfileError(f"radial integral of order {k} did not converge near r={anchor:g}")
    return math.exp((k + 1.0) * la) * val


_SEG_X, _SEG_W = np.polynomial.legendre.leggauss(12)


def _segment_moments(profile: UnimodalProfile, k: float, r: np.ndarray) -> np.ndarray:
    """``int_{r_i}^{r_{i+1}} s^k nu(s) ds`` for consecutive radii, Gauss-Legendre in ``log s``.

    Segments are split at the integrability cut, beyond which ``nu`` vanishes.
    """
    lo, hi = np.log(r[:-1]), np.log(r[1:])
    cut = profile.integrability_cut
    if math.isfinite(cut):
        hi = np.minimum(hi, math.log(cut))
    width = np.maximum(hi - lo, 0.0)
    v = 0.5 * (lo + hi)[:, None] + 0.5 * width[:, None] * _SEG_X[None, :]
    with np.errstate(over="ignore", under="ignore"):
        vals = np.exp((k + 1.0) * v + profile.log_nu(v))
    return 0.5 * width * (vals @ _SEG_W)


# registry -----------------------------------------------------------------

def _stable(d, alpha):
    if not 0.0 < alpha < 2.0:
        raise ProfileError(f"stable index must lie in (0, 2), got {alpha}")
    return lambda lr: -(d + alpha) * np.asarray(lr)


def _log_stable(d):
    def log_nu(lr):
        lr = np.asarray(lr)
        if np.iscomplexobj(lr):
            return -(d + 1.0) * lr + np.log(np.log(2.0 + np.exp(-lr)))
        lr = lr.astype(float)
        # log(2 + 1/r) evaluated as logaddexp(log 2, -log r) so 1/r never overflows
        return -(d + 1.0) * lr + np.log(np.logaddexp(np.log(2.0), -lr))
    return log_nu


def _exponential(d, rate=1.0):
    return lambda lr: -rate * np.exp(np.asarray(lr))


PROFILE_FAMILIES = {
    "stable": (_stable, ("alpha",)),
    "log_stable": (_log_stable, ()),
    "exponential": (_exponential, ("rate",)),
}


def make_profile(family: str, d: int = 1, gamma0: float | None = None,
                 j_skew: float = 0.0, integrability_cut: float | None = None,
                 **params) -> UnimodalProfile:
    """Build a registered profile.

    Families: ``stable`` (``nu = r^{-d-alpha}``), ``log_stable``
    (``nu = r^{-d-1} log(2 + 1/r)``) and ``exponential`` (a finite measure,
    kept to exercise the rejection path). Any family becomes a truncated
    variant by passing ``integrability_cut``.
    """
    try:
        builder, names = PROFILE_FAMILIES[family]
    except KeyError:
        raise ProfileError(f"unknown profile family {family!r}") from None
    unknown = set(params) - set(names)
    if unknown:
        raise ProfileError(f"unexpected parameters for {family}: {sorted(unknown)}")
    if d < 1:
        raise ProfileError("dimension must be positive")
    if not -1.0 < j_skew < 1.0:
        raise ProfileError("j_skew must lie in (-1, 1)")
    if j_skew and d != 1:
        raise ProfileError("j_skew is only defined for d = 1")
    if gamma0 is None:
        gamma0 = max(1.0 + abs(j_skew), 1.0 / (1.0 - abs(j_skew)))
    cut = math.inf if integrability_cut is None else float(integrability_cut)
    prof = UnimodalProfile(family=family, params=tuple(sorted(params.items())), d=d,
                           log_nu=builder(d, **params), gamma0=float(gamma0),
                           j_skew=float(j_skew), integrability_cut=cut)
    validate_profile(prof)
    return prof


def validate_profile(profile: UnimodalProfile, n_samples: int = 200) -> None:
    """Check monotonicity, integrability, comparability and ``h(0+) = inf``."""
    r = np.geomspace(1e-6, 1e3, n_samples)
    r = r[r < profile.integrability_cut]
    vals = profile.nu(r)
    if np.any(vals < 0) or np.any(np.diff(vals) > 1e-12 * vals[:-1]):
        raise ProfileError("nu must be non-negative and non-increasing")
    omega = sphere_area(profile.d)
    total = omega * (profile.radial_moment(profile.d + 1, 0.0, 1.0)
                     + profile.radial_moment(profile.d - 1, 1.0, math.inf))
    if not math.isfinite(total):
        raise ProfileError("int (1 ^ |x|^2) nu(|x|) dx is not finite")
    if profile.gamma0 < 1.0:
        raise ProfileError("gamma0 must be >= 1")
    if profile.d == 1:
        z = np.concatenate([-r[::-1], r])
        J = profile.J(z)
        nu = profile.nu(np.abs(z))
        if np.any(J > profile.gamma0 * nu * (1 + 1e-12)) or np.any(J * profile.gamma0 < nu * (1 - 1e-12)):
            raise ProfileError("J is not comparable with nu under the declared gamma0")
    # h(0+) = inf: the tail integral must keep growing as r -> 0
    far = omega * profile.radial_moment(profile.d - 1, 1e-14, math.inf)
    near = omega * profile.radial_moment(profile.d - 1, 1e-4, math.inf)
    if not far > 1.01 * near:
        raise ProfileError("h(0+) is finite; the profile must have infinite total mass")


# scale functions --------------------------------------------------------------

def compute_K(profile: UnimodalProfile, r: float) -> float:
    if r <= 0:
        raise ValueError("r must be positive")
    omega = sphere_area(profile.d)
    return omega * profile.radial_moment(profile.d + 1, 0.0, r) / (r * r)


def compute_h(profile: UnimodalProfile, r: float) -> float:
    if r <= 0:
        raise ValueError("r must be positive")
    omega = sphere_area(profile.d)
    return compute_K(profile, r) + omega * profile.radial_moment(profile.d - 1, r, math.inf)


class HInverseWarning(UserWarning):
    pass


@dataclass(frozen=True)
class InverseResult:
    r: float
    clamped: bool = False


class ScaleFunctions:
    """Tabulated/evaluable ``h``, ``K``, ``h^{-1}``, ``rho_t`` and ``T_h``.

    Exact values come from quadrature; ``h_fast``/``K_fast`` interpolate the
    log-log table and are what bulk envelope evaluations use.
    """

    def __init__(self, profile: UnimodalProfile, r_min: float = 1e-12,
                 r_max: float = 1e8, n_table: int = 481):
        self.profile = profile
        self.d = profile.d
        self.r_table = r = np.geomspace(r_min, r_max, n_table)
        omega = sphere_area(profile.d)
        d = profile.d
        # cumulative moments over table segments; the two unbounded ends use adaptive quadrature
        inner = profile.radial_moment(d + 1, 0.0, r[0]) + np.concatenate(
            [[0.0], np.cumsum(_segment_moments(profile, d + 1, r))])
        outer = profile.radial_moment(d - 1, r[-1], math.inf) + np.concatenate(
            [np.cumsum(_segment_moments(profile, d - 1, r)[::-1])[::-1], [0.0]])
        self.K_table = omega * inner / r ** 2
        self.h_table = self.K_table + omega * outer
        if np.any(np.diff(self.h_table) >= 0):
            raise ProfileError("h is not strictly decreasing on the working window")
        lr = np.log(self.r_table)
        self._logh = interpolate.CubicSpline(lr, np.log(self.h_table))
        with np.errstate(divide="ignore"):
            logK = np.log(self.K_table)
        ok = np.isfinite(logK)
        self._logK = interpolate.CubicSpline(lr[ok], logK[ok])
        self._klo = lr[ok][0]
        self.alpha_h: float | None = None
        self.C_h: float | None = None
        self.beta_h: float | None = None
        self.c_h: float | None = None

    def h(self, r):
        return _vec(lambda s: compute_h(self.profile, s), r)

    def K(self, r):
        return _vec(lambda s: compute_K(self.profile, s), r)

    def h_fast(self, r):
        r = np.asarray(r, dtype=float)
        return np.exp(self._logh(np.log(r)))

    def K_fast(self, r):
        r = np.asarray(r, dtype=float)
        lr = np.log(np.maximum(r, 1e-300))
        inside = (lr >= self._klo) & (r <= self.r_table[-1])
        out = np.exp(self._logK(np.clip(lr, self._klo, math.log(self.r_table[-1]))))
        if np.all(inside):
            return out
        exact = _vec(lambda s: compute_K(self.profile, s), np.where(inside, 1.0, r))
        return np.where(inside, out, exact)

    def h_inverse(self, u: float) -> InverseResult:
        """Generalised inverse of ``h`` (right-continuous; largest ``r`` wins).

        Brackets ``u`` on the tabulation, then solves ``h(r) = u`` on the
        exact quadrature values. Out-of-range requests are clamped to the
        table edge with ``clamped=True``.
        """
        u = float(u)
        if u <= 0:
            raise ValueError("u must be positive")
        hs = self.h_table
        if u > hs[0] or u < hs[-1]:
            import warnings
            warnings.warn(f"h^-1({u:g}) outside tabulated range; clamped", HInverseWarning, stacklevel=2)
            return InverseResult(float(self.r_table[0] if u > hs[0] else self.r_table[-1]), True)
        i = int(np.searchsorted(-hs, -u))
        # one extra node each side: table and quadrature values differ at rounding level
        lo = self.r_table[max(i - 2, 0)]
        hi = self.r_table[min(i + 1, len(hs) - 1)]
        if lo == hi:
            return InverseResult(float(lo))
        f = lambda lr: math.log(compute_h(self.profile, math.exp(lr))) - math.log(u)
        lr = optimize.brentq(f, math.log(lo), math.log(hi), xtol=1e-14, rtol=1e-14)
        return InverseResult(math.exp(lr))

    def scale(self, t):
        """``h^{-1}(1/t)``, vectorised over ``t``."""
        return _vec(lambda s: self.h_inverse(1.0 / s).r, t)

    def rho(self, t: float, x):
        """Bound function ``[h^-1(1/t)]^-d ^ t K(|x|)/|x|^d``."""
        x = np.asarray(x, dtype=float)
        r = np.abs(x) if self.d == 1 or x.ndim == 0 else np.linalg.norm(x, axis=-1)
        diag = self.scale(t) ** (-self.d)
        rs = np.where(r > 0, r, 1.0)
        off = t * self.K_fast(rs) / rs ** self.d
        return np.where(r > 0, np.minimum(diag, off), diag)

    def T_h(self, t):
        s = self.scale(t)
        return 1.0 + np.log(np.maximum(1.0, 1.0 / s))

    def rho_tail_mass(self, t: float, a: float) -> float:
        """``int_a^inf rho_t(u) du`` for ``a > 0`` (one-sided, d = 1)."""
        diag = self.scale(t) ** (-self.d)
        f = lambda u: min(diag, t * float(self.K_fast(u)) / u ** self.d)
        val, _ = integrate.quad(f, a, math.inf, limit=200, epsrel=1e-8)
        return val


def _vec(fn, x):
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        return float(fn(float(x)))
    return np.array([fn(float(v)) for v in x.ravel()]).reshape(x.shape)


def bound_rho(sf: ScaleFunctions, t: float, x) -> float | np.ndarray:
    if t <= 0:
        raise ValueError("t must be positive")
    out = sf.rho(t, x)
    return float(out) if np.ndim(out) == 0 else out


def h_inverse(sf: ScaleFunctions, u: float) -> InverseResult:
    return sf.h_inverse(u)


# scaling certificates -----------------------------------------------------

@dataclass
class ScalingCertificate:
    kind: str  # "lower" or "upper"
    exponent: float
    constant: float
    refined_constant: float
    declared: float | None
    passed: bool

    def to_dict(self) -> dict:
        return {"kind": self.kind, "exponent": self.exponent, "constant": self.constant,
                "refined_constant": self.refined_constant, "declared": self.declared,
                "passed": self.passed}


def _scaling_extreme(sf: ScaleFunctions, exponent: float, decades: int, per_decade: int, kind: str) -> float:
    n = decades * per_decade + 1
    lam = np.geomspace(10.0 ** -decades, 1.0, n)
    r = np.geomspace(10.0 ** -decades, 1.0, n)
    # log-grid: h(lam*r) only needs the 2n-1 products on the same geometric lattice
    prod = np.geomspace(10.0 ** (-2 * decades), 1.0, 2 * n - 1)
    hp = np.array([compute_h(sf.profile, p) for p in prod])
    hr = hp[n - 1:]
    i = np.arange(n)
    # lam index a, r index b -> product index a + b
    ratio = hr[None, :] / (lam[:, None] ** exponent * hp[i[:, None] + i[None, :]])
    return float(ratio.max() if kind == "lower" else ratio.min())


def certify_scaling(sf: ScaleFunctions, exponent: float, kind: str = "lower",
                    declared: float | None = None, decades: int = 8, per_decade: int = 4,
                    stability: float = 0.25) -> ScalingCertificate:
    """Empirical weak scaling constant of ``h`` on ``lam, r in (0, 1]``.

    ``kind="lower"``: smallest ``C`` with ``h(r) <= C lam^a h(lam r)``.
    ``kind="upper"``: largest ``c`` with ``h(r) >= c lam^b h(lam r)``.
    The grid is then extended to twice as many decades; the certificate
    passes only if the constant moved by less than ``stability`` (relative)
    and respects the declared value, if any.
    """
    if kind not in ("lower", "upper"):
        raise ValueError("kind must be 'lower' or 'upper'")
    c1 = _scaling_extreme(sf, exponent, decades, per_decade, kind)
    c2 = _scaling_extreme(sf, exponent, 2 * decades, per_decade, kind)
    ok = math.isfinite(c1) and c1 > 0 and math.isfinite(c2) and c2 > 0
    if ok:
        ok = abs(c2 - c1) <= stability * abs(c1)
    if ok and declared is not None:
        ok = c2 <= declared * (1 + 1e-9) if kind == "lower" else c2 >= declared * (1 - 1e-9)
    if ok and kind == "lower":
        ok = c2 >= 1.0 - 1e-9
    return ScalingCertificate(kind, exponent, c1, c2, declared, bool(ok))


def nu_homogeneity_constant(profile: UnimodalProfile, beta_bar: float, decades: int = 6) -> float:
    """Largest ``c`` with ``c lam^{d+beta_bar} nu(lam r) <= nu(r)`` on a grid."""
    lam = np.geomspace(10.0 ** -decades, 1.0, 4 * decades + 1)
    r = np.geomspace(10.0 ** -decades, 10.0 ** decades, 8 * decades + 1)
    if math.isfinite(profile.integrability_cut):  # probe both sides of the cut
        r = np.union1d(r, profile.integrability_cut * np.array([0.5, 0.999, 1.001, 2.0]))
    num = np.broadcast_to(profile.nu(r)[None, :], (lam.size, r.size))
    den = lam[:, None] ** (profile.d + beta_bar) * profile.nu(lam[:, None] * r[None, :])
    pos = den > 0
    return float(np.min(num[pos] / den[pos])) if np.any(pos) else math.inf


# appendix moment bounds ------------------------------------------------------

@dataclass
class FirstMomentResult:
    tail: float
    small_ball: float
    checks: dict[str, bool]


def first_moment_tail(profile: UnimodalProfile, r: float, sf: ScaleFunctions | None = None,
                      alpha_h: float | None = None, C_h: float = 1.0,
                      beta_h: float | None = None, c_h: float = 1.0) -> FirstMomentResult:
    """First moments of ``nu`` outside/inside the ball of radius ``r < 1``.

    Returns ``int_{r<=|z|<1} |z| nu dz`` and ``int_{|z|<r} |z| nu dz`` and
    checks them against the moment bounds implied by weak scaling of ``h``
    (scale threshold fixed to 1).
    """
    if not 0 < r < 1:
        raise ValueError("r must lie in (0, 1)")
    d = profile.d
    omega = sphere_area(d)
    tail = omega * profile.radial_moment(d, r, 1.0)
    try:
        small = omega * profile.radial_moment(d, 0.0, r)
    except ProfileError:
        small = math.inf
    hr = compute_h(profile, r)
    checks: dict[str, bool] = {}
    if alpha_h is not None:
        if alpha_h > 1:
            checks["tail_supercritical"] = tail <= (d + 2) * C_h / (alpha_h - 1) * r * hr
        elif alpha_h == 1:
            checks["tail_critical_log"] = tail <= (d + 2) * C_h * math.log(1.0 / r) * r * hr
    if beta_h is not None and beta_h < 1:
        checks["small_ball"] = small <= (d + 2) / (c_h * (1 - beta_h)) * r * hr
    return FirstMomentResult(tail, small, checks)
