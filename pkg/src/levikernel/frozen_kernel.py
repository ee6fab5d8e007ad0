"""Frozen-coefficient symbols and heat kernels by Fourier inversion (d = 1).

Normalisation, pinned here and nowhere else:

* symbol    psi_w(xi) = int (e^{i xi z} - 1 - i xi z 1_{|z|<1}) kappa(w, z) J(z) dz
* density   p_w(t, u) = (2 pi)^{-1} int e^{-i xi u} e^{t psi_w(xi)} d xi
* kernel    p^{K_w}(t, x, y) = p_w(t, y - x)

so ``grad_x p^{K_w}(t, x, y) = -d/du p_w(t, y - x)``. Because
``psi(-xi) = conj psi(xi)`` every inversion is ``(1/pi) Re int_0^inf``, done
with composite Gauss–Legendre panels: dyadic panels resolve the non-smooth
behaviour at ``xi = 0``, uniform panels (a fixed fraction of a period of
``cos(xi u_max)``) the oscillation. Unlike a periodised trapezoid sum this
rule has no aliasing, which matters for heavy-tailed kernels.

The symbol of ``kappa(w, .)`` is ``chi_0 base + sum_c a_c(w) chi_c`` with
``w``-independent component symbols ``chi_c``, so each inversion evaluates
the few ``chi_c`` once at its quadrature nodes and forms every ``psi_w`` by a
small matrix product.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import interpolate

from .coefficient import Coefficient
from .levy_profile import ScaleFunctions, UnimodalProfile

__all__ = [
    "FrozenKernelError", "component_symbol", "symbol", "ComponentSymbols", "FrozenSymbolTable",
    "FrozenKernelCache", "frozen_density", "frozen_gradient", "apply_frozen_operator",
    "delta_direct", "gauss_legendre_panels", "frozen_window_mass", "frozen_interval_mass", "CACHE_VERSION",
]

CACHE_VERSION = 1
LOG_EPS = math.log(1e-14)
GL_ORDER = 16
_GL_X, _GL_W = np.polynomial.legendre.leggauss(GL_ORDER)


class FrozenKernelError(RuntimeError):
    pass


# symbol quadrature ------------------------------------------------------------------
#
# z-profiles are piecewise constant between their breakpoints, so a component
# symbol is a weighted sum of the two primitives
#
#   R(a, b; xi) = int_a^b (cos(xi z) - 1) nu(z) dz
#   S(a, b; xi) = int_a^b (sin(xi z) - xi z 1_{z<1}) nu(z) dz
#
# over segments of the half-line. Each primitive is split at z* = 4 / xi: the
# near part is a fixed Gauss–Legendre rule in log z (plus a Taylor remainder
# from moment tables near 0), the oscillatory far part is rotated onto
# z = c + i s where the integrand decays like e^{-xi s} and a Gauss–Laguerre
# rule converges geometrically. Everything is vectorised over xi.

_ROT_SPLIT = 4.0
_LAG_X, _LAG_W = np.polynomial.laguerre.laggauss(64)
_TAYLOR_DROP = 1e-5


def _composite_unit_gl(n_panels: int) -> tuple[np.ndarray, np.ndarray]:
    edges = np.linspace(0.0, 1.0, n_panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    return ((mid[:, None] + half[:, None] * _GL_X).ravel(), (half[:, None] * _GL_W).ravel())


def _sin_minus_id_cubed(y):
    """``(sin y - y) / y^3``, accurate for small ``y`` (vectorised)."""
    y = np.asarray(y, dtype=float)
    y2 = y * y
    series = -1.0 / 6.0 + y2 / 120.0 - y2 * y2 / 5040.0
    with np.errstate(divide="ignore", invalid="ignore"):
        direct = (np.sin(y) - y) / (y2 * y)
    return np.where(np.abs(y) < 1e-2, series, direct)


class _RadialTables:
    """Cumulative radial integrals of ``nu`` on a log grid, spline-interpolated.

    ``M2(x) = int_0^x z^2 nu``, ``M3(x) = int_0^x z^3 nu``, ``T(x) = int_x^inf nu``
    and ``F1(x) = int_1^x z nu``.
    """

    def __init__(self, profile: UnimodalProfile, lo: float = 1e-16, hi: float = 1e12, per_decade: int = 40):
        self.p = profile
        self.cut = profile.integrability_cut
        n = int(round(per_decade * math.log10(hi / lo))) + 1
        x = np.geomspace(lo, hi, n)
        if math.isfinite(self.cut) and lo < self.cut < hi:
            x = np.unique(np.concatenate([x, [self.cut]]))
        v = np.log(x)
        self.x = x
        half = 0.5 * np.diff(v)
        mid = 0.5 * (v[1:] + v[:-1])
        vv = mid[:, None] + half[:, None] * _GL_X
        ww = half[:, None] * _GL_W
        lnu = np.asarray(profile.log_nu(vv), dtype=float)
        if math.isfinite(self.cut):
            lnu = np.where(vv < math.log(self.cut), lnu, -np.inf)

        def seg(power):
            return np.sum(ww * np.exp(power * vv + lnu), axis=1)

        m2 = profile.radial_moment(2, 0.0, lo) + np.concatenate([[0.0], np.cumsum(seg(3.0))])
        m3 = profile.radial_moment(3, 0.0, lo) + np.concatenate([[0.0], np.cumsum(seg(4.0))])
        t_seg = seg(1.0)
        t_top = profile.radial_moment(0, hi, math.inf) if hi < self.cut else 0.0
        tail = t_top + np.concatenate([np.cumsum(t_seg[::-1])[::-1], [0.0]])
        f1 = np.concatenate([[0.0], np.cumsum(seg(2.0))])
        i1 = int(np.argmin(np.abs(x - 1.0)))
        f1 = f1 - f1[i1]
        self._m2 = interpolate.CubicSpline(v, np.log(m2))
        self._m3 = interpolate.CubicSpline(v, np.log(m3))
        pos = tail > 0
        self._t = interpolate.CubicSpline(v[pos], np.log(tail[pos]))
        self._t_hi = float(x[pos][-1])
        self._f1 = interpolate.CubicSpline(v, f1)

    def _chk(self, x):
        x = np.asarray(x, dtype=float)
        if np.any(x < self.x[0]) or np.any(x[np.isfinite(x)] > self.x[-1]):
            raise FrozenKernelError("radial table queried outside its range")
        return x

    def M2(self, x):
        return np.exp(self._m2(np.log(self._chk(x))))

    def M3(self, x):
        return np.exp(self._m3(np.log(self._chk(x))))

    def T(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        ok = np.isfinite(x) & (x < min(self.cut, self._t_hi))
        out[ok] = np.exp(self._t(np.log(self._chk(x[ok]))))
        return out

    def F1(self, x):
        return self._f1(np.log(self._chk(x)))


_TABLES: dict[int, _RadialTables] = {}


def _tables(profile: UnimodalProfile) -> _RadialTables:
    key = id(profile)
    tab = _TABLES.get(key)
    if tab is None or tab.p is not profile:
        tab = _TABLES[key] = _RadialTables(profile)
    return tab


def _segments(profile: UnimodalProfile, g, breakpoints) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Edges on ``z >= 0`` and the constant even/odd weights ``(1+s)g(z) +- (1-s)g(-z)``."""
    cut = profile.integrability_cut
    pts = {0.0, 1.0} | {abs(float(b)) for b in breakpoints if math.isfinite(b) and b != 0}
    if math.isfinite(cut):
        pts.add(cut)
    edges = np.array(sorted(pts) + [math.inf])
    s = profile.j_skew
    E = np.zeros(edges.size - 1)
    O = np.zeros(edges.size - 1)
    for k, (a, b) in enumerate(zip(edges[:-1], edges[1:])):
        if a >= cut:
            continue
        probe = np.array([a + f * (b - a) for f in (0.25, 0.5, 0.75)]) if math.isfinite(b) \
            else a + np.array([0.5, 1.0, 7.0])
        gp, gm = np.asarray(g(probe), dtype=float), np.asarray(g(-probe), dtype=float)
        if np.ptp(gp) > 0 or np.ptp(gm) > 0:
            raise FrozenKernelError("z-profiles must be constant between their declared breakpoints")
        E[k] = (1 + s) * gp[0] + (1 - s) * gm[0]
        O[k] = (1 + s) * gp[0] - (1 - s) * gm[0]
    return edges, E, O


def _rotated(profile: UnimodalProfile, c: np.ndarray, xi: np.ndarray) -> np.ndarray:
    """``int_c^inf e^{i xi z} nu(z) dz`` for ``xi c >= 4`` via ``z = c + i y / xi``."""
    z = c[:, None] + 1j * _LAG_X[None, :] / xi[:, None]
    nu = np.exp(profile.log_nu(np.log(z)))
    return 1j * np.exp(1j * xi * c) / xi * (nu @ _LAG_W)


def _near(profile, tab, a, b, xi, kind):
    """Near-zone integral over ``[a, b]`` (``b <= 4/xi``), vectorised; ``a`` may be 0."""
    out = np.zeros_like(xi)
    live = b > a
    if not np.any(live):
        return out
    a, b, x = a[live], b[live], xi[live]
    lo = np.where(a > 0, a, b * _TAYLOR_DROP)
    vlo, vhi = np.log(lo), np.log(b)
    n_pan = max(int(math.ceil(np.max(vhi - vlo))), 1)
    rx, rw = _composite_unit_gl(n_pan)
    V = vlo[:, None] + (vhi - vlo)[:, None] * rx[None, :]
    W = (vhi - vlo)[:, None] * rw[None, :]
    lnu = np.asarray(profile.log_nu(V), dtype=float)
    Z = np.exp(V)
    Y = x[:, None] * Z
    if kind == "re":
        f = -0.5 * x[:, None] ** 2 * np.sinc(Y / (2 * math.pi)) ** 2 * np.exp(3 * V + lnu)
        val = np.sum(W * f, axis=1)
        val += np.where(a > 0, 0.0, -0.5 * x ** 2 * tab.M2(lo))
    elif kind == "im_inner":
        f = x[:, None] ** 3 * _sin_minus_id_cubed(Y) * np.exp(4 * V + lnu)
        val = np.sum(W * f, axis=1)
        val += np.where(a > 0, 0.0, -(x ** 3) / 6.0 * tab.M3(lo))
    else:  # "im_outer": z >= 1, no compensator
        f = np.sin(Y) * np.exp(V + lnu)
        val = np.sum(W * f, axis=1)
    out[live] = val
    return out


def _segment_primitives(profile: UnimodalProfile, a: float, b: float, xi: np.ndarray, want_im: bool):
    """``R(a, b; xi)`` and ``S(a, b; xi)`` for ``xi > 0``."""
    tab = _tables(profile)
    zs = _ROT_SPLIT / xi
    nb = np.minimum(b, zs)
    re = _near(profile, tab, np.full_like(xi, a), nb, xi, "re")
    im = np.zeros_like(xi)
    if want_im:
        im = _near(profile, tab, np.full_like(xi, a), nb, xi, "im_inner" if b <= 1.0 else "im_outer")
    A = np.maximum(a, zs)
    far = A < b
    if np.any(far):
        Af, xf = A[far], xi[far]
        rot = _rotated(profile, Af, xf)
        if math.isfinite(b):
            rot = rot - _rotated(profile, np.full_like(xf, b), xf)
        mass = tab.T(Af) - tab.T(np.full_like(Af, b))
        re[far] += rot.real - mass
        if want_im:
            comp = xf * (tab.F1(np.full_like(Af, b)) - tab.F1(Af)) if b <= 1.0 else 0.0
            im[far] += rot.imag - comp
    return re, im


def _unit(z):
    return np.ones_like(np.asarray(z, dtype=float))


def component_symbol(profile: UnimodalProfile, g=None, breakpoints=(), xi=0.0):
    """``chi_g(xi) = int (e^{i xi z} - 1 - i xi z 1_{|z|<1}) g(z) J(z) dz``.

    ``g`` must be piecewise constant between ``breakpoints`` (defaults to 1,
    the symbol of ``J`` itself). Vectorised over ``xi``.
    """
    if profile.d != 1:
        raise FrozenKernelError("frozen kernels are implemented for d = 1")
    edges, E, O = _segments(profile, _unit if g is None else g, breakpoints)
    xi_arr = np.asarray(xi, dtype=float)
    flat = xi_arr.ravel()
    ax = np.abs(flat)
    pos = ax > 0
    re = np.zeros(flat.size)
    im = np.zeros(flat.size)
    x = ax[pos]
    want_im = bool(np.any(O != 0))
    for k in range(E.size):
        if E[k] == 0 and O[k] == 0:
            continue
        r, s_ = _segment_primitives(profile, float(edges[k]), float(edges[k + 1]), x, want_im and O[k] != 0)
        re[pos] += E[k] * r
        im[pos] += O[k] * s_
    im = np.where(flat < 0, -im, im)
    out = (re + 1j * im).reshape(xi_arr.shape)
    if not np.all(np.isfinite(out)):
        raise FrozenKernelError("symbol quadrature produced non-finite values")
    return complex(out) if xi_arr.ndim == 0 else out


def symbol(coef: Coefficient, profile: UnimodalProfile, w: float, xi):
    """Lévy symbol of the frozen operator ``L^{K_w}`` by direct quadrature."""
    out = coef.base * component_symbol(profile, None, (), xi)
    amps = coef.amplitude_matrix(np.array([w]))[:, 0]
    for a, comp in zip(amps, coef.components):
        if a != 0.0:
            out = out + a * component_symbol(profile, comp.fn, comp.breakpoints, xi)
    return out


# component symbol tables ----------------------------------------------------------

def _symbol_nodes(xi_max: float, step: float, xi_min: float = 1e-9, per_decade: int = 12) -> np.ndarray:
    n_log = int(round(per_decade * math.log10(1.0 / xi_min))) + 1
    low = np.geomspace(xi_min, 1.0, n_log)
    n_lin = max(int(math.ceil((xi_max - 1.0) / step)), 1)
    high = np.linspace(1.0, 1.0 + n_lin * step, n_lin + 1)
    return np.concatenate([low, high[1:]])


class ComponentSymbols:
    """Exact evaluator of the component symbols ``chi_c`` (row 0: symbol of ``J``).

    ``nodes``/``values`` hold a reference table used for the frequency cutoff,
    the decay certificate and the on-disk provenance record; evaluations at
    arbitrary ``xi >= 0`` are computed directly (and memoised per node set).
    """

    def __init__(self, coef: Coefficient, profile: UnimodalProfile, nodes: np.ndarray):
        self.profile = profile
        self.parts = [(None, ())] + [(c.fn, c.breakpoints) for c in coef.components]
        self._memo: dict[tuple, np.ndarray] = {}
        self.nodes = np.asarray(nodes, dtype=float)
        self.values = self(self.nodes)
        self.xi_max = float(self.nodes[-1])

    @property
    def n(self) -> int:
        return len(self.parts)

    def __call__(self, xi) -> np.ndarray:
        """Complex array ``(n_comp + 1, len(xi))``."""
        xi = np.atleast_1d(np.asarray(xi, dtype=float))
        key = (xi.size, float(xi[0]), float(xi[-1]), float(xi.sum()))
        hit = self._memo.get(key)
        if hit is not None:
            return hit
        out = np.vstack([component_symbol(self.profile, g, bps, xi) for g, bps in self.parts])
        if len(self._memo) > 8:
            self._memo.clear()
        self._memo[key] = out
        return out


@dataclass
class FrozenSymbolTable:
    """``psi_w`` on the node table for one base point ``w``."""

    base_point: float
    frequency_grid: np.ndarray
    psi_values: np.ndarray
    decay_certificate: float


def gauss_legendre_panels(xi_cut: float, panel: float, xi_min: float = 1e-9) -> tuple[np.ndarray, np.ndarray]:
    """Nodes/weights on ``[0, xi_cut]``: dyadic panels up to ``panel``, uniform beyond."""
    edges = [0.0]
    a = xi_min
    while a < panel:
        edges.append(a)
        a *= 2.0
    n_uni = max(int(math.ceil((xi_cut - panel) / panel)), 0)
    edges.extend(panel * (1 + np.arange(n_uni + 1)))
    edges = np.asarray(edges)
    lo, hi = edges[:-1], edges[1:]
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    nodes = (mid[:, None] + half[:, None] * _GL_X[None, :]).ravel()
    weights = (half[:, None] * _GL_W[None, :]).ravel()
    return nodes, weights


# the cache --------------------------------------------------------------------------

@dataclass
class InversionStats:
    clip_max: float = 0.0
    n_nodes: dict = field(default_factory=dict)


class FrozenKernelCache:
    """Symbols for every base point plus the Fourier inversion engine.

    Parameters
    ----------
    coef, profile, sf:
        Coefficient, Lévy profile and its scale functions.
    t_min:
        Smallest time at which kernels are requested; fixes the frequency cutoff.
    u_max:
        Largest displacement requested; fixes the uniform panel width
        ``panel_periods * 2 pi / u_max`` (in units of the fastest oscillation).
    refine:
        Halves the panel width and the symbol-table step (frequency doubling).
    """

    def __init__(self, coef: Coefficient, profile: UnimodalProfile, sf: ScaleFunctions | None,
                 t_min: float, u_max: float, symbol_step: float = 0.1,
                 panel_periods: float = 2.0, refine: int = 0, chunk: int = 4096,
                 symbols: ComponentSymbols | None = None):
        if t_min <= 0:
            raise FrozenKernelError("t_min must be positive")
        self.coef = coef
        self.profile = profile
        self.sf = sf
        self.t_min = float(t_min)
        self.u_max = float(u_max)
        self.refine = int(refine)
        self.panel = panel_periods * 2 * math.pi / self.u_max / 2 ** self.refine
        self.symbol_step = symbol_step / 2 ** self.refine
        self.chunk = chunk
        self.stats = InversionStats()
        if symbols is None:
            symbols = ComponentSymbols(coef, profile, _symbol_nodes(self._xi_limit(), self.symbol_step))
        self.symbols = symbols

    # frequency cutoff -------------------------------------------------------------
    def _xi_limit(self) -> float:
        """Frequency beyond which ``e^{t_min Re psi_w} < 1e-14`` for every ``w``.

        Uses ``Re psi_w <= kappa0 Re chi_0`` (``kappa >= kappa0`` and ``cos - 1 <= 0``).
        """
        k0 = self.coef.kappa0
        f = lambda x: self.t_min * k0 * component_symbol(self.profile, None, (), x).real - LOG_EPS
        x = 1.0
        while f(x) > 0:
            x *= 2.0
            if x > 1e7:
                raise FrozenKernelError("symbol not coercive; increase t_min or the frequency cutoff")
        lo = x / 2 if x > 1 else 0.0
        from scipy.optimize import brentq
        root = brentq(f, max(lo, 1e-6), x, xtol=1e-6) if f(max(lo, 1e-6)) > 0 else x
        return 1.1 * root + 1.0

    def psi(self, w, xi) -> np.ndarray:
        """``psi_w(xi)`` for ``xi >= 0``; shape ``(len(xi), len(w))``."""
        w = np.atleast_1d(np.asarray(w, dtype=float))
        chi = self.symbols(xi)
        out = self.coef.base * chi[0][:, None] * np.ones((1, w.size))
        if self.coef.n_components:
            A = self.coef.amplitude_matrix(w)
            out = out + chi[1:].T @ A
        return out

    def cutoff(self, t: float, w) -> float:
        """Per-time cutoff: ``max_w e^{t Re psi_w(xi)} < 1e-14`` for all larger ``xi``."""
        xi = self.symbols.nodes
        re = self.psi(w, xi).real.max(axis=1)
        bad = np.nonzero(t * re > LOG_EPS)[0]
        if bad.size == 0:
            return float(xi[1])
        i = bad[-1]
        if i >= xi.size - 1:
            raise FrozenKernelError("symbol not coercive; increase t_min or the frequency cutoff")
        return float(xi[i + 1])

    def table(self, w: float) -> FrozenSymbolTable:
        xi = self.symbols.nodes
        psi = self.psi([w], xi)[:, 0]
        cert = math.nan
        if self.sf is not None:
            sel = xi >= 1e-8
            cert = float(np.min(-psi.real[sel] / self.sf.h_fast(1.0 / xi[sel])))
        return FrozenSymbolTable(float(w), xi, psi, cert)

    # inversion --------------------------------------------------------------------
    def invert(self, t: float, u, w, kinds=("p",), v=None, clip=True) -> dict[str, np.ndarray]:
        """Inverse transforms at displacements ``u`` for base points ``w``.

        ``kinds`` selects multipliers applied to ``e^{t psi_w}``:
        ``"p"`` (1, the density), ``"du"`` (``-i xi``, the ``u``-derivative),
        ``"dt"`` (``psi_w``, equal to ``d/dt p``), ``"op"`` (``psi_v`` for the
        base points ``v``, paired elementwise with ``w``), and ``"c1"``, ``"c2"``,
        ... (component symbol ``chi_c``). Returns arrays of shape ``(len(u), len(w))``.
        """
        if t < self.t_min * (1 - 1e-12):
            raise FrozenKernelError(f"t={t:g} is below t_min={self.t_min:g}")
        u = np.atleast_1d(np.asarray(u, dtype=float))
        w = np.atleast_1d(np.asarray(w, dtype=float))
        if np.any(np.abs(u) > self.u_max * (1 + 1e-9)):
            raise FrozenKernelError("displacement beyond the aliasing-free window u_max")
        xi_cut = self.cutoff(t, w)
        nodes, weights = gauss_legendre_panels(xi_cut, self.panel)
        self.stats.n_nodes[float(t)] = int(nodes.size)
        out = {k: np.zeros((u.size, w.size)) for k in kinds}
        A = self.coef.amplitude_matrix(w) if self.coef.n_components else None
        Av = self.coef.amplitude_matrix(np.atleast_1d(v)) if (v is not None and A is not None) else None
        chi_all = self.symbols(nodes)
        for s in range(0, nodes.size, self.chunk):
            xi = nodes[s:s + self.chunk]
            wt = weights[s:s + self.chunk]
            chi = chi_all[:, s:s + self.chunk]
            psi = self.coef.base * chi[0][:, None] + (chi[1:].T @ A if A is not None else 0.0)
            E = np.exp(t * psi) * wt[:, None]
            phase = np.outer(u, xi)
            C, S = np.cos(phase), np.sin(phase)
            for k in kinds:
                if k == "p":
                    M = E
                elif k == "du":
                    M = -1j * xi[:, None] * E
                elif k == "dt":
                    M = psi * E
                elif k == "op":
                    if v is None:
                        raise ValueError("kind 'op' needs base points v")
                    pv = self.coef.base * chi[0][:, None] + (chi[1:].T @ Av if Av is not None else 0.0)
                    M = pv * E
                elif k.startswith("c"):
                    M = chi[int(k[1:])][:, None] * E
                else:
                    raise ValueError(f"unknown multiplier {k!r}")
                # .real/.imag are strided views; BLAS needs contiguous operands
                out[k] += C @ np.ascontiguousarray(M.real) + S @ np.ascontiguousarray(M.imag)
        for k in kinds:
            out[k] /= math.pi
        if clip and "p" in out:
            neg = out["p"] < 0
            if np.any(neg):
                self.stats.clip_max = max(self.stats.clip_max, float(-out["p"][neg].min()))
                out["p"][neg] = 0.0
        return out

    # persistence ------------------------------------------------------------------
    def dump(self, path) -> None:
        """Versioned binary record of the symbol table and inversion parameters."""
        np.savez_compressed(path, version=CACHE_VERSION, nodes=self.symbols.nodes,
                            values=self.symbols.values, t_min=self.t_min, u_max=self.u_max,
                            refine=self.refine, symbol_step=self.symbol_step * 2 ** self.refine,
                            panel=self.panel)

    @classmethod
    def load(cls, path, coef: Coefficient, profile: UnimodalProfile, sf: ScaleFunctions | None = None):
        """Rebuild a cache from :meth:`dump`; the stored table must match ``coef``/``profile``."""
        with np.load(path) as z:
            if int(z["version"]) != CACHE_VERSION:
                raise FrozenKernelError(f"cache version {int(z['version'])} != {CACHE_VERSION}")
            nodes, values = z["nodes"], z["values"]
            obj = cls.__new__(cls)
            obj.__init__(coef, profile, sf, float(z["t_min"]), float(z["u_max"]),
                         symbol_step=float(z["symbol_step"]), refine=int(z["refine"]),
                         symbols=ComponentSymbols(coef, profile, nodes))
        if obj.symbols.values.shape != values.shape or not np.allclose(obj.symbols.values, values,
                                                                        rtol=1e-9, atol=1e-12):
            raise FrozenKernelError("stored symbol table does not match the coefficient/profile")
        return obj


# point evaluations -------------------------------------------------------------------

def frozen_density(cache: FrozenKernelCache, w: float, t: float, u):
    """``p_w(t, u)``; negatives from quadrature ringing are clipped and recorded."""
    out = cache.invert(t, u, [w], ("p",))["p"][:, 0]
    return float(out[0]) if np.ndim(u) == 0 else out


def frozen_gradient(cache: FrozenKernelCache, w: float, t: float, u):
    """``d/du p_w(t, u)`` (multiplier ``-i xi``).

    The kernel gradient in its first space variable is
    ``grad_x p^{K_w}(t, x, y) = -frozen_gradient(cache, w, t, y - x)``.
    """
    out = cache.invert(t, u, [w], ("du",))["du"][:, 0]
    return float(out[0]) if np.ndim(u) == 0 else out


def apply_frozen_operator(cache: FrozenKernelCache, v: float, w: float, t: float, u):
    """``(L^{K_v} p^{K_w})`` at displacement ``u`` (multiplier ``psi_v e^{t psi_w}``).

    For ``v == w`` this is the time derivative of ``p_w``.
    """
    out = cache.invert(t, u, [w], ("op",), v=[v])["op"][:, 0]
    return float(out[0]) if np.ndim(u) == 0 else out


def delta_direct(cache: FrozenKernelCache, w: float, t: float, x: float, y: float, z, r: float = 1.0):
    """``p^{K_w}(t, x+z, y) - p^{K_w}(t, x, y) - 1_{|z|<r} z grad_x p^{K_w}(t, x, y)``."""
    z = np.atleast_1d(np.asarray(z, dtype=float))
    u0 = y - x
    res = cache.invert(t, np.concatenate([[u0], u0 - z]), [w], ("p", "du"), clip=False)
    p0, dp0 = res["p"][0, 0], res["du"][0, 0]
    grad_x = -dp0
    out = res["p"][1:, 0] - p0 - np.where(np.abs(z) < r, z * grad_x, 0.0)
    return float(out[0]) if out.size == 1 else out


def frozen_window_mass(cache: FrozenKernelCache, w: float, t: float, U: float) -> float:
    """``int_{-U}^{U} p^{K_w}(t, u) du`` computed spectrally, ``(2/pi) int_0^inf Re m sin(xi U) / xi``.

    Independent of any space grid; with ``U -> inf`` it tends to ``e^{t psi_w(0)} = 1``.
    """
    if not 0 < U <= cache.u_max * (1 + 1e-9):
        raise FrozenKernelError("U must lie in (0, u_max]")
    nodes, weights = gauss_legendre_panels(cache.cutoff(t, [w]), cache.panel)
    psi = cache.psi([w], nodes)[:, 0]
    m = np.exp(t * psi).real
    return float(2.0 / math.pi * np.sum(weights * m * np.sin(nodes * U) / nodes))


def frozen_interval_mass(cache: FrozenKernelCache, t: float, w, a, b, chunk: int = 64) -> np.ndarray:
    """``int_{a_n}^{b_n} p^{K_{w_n}}(t, u) du`` for each ``n``, computed spectrally.

    Uses ``(1/pi) int_0^inf [Re m (sin xi b - sin xi a) - Im m (cos xi b - cos xi a)] / xi dxi``.
    """
    w = np.atleast_1d(np.asarray(w, dtype=float))
    a = np.broadcast_to(np.asarray(a, dtype=float), w.shape)
    b = np.broadcast_to(np.asarray(b, dtype=float), w.shape)
    if np.any(np.abs(a) > cache.u_max * (1 + 1e-9)) or np.any(np.abs(b) > cache.u_max * (1 + 1e-9)):
        raise FrozenKernelError("interval endpoints exceed u_max")
    nodes, weights = gauss_legendre_panels(cache.cutoff(t, w), cache.panel)
    out = np.empty(w.size)
    for s0 in range(0, w.size, chunk):
        sl = slice(s0, s0 + chunk)
        m = np.exp(t * cache.psi(w[sl], nodes))  # (nodes, chunk)
        xb, xa = np.outer(nodes, b[sl]), np.outer(nodes, a[sl])
        integrand = (m.real * (np.sin(xb) - np.sin(xa)) - m.imag * (np.cos(xb) - np.cos(xa))) / nodes[:, None]
        out[sl] = weights @ integrand / math.pi
    return out
