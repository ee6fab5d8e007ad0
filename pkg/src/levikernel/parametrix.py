"""Levi parametrix construction of the heat kernel on a space-time lattice (d = 1).

All fields live on a uniform lattice ``t_k = k tau`` (``k = 1..M``, ``tau = t_min``)
and a symmetric space window with ``N`` nodes; the value array of a field is
indexed ``[k, i, j]`` for ``(t_k, x_i, y_j)``.

Space-time convolutions

    (A # B)(t, x, y) = int_0^t int A(t - s, x, z) B(s, z, y) dz ds

use the trapezoid rule in ``z`` and, in ``s``, the trapezoid rule on interior
lattice nodes plus endpoint rules on ``(0, tau)`` and ``(t - tau, t)`` where
one factor would be needed below ``t_min``. There the integrand is modelled by
a power law ``s^g`` whose exponent is fitted (one per time slice) on the two
nearest lattice nodes and bounded below by the error envelope; the mass produced
this way is reported as the extrapolated share.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import interpolate

from .coefficient import Coefficient
from .frozen_kernel import FrozenKernelCache, frozen_interval_mass, _tables, _GL_W, _GL_X
from .levy_profile import UnimodalProfile

__all__ = [
    "Grid", "KernelField", "SeriesDiagnostics", "ParametrixError", "SeriesDivergenceError",
    "FrozenFields", "Envelope", "ConvolutionInfo", "frozen_fields", "q0_field", "q0_eval", "volterra", "picard_step", "sum_series",
    "phi_field", "phi_eval", "assemble_p_kappa", "apply_truncated_operator", "time_derivative",
    "ParametrixBuild", "build_parametrix", "FIELD_VERSION",
]

FIELD_VERSION = 1


class ParametrixError(RuntimeError):
    pass


class SeriesDivergenceError(ParametrixError):
    pass


@dataclass(frozen=True)
class Grid:
    """Space window ``[-L, L]`` with ``n_x`` nodes and time lattice ``tau, 2 tau, .., M tau``."""

    L: float
    n_x: int
    tau: float
    n_t: int

    def __post_init__(self):
        if self.tau <= 0 or self.n_t < 3 or self.n_x < 5 or self.L <= 0:
            raise ParametrixError("grid needs tau > 0, n_t >= 3, n_x >= 5 and L > 0")

    @property
    def x(self) -> np.ndarray:
        return np.linspace(-self.L, self.L, self.n_x)

    @property
    def hx(self) -> float:
        return 2 * self.L / (self.n_x - 1)

    @property
    def t(self) -> np.ndarray:
        return self.tau * np.arange(1, self.n_t + 1)

    @property
    def T(self) -> float:
        return self.tau * self.n_t

    @property
    def u(self) -> np.ndarray:
        """All displacements ``y - x`` between nodes, ``m hx`` for ``|m| < n_x``."""
        return self.hx * np.arange(-(self.n_x - 1), self.n_x)

    @property
    def u_max(self) -> float:
        return 2 * self.L

    @property
    def z_weights(self) -> np.ndarray:
        w = np.full(self.n_x, self.hx)
        w[0] = w[-1] = 0.5 * self.hx
        return w

    def t_index(self, t: float) -> int:
        k = int(round(t / self.tau)) - 1
        if k < 0 or k >= self.n_t or abs((k + 1) * self.tau - t) > 1e-9 * max(1.0, t):
            raise ParametrixError(f"t={t:g} is not a lattice time")
        return k

    def x_index(self, x: float) -> int:
        i = int(round((x + self.L) / self.hx))
        if i < 0 or i >= self.n_x or abs(self.x[i] - x) > 1e-9:
            raise ParametrixError(f"x={x:g} is not a grid node")
        return i

    def refined(self, T: float | None = None) -> "Grid":
        """Space step and time step halved (window unchanged), optionally shorter horizon."""
        T = self.T if T is None else T
        tau = self.tau / 2
        return Grid(self.L, 2 * self.n_x - 1, tau, int(round(T / tau)))

    def to_dict(self) -> dict:
        return {"L": self.L, "n_x": self.n_x, "tau": self.tau, "n_t": self.n_t}


def _scatter(D: np.ndarray, n: int) -> np.ndarray:
    """``F[i, j] = D[(j - i) + n - 1, j]``: displacement table -> (x, y) field."""
    i = np.arange(n)[:, None]
    j = np.arange(n)[None, :]
    return D[j - i + n - 1, j]


@dataclass
class KernelField:
    """Values of a kernel on the lattice with metadata.

    ``values[k, i, j]`` is the value at ``(t_k, x_i, y_j)``. ``kind`` is one of
    ``q0``, ``q_partial``, ``q``, ``phi``, ``p_frozen``, ``p_kappa``, ``dt_p_frozen``.
    """

    grid: Grid
    values: np.ndarray
    kind: str
    meta: dict = field(default_factory=dict)
    envelope: "Envelope | None" = None  # sub-t_min model used by convolutions; not serialized

    def __post_init__(self):
        g = self.grid
        if self.values.shape != (g.n_t, g.n_x, g.n_x):
            raise ParametrixError(f"field shape {self.values.shape} does not match the grid")

    @property
    def t_grid(self):
        return self.grid.t

    @property
    def x_grid(self):
        return self.grid.x

    @property
    def y_grid(self):
        return self.grid.x

    def at(self, t: float) -> np.ndarray:
        """``(x, y)`` slice at lattice time ``t``."""
        return self.values[self.grid.t_index(t)]

    def __call__(self, t: float, x, y):
        """Interpolated value: monotone cubic (PCHIP) in ``t``, bilinear in ``(x, y)``."""
        g = self.grid
        if not g.t[0] - 1e-12 <= t <= g.t[-1] + 1e-12:
            raise ParametrixError("t outside the lattice; no extrapolation")
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if np.any(np.abs(x) > g.L + 1e-12) or np.any(np.abs(y) > g.L + 1e-12):
            raise ParametrixError("point outside the space window")
        k = int(np.clip(np.searchsorted(g.t, t) - 1, 0, g.n_t - 2))
        lo, hi = max(k - 1, 0), min(k + 3, g.n_t)
        vals = self.values[lo:hi]
        slab = interpolate.PchipInterpolator(g.t[lo:hi], vals, axis=0)(t)
        fi = (x + g.L) / g.hx
        fj = (y + g.L) / g.hx
        i0 = np.clip(np.floor(fi).astype(int), 0, g.n_x - 2)
        j0 = np.clip(np.floor(fj).astype(int), 0, g.n_x - 2)
        a, b = fi - i0, fj - j0
        out = ((1 - a) * (1 - b) * slab[i0, j0] + a * (1 - b) * slab[i0 + 1, j0]
               + (1 - a) * b * slab[i0, j0 + 1] + a * b * slab[i0 + 1, j0 + 1])
        return float(out) if out.ndim == 0 else out

    # export -------------------------------------------------------------------------
    def save(self, path) -> None:
        np.savez_compressed(path, version=FIELD_VERSION, kind=self.kind, values=self.values,
                            grid=json.dumps(self.grid.to_dict()), meta=json.dumps(self.meta, sort_keys=True))

    @classmethod
    def load(cls, path) -> "KernelField":
        with np.load(path) as z:
            if int(z["version"]) != FIELD_VERSION:
                raise ParametrixError(f"field version {int(z['version'])} != {FIELD_VERSION}")
            grid = Grid(**json.loads(str(z["grid"])))
            return cls(grid, z["values"], str(z["kind"]), json.loads(str(z["meta"])))

    def to_csv(self, path, times=None, stride: int = 1) -> None:
        """CSV with header ``t,x,y,value`` at the given lattice times."""
        g = self.grid
        times = g.t if times is None else times
        idx = np.arange(0, g.n_x, stride)
        X, Y = np.meshgrid(g.x[idx], g.x[idx], indexing="ij")
        with open(path, "w") as fh:
            fh.write("t,x,y,value\n")
            for t in times:
                v = self.at(t)[np.ix_(idx, idx)]
                rows = np.column_stack([np.full(X.size, t), X.ravel(), Y.ravel(), v.ravel()])
                np.savetxt(fh, rows, delimiter=",", fmt="%.12g")


# frozen fields ---------------------------------------------------------------------

@dataclass
class FrozenFields:
    """Lattice fields of frozen kernels with the base point at the second argument."""

    P: KernelField       # p^{K_y}(t, x, y)
    dtP: KernelField     # d/dt p^{K_y}(t, x, y)
    G: list[np.ndarray]  # per component: inverse transform of chi_c e^{t psi_y} at u = y - x
    clip_max: float
    # mass of p^{K_x}(t, x, .) outside the window, computed spectrally (independent of the space grid)
    window_tail: np.ndarray | None = None
    # [k, j]: |grid mass - spectral mass| of p^{K_y}(t_k, ., y_j) on the window
    frozen_mass_error: np.ndarray | None = None


def frozen_fields(cache: FrozenKernelCache, grid: Grid, components: bool = True) -> FrozenFields:
    """Invert every frozen kernel needed by the construction, one time slice at a time."""
    if cache.t_min > grid.tau * (1 + 1e-12):
        raise ParametrixError("frozen cache t_min exceeds the lattice step")
    if cache.u_max < grid.u_max * (1 - 1e-12):
        raise ParametrixError("frozen cache u_max is smaller than the window diameter")
    n, m = grid.n_x, grid.n_t
    nc = cache.coef.n_components if components else 0
    kinds = ("p", "dt") + tuple(f"c{c + 1}" for c in range(nc))
    P = np.empty((m, n, n))
    dP = np.empty((m, n, n))
    G = [np.empty((m, n, n)) for _ in range(nc)]
    tail = np.empty((m, n))
    mass_err = np.empty((m, n))
    u, w = grid.u, grid.x
    const = cache.coef.is_constant
    for k, t in enumerate(grid.t):
        if const:  # one frozen kernel serves every base point
            res = {key: np.broadcast_to(v, (u.size, n))
                   for key, v in cache.invert(float(t), u, w[:1], kinds).items()}
        else:
            res = cache.invert(float(t), u, w, kinds)
        P[k] = _scatter(res["p"], n)
        dP[k] = _scatter(res["dt"], n)
        for c in range(nc):
            G[c][k] = _scatter(res[f"c{c + 1}"], n)
        tail[k] = 1.0 - frozen_interval_mass(cache, float(t), w, -grid.L - w, grid.L - w)
        col_mass = grid.z_weights @ P[k]
        mass_err[k] = np.abs(col_mass - frozen_interval_mass(cache, float(t), w, w - grid.L, w + grid.L))
    meta = {"clip_max": cache.stats.clip_max}
    return FrozenFields(KernelField(grid, P, "p_frozen", meta), KernelField(grid, dP, "dt_p_frozen", meta),
                        G, cache.stats.clip_max, tail, mass_err)


def q0_field(coef: Coefficient, grid: Grid, ff: FrozenFields, envelope: "Envelope | None" = None) -> KernelField:
    """``q0(t, x, y) = sum_c (a_c(x) - a_c(y)) G_c(t, x, y)``."""
    vals = np.zeros((grid.n_t, grid.n_x, grid.n_x))
    if coef.n_components:
        A = coef.amplitude_matrix(grid.x)
        for c, Gc in enumerate(ff.G):
            diff = A[c][:, None] - A[c][None, :]
            vals += diff[None, :, :] * Gc
    return KernelField(grid, vals, "q0", {"order": 0}, envelope)


def q0_eval(cache: FrozenKernelCache, t: float, x: float, y: float) -> float:
    """Pointwise ``(L^{K_x} - L^{K_y}) p^{K_y}(t, ., y)`` at ``x`` (one inversion)."""
    r = cache.invert(t, [y - x], [y], ("op", "dt"), v=[x])
    return float(r["op"][0, 0] - r["dt"][0, 0])


# time convolution ------------------------------------------------------------------

@dataclass(frozen=True)
class Envelope:
    """Error-envelope power laws on ``[t_min, 2 t_min]`` used below ``t_min``.

    With ``lam`` the local exponent of ``h^{-1}(1/t)`` between ``tau`` and
    ``2 tau`` and ``beta`` the Hölder exponent, a space-integrated integrand
    whose singular factor is of order ``k`` behaves like ``s^{-1 + k beta lam}``;
    ``rho_ratio[m]`` is ``tau^-1 rho_tau(u_m) / ((2 tau)^-1 rho_{2 tau}(u_m))``.
    """

    tau: float
    beta: float
    lam: float
    rho_ratio: np.ndarray

    @classmethod
    def from_scale(cls, sf, grid: Grid, beta: float) -> "Envelope":
        tau = grid.tau
        s1, s2 = float(sf.scale(tau)), float(sf.scale(2 * tau))
        u = grid.u
        r1 = np.asarray(sf.rho(tau, u)) / tau
        r2 = np.asarray(sf.rho(2 * tau, u)) / (2 * tau)
        return cls(tau, float(beta), math.log2(s2 / s1), r1 / r2)

    @classmethod
    def default(cls, grid: Grid, beta: float = 0.5) -> "Envelope":
        """Envelope of the 1-stable scale ``h^{-1}(1/t) = 4t``."""
        u = grid.u
        tau = grid.tau

        def rho(t):
            return np.minimum(1 / (4 * t), 2 * t / np.maximum(u * u, 1e-300))

        return cls(tau, float(beta), 1.0, (rho(tau) / tau) / (rho(2 * tau) / (2 * tau)))

    def exponent(self, k: int) -> float:
        return min(-1.0 + k * self.beta * self.lam, 1.0)

    def out_ratio(self, n: int, grid: Grid, with_t: bool = False) -> np.ndarray:
        """Field ratio ``C(tau) / C(2 tau)`` for an output of order ``n``."""
        r = self.rho_ratio * 2.0 ** (-n * self.beta * self.lam) * (0.5 if with_t else 1.0)
        return _scatter(r[:, None] * np.ones((1, grid.n_x)), grid.n_x)


@dataclass
class ConvolutionInfo:
    extrapolated_share: np.ndarray  # per lattice time: |sub-t_min part| / |integral|, Frobenius norms


def _fit_exponent(F_near: np.ndarray, F_far: np.ndarray, g_min: float) -> float:
    """Exponent of ``s^g`` matching the L1 norms at distance ``tau`` and ``2 tau`` from the end.

    One exponent for the whole slice keeps the rule stable where single entries
    change sign; it is confined to ``[g_min, 1]`` (``g_min`` from the envelope).
    """
    n1, n2 = float(np.abs(F_near).sum()), float(np.abs(F_far).sum())
    if n1 <= 0 or n2 <= 0:
        return g_min
    return float(np.clip(math.log2(n2 / n1), g_min, 1.0))


def volterra(A: np.ndarray, B: np.ndarray, grid: Grid, g_left: float, g_right: float | None,
             out_ratio: np.ndarray, info: ConvolutionInfo | None = None) -> np.ndarray:
    """``C(t_j) = int_0^{t_j} A(t_j - s) W B(s) ds`` on the lattice.

    Interior: trapezoid over lattice nodes. ``(0, tau)``: ``F(s) = F(tau)(s/tau)^g``
    with ``g`` fitted on ``[tau, 2 tau]`` but not below the envelope exponent
    ``g_left``. Last step ``(t - tau, t)``: the same rule with ``g_right`` when
    ``A`` is singular at ``0``; ``g_right=None`` marks ``A`` as an approximate
    identity (``A(0+) W B = B``) and uses the trapezoid with that limit. At
    ``t = 2 tau`` the exponents fitted at ``3 tau`` are reused; ``C(tau)`` is
    ``C(2 tau) * out_ratio``.
    """
    if A.shape != B.shape:
        raise ParametrixError("grid mismatch between convolution factors")
    M = A.shape[0]
    if M < 3:
        raise ParametrixError("the time lattice needs at least 3 nodes")
    tau = grid.tau
    WB = grid.z_weights[None, :, None] * B  # z-weights folded into B once
    C = np.zeros_like(A)
    share = np.zeros(M)
    fitted = {}
    for j in list(range(2, M)) + [1]:  # t = (j + 1) tau; interior nodes s = tau .. j tau
        F = [A[j - k - 1] @ WB[k] for k in range(j)]  # F[k] at s = (k + 1) tau
        if j >= 2:
            gl = _fit_exponent(F[0], F[1], g_left)
            gr = None if g_right is None else _fit_exponent(F[-1], F[-2], g_right)
            if j == 2:
                fitted = {"left": gl, "right": gr}
            body = tau * (0.5 * (F[0] + F[-1]) + sum(F[1:-1]))
        else:
            gl, gr = fitted["left"], fitted["right"]
            body = 0.0
        ext = tau / (gl + 1.0) * F[0]
        if gr is not None:
            ext = ext + tau / (gr + 1.0) * F[-1]
            C[j] = body + ext
        else:
            C[j] = body + ext + 0.5 * tau * (F[-1] + B[j])
        nc = np.linalg.norm(C[j])
        share[j] = np.linalg.norm(ext) / nc if nc > 0 else 0.0
    C[0] = C[1] * out_ratio
    share[0] = 1.0 if np.any(C[0]) else 0.0
    if info is not None:
        info.extrapolated_share = share
    return C


def _envelope(f: KernelField) -> Envelope:
    return f.envelope if f.envelope is not None else Envelope.default(f.grid)


def picard_step(q_prev: KernelField, q0: KernelField, info: ConvolutionInfo | None = None) -> KernelField:
    """``q_n(t, x, y) = int_0^t int q0(t - s, x, z) q_{n-1}(s, z, y) dz ds``.

    ``q_prev.meta["order"]`` (default 0) is ``n - 1``; the result has order ``n``.
    """
    if q_prev.grid != q0.grid:
        raise ParametrixError("grid mismatch")
    g = q0.grid
    n = int(q_prev.meta.get("order", 0)) + 1
    env = _envelope(q0)
    meta = {"order": n}
    if not np.any(q_prev.values) or not np.any(q0.values):
        return KernelField(g, np.zeros_like(q0.values), "q_partial", meta, env)
    vals = volterra(q0.values, q_prev.values, g, env.exponent(n), env.exponent(1),
                    env.out_ratio(n, g), info)
    return KernelField(g, vals, "q_partial", meta, env)


@dataclass
class SeriesDiagnostics:
    norms: list[float]
    n_terms: int
    residual: float
    ratios: list[float]
    extrapolated_share: list[list[float]] = field(default_factory=list)
    converged: bool = True

    def to_dict(self) -> dict:
        return {"norms": self.norms, "n_terms": self.n_terms, "residual": self.residual,
                "ratios": self.ratios, "converged": self.converged,
                "extrapolated_share_max_by_term": [max(s) if s else 0.0 for s in self.extrapolated_share]}


def _sup(v: np.ndarray) -> float:
    return float(np.max(np.abs(v))) if v.size else 0.0


def sum_series(q0: KernelField, max_terms: int = 6, tol: float = 1e-3,
               residual_tol: float = 5e-2) -> tuple[KernelField, SeriesDiagnostics]:
    """``q = sum_{n <= N} q_n`` with the integral-equation residual ``q - q0 - q0 # q``.

    The discrete convolution is linear, so the residual equals the first
    omitted term ``q_{N+1}``; it is computed (one extra convolution) and
    reported relative to ``sup |q|``.
    """
    if max_terms < 1:
        raise ValueError("max_terms must be >= 1")
    n0 = _sup(q0.values)
    if n0 == 0.0:
        return (KernelField(q0.grid, np.zeros_like(q0.values), "q", {"order": 0, "n_terms": 1}, q0.envelope),
                SeriesDiagnostics([0.0], 1, 0.0, [], [], True))
    norms = [n0]
    shares: list[list[float]] = []
    total = q0.values.copy()
    term = q0
    n_terms = 1
    rising = 0
    while True:
        info = ConvolutionInfo(np.zeros(0))
        nxt = picard_step(term, q0, info)
        norms.append(_sup(nxt.values))
        shares.append(info.extrapolated_share.tolist())
        rising = rising + 1 if norms[-1] >= norms[-2] else 0
        if rising >= 3:
            raise SeriesDivergenceError(f"series terms non-decreasing for 3 steps: {norms}")
        if n_terms >= max_terms or norms[-2] <= tol * _sup(total):
            break  # nxt is the first omitted term
        total += nxt.values
        term = nxt
        n_terms += 1
    q_sup = _sup(total)
    residual = norms[-1] / q_sup if q_sup > 0 else 0.0
    ratios = [norms[i + 1] / norms[i] for i in range(len(norms) - 1) if norms[i] > 0]
    diag = SeriesDiagnostics(norms, n_terms, residual, ratios, shares, residual <= residual_tol)
    return KernelField(q0.grid, total, "q", {"order": 0, "n_terms": n_terms}, q0.envelope), diag


def phi_field(P: KernelField, q: KernelField, info: ConvolutionInfo | None = None) -> KernelField:
    """``phi_y(t, x) = int_0^t int p^{K_z}(t - s, x, z) q(s, z, y) dz ds``.

    The frozen kernel's base point is the integration variable ``z`` -- exactly
    the second argument of the ``P`` field.
    """
    if not np.any(q.values):
        return KernelField(P.grid, np.zeros_like(P.values), "phi")
    env = _envelope(q)
    vals = volterra(P.values, q.values, P.grid, env.exponent(1), None,
                    env.out_ratio(1, P.grid, with_t=True), info)
    return KernelField(P.grid, vals, "phi")


def phi_eval(phi: KernelField, t: float, x: float, y: float) -> float:
    return float(phi(t, x, y))


def assemble_p_kappa(P: KernelField, phi: KernelField) -> KernelField:
    """``p^kappa(t, x, y) = p^{K_y}(t, x, y) + phi_y(t, x)``."""
    if P.grid != phi.grid:
        raise ParametrixError("grid mismatch")
    return KernelField(P.grid, P.values + phi.values, "p_kappa")


# truncated operator ------------------------------------------------------------------

def _side_integrals(coef: Coefficient, profile: UnimodalProfile, x: float, a: float, side: int,
                    r: float = 1.0) -> tuple[float, float]:
    """``int_{z>a} kappa(x, side z) J(side z) dz`` and ``int_{a<z<r} z kappa J`` (``0 < a``, ``r <= 1``)."""
    tab = _tables(profile)
    skew = 1.0 + side * profile.j_skew
    amps = coef.amplitude_matrix([x])[:, 0]
    bps = {abs(b) for c in coef.components for b in c.breakpoints if b != 0} | {1.0, r}
    edges = [a] + sorted(b for b in bps if b > a) + [math.inf]
    mass = mom = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        probe = 0.5 * (lo + hi) if math.isfinite(hi) else lo + 1.0
        k = coef.base + sum(am * float(c(np.array(side * probe))) for am, c in zip(amps, coef.components))
        mass += k * float(tab.T(np.array(lo)) - tab.T(np.array(hi)))
        if hi <= r:
            mom += k * float(tab.F1(np.array(hi)) - tab.F1(np.array(lo)))
    return skew * mass, skew * mom


def apply_truncated_operator(field: KernelField, coef: Coefficient, profile: UnimodalProfile,
                             eps: float, t: float, x, y: float, compensation: float = 1.0):
    """``L^{kappa, eps}`` applied in ``x`` to ``f = field(t, ., y)`` at grid nodes ``x``.

    ``int_{|z|>eps} (f(x+z) - f(x) - 1_{|z|<r} z f'(x)) kappa(x, z) J(z) dz`` with
    ``r = compensation``. ``f`` is the cubic spline through the grid column and
    ``f'`` its derivative; beyond the window ``f = 0`` (the neglected mass is
    recorded in the returned ``outside`` array).
    """
    g = field.grid
    if eps < g.hx / 10:
        raise ParametrixError(f"eps={eps:g} is below the interpolation resolution hx/10={g.hx / 10:g}")
    if not 0 < eps <= 1 or not 0 < compensation <= 1:
        raise ParametrixError("eps and the compensation radius must lie in (0, 1]")
    col = field.at(t)[:, g.x_index(y)]
    spl = interpolate.CubicSpline(g.x, col)
    dspl = spl.derivative()
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.zeros(xs.size)
    outside = np.zeros(xs.size)
    bps = {abs(b) for c in coef.components for b in c.breakpoints if b != 0} | {compensation, 1.0}
    for n, x0 in enumerate(xs):
        i0 = g.x_index(x0)
        f0, df0 = float(col[i0]), float(dspl(x0))
        total = 0.0
        for side in (+1, -1):
            reach = (g.L - side * x0)  # distance to the window edge on this side
            if reach <= eps:
                edges = []
            else:
                geo = [eps]
                while geo[-1] * 2 < g.hx:
                    geo.append(geo[-1] * 2)
                knots = g.hx * np.arange(1, int(round(reach / g.hx)) + 1)
                pts = sorted(set(geo) | {k for k in knots if k > eps} | {b for b in bps if eps < b < reach})
                edges = np.array(pts)
            if len(edges) > 1:
                lo, hi = edges[:-1], edges[1:]
                half, mid = 0.5 * (hi - lo), 0.5 * (hi + lo)
                z = (mid[:, None] + half[:, None] * _GL_X).ravel()
                wz = (half[:, None] * _GL_W).ravel()
                zz = side * z
                comp = np.where(z < compensation, zz * df0, 0.0)
                integrand = (spl(x0 + zz) - f0 - comp) * coef.kappa(x0, zz) * profile.J(zz)
                total += float(wz @ integrand)
            # beyond the window f(x + z) = 0
            mass, mom = _side_integrals(coef, profile, x0, max(reach, eps), side, compensation)
            total += -f0 * mass - side * df0 * mom
            outside[n] += abs(f0) * mass
        out[n] = total
    if np.ndim(x) == 0:
        return float(out[0]), float(outside[0])
    return out, outside


# time derivative -----------------------------------------------------------------------

def time_derivative(field: KernelField) -> np.ndarray:
    """Fourth-order finite differences in ``t`` (one-sided five-point stencils at the ends)."""
    v = field.values
    M = v.shape[0]
    if M < 5:
        raise ParametrixError("the time lattice needs at least 5 nodes for the time derivative")
    h = field.grid.tau
    d = np.empty_like(v)
    d[2:-2] = (v[:-4] - 8 * v[1:-3] + 8 * v[3:-1] - v[4:]) / (12 * h)
    d[0] = (-25 * v[0] + 48 * v[1] - 36 * v[2] + 16 * v[3] - 3 * v[4]) / (12 * h)
    d[1] = (-3 * v[0] - 10 * v[1] + 18 * v[2] - 6 * v[3] + v[4]) / (12 * h)
    d[-1] = (25 * v[-1] - 48 * v[-2] + 36 * v[-3] - 16 * v[-4] + 3 * v[-5]) / (12 * h)
    d[-2] = (3 * v[-1] + 10 * v[-2] - 18 * v[-3] + 6 * v[-4] - v[-5]) / (12 * h)
    return d


# full construction -------------------------------------------------------------------------

_BUILD_FIELDS = ("P", "dtP", "q0", "q", "phi", "p_kappa", "dt_p_kappa")


@dataclass
class ParametrixBuild:
    """Every lattice field of one construction plus its diagnostics.

    ``dt_p_kappa`` is the exact frozen time derivative plus finite differences of
    ``phi``; ``window_tail[k, i]`` is the frozen-at-``x_i`` mass outside the window;
    ``phi_share[k]`` the extrapolated share of the ``phi`` time integral.
    """

    grid: Grid
    P: KernelField
    dtP: KernelField
    q0: KernelField
    q: KernelField
    phi: KernelField
    p_kappa: KernelField
    dt_p_kappa: KernelField
    window_tail: np.ndarray
    diagnostics: SeriesDiagnostics
    phi_share: np.ndarray
    frozen_mass_error: np.ndarray
    clip_max: float = 0.0
    meta: dict = field(default_factory=dict)

    def save(self, path) -> None:
        arrays = {name: getattr(self, name).values for name in _BUILD_FIELDS}
        head = {"version": FIELD_VERSION, "grid": self.grid.to_dict(), "diagnostics": self.diagnostics.to_dict(),
                "extrapolated_share": self.diagnostics.extrapolated_share,
                "clip_max": self.clip_max, "meta": self.meta}
        np.savez(path, header=json.dumps(head, sort_keys=True), window_tail=self.window_tail,
                 phi_share=self.phi_share, frozen_mass_error=self.frozen_mass_error, **arrays)

    @classmethod
    def load(cls, path) -> "ParametrixBuild":
        with np.load(path) as z:
            head = json.loads(str(z["header"]))
            if head["version"] != FIELD_VERSION:
                raise ParametrixError(f"build version {head['version']} != {FIELD_VERSION}")
            grid = Grid(**head["grid"])
            kinds = {"P": "p_frozen", "dtP": "dt_p_frozen", "q0": "q0", "q": "q", "phi": "phi",
                     "p_kappa": "p_kappa", "dt_p_kappa": "dt_p_kappa"}
            fields = {name: KernelField(grid, z[name], kinds[name]) for name in _BUILD_FIELDS}
            d = head["diagnostics"]
            diag = SeriesDiagnostics(d["norms"], d["n_terms"], d["residual"], d["ratios"],
                                     head["extrapolated_share"], d["converged"])
            return cls(grid, window_tail=z["window_tail"], diagnostics=diag, phi_share=z["phi_share"],
                       frozen_mass_error=z["frozen_mass_error"],
                       clip_max=head["clip_max"], meta=head["meta"], **fields)


def build_parametrix(coef: Coefficient, profile: UnimodalProfile, sf, grid: Grid, max_terms: int = 6,
                     tol: float = 1e-3, residual_tol: float = 5e-2, cache: FrozenKernelCache | None = None,
                     symbol_step: float = 0.1, panel_periods: int = 2, refine: int = 0) -> ParametrixBuild:
    """Frozen kernels -> ``q0`` -> series ``q`` -> ``phi`` -> ``p^kappa`` on ``grid``."""
    if cache is None:
        cache = FrozenKernelCache(coef, profile, sf, grid.tau, grid.u_max, symbol_step=symbol_step,
                                  panel_periods=panel_periods, refine=refine)
    ff = frozen_fields(cache, grid)
    env = Envelope.from_scale(sf, grid, coef.beta)
    q0 = q0_field(coef, grid, ff, env)
    ff.G.clear()
    q, diag = sum_series(q0, max_terms, tol, residual_tol)
    info = ConvolutionInfo(np.zeros(grid.n_t))
    phi = phi_field(ff.P, q, info)
    pk = assemble_p_kappa(ff.P, phi)
    dpk = KernelField(grid, ff.dtP.values + time_derivative(phi), "dt_p_kappa")
    return ParametrixBuild(grid, ff.P, ff.dtP, q0, q, phi, pk, dpk, ff.window_tail, diag,
                           np.asarray(info.extrapolated_share, dtype=float), ff.frozen_mass_error, ff.clip_max)
