"""Run configuration: schema, parsing, serialization and provenance hash.

A run is described by one YAML file (JSON is accepted too, being a YAML
subset). Keys::

    name: str
    profile:      family, d, params {alpha, ...}, gamma0 (jump comparability),
                  j_skew, integrability_cut (radius where nu is cut to zero)
    coefficient:  family, params {...}, beta (Hölder exponent in x),
                  kappa0 / kappa1 (lower / upper bounds of kappa),
                  kappa2 (Hölder constant), kappa3 / kappa4 (drift bound and
                  drift Hölder constant)
    grid:         t_min, T, window (half width L), n_x, symbol_step
                  (frequency table step), panel_periods (quadrature panels
                  per period of the largest displacement), frequency_refine
    refinement:   enabled, T (horizon of the doubled grid)
    series:       max_terms, tol, residual_tol
    verifier:     every field of ``VerifierSettings``; ``checks`` maps a
                  check id to true/false
    output_dir:   str (overridden by $LEVIKERNEL_OUT, then by --out)
    seed:         int (sample-point selection only)

``dump(parse(text))`` is a fixed point: serialization is canonical (sorted
keys, floats in ``repr`` form), and the config hash is the SHA-256 of that
canonical JSON.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import yaml

from .verifier import CHECK_IDS, VerifierSettings

__all__ = [
    "ConfigError", "ProfileSpec", "CoefficientSpec", "GridSpec", "RefinementSpec", "SeriesSpec",
    "RunConfig", "load_config", "parse_config", "bundled_config", "bundled_names", "OUTPUT_ENV",
]

OUTPUT_ENV = "LEVIKERNEL_OUT"
_BUNDLED = Path(__file__).parent / "configs"


class ConfigError(ValueError):
    pass


@dataclass
class ProfileSpec:
    family: str = "stable"
    d: int = 1
    params: dict = field(default_factory=lambda: {"alpha": 1.0})
    gamma0: float | None = None
    j_skew: float = 0.0
    integrability_cut: float | None = None


@dataclass
class CoefficientSpec:
    family: str = "constant"
    params: dict = field(default_factory=dict)
    beta: float = 0.5
    kappa0: float | None = None
    kappa1: float | None = None
    kappa2: float | None = None
    kappa3: float = 0.0
    kappa4: float = 0.0


@dataclass
class GridSpec:
    t_min: float = 0.05
    T: float = 2.0
    window: float = 16.0
    n_x: int = 321
    symbol_step: float = 0.1
    panel_periods: int = 2
    frequency_refine: int = 0


@dataclass
class RefinementSpec:
    enabled: bool = True
    T: float | None = None


@dataclass
class SeriesSpec:
    max_terms: int = 6
    tol: float = 1e-3
    residual_tol: float = 5e-2


def _build(cls, data, where: str):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected a mapping")
    names = {f.name for f in fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
    try:
        return cls(**data)
    except TypeError as exc:
        raise ConfigError(f"{where}: {exc}") from None


def _settings(data) -> VerifierSettings:
    data = dict(data or {})
    checks = data.pop("checks", {}) or {}
    if "seed" in data:
        raise ConfigError("verifier.seed is not a config key; use the top-level seed")
    unknown = set(checks) - set(CHECK_IDS)
    if unknown:
        raise ConfigError(f"verifier.checks: unknown check ids {sorted(unknown)}")
    s = _build(VerifierSettings, data, "verifier")
    for name in ("check_times", "bound_times", "ck_times", "eps_ladder"):
        setattr(s, name, tuple(float(v) for v in getattr(s, name)))
    s.enabled = {k: bool(v) for k, v in checks.items()}
    return s


@dataclass
class RunConfig:
    name: str = "run"
    profile: ProfileSpec = field(default_factory=ProfileSpec)
    coefficient: CoefficientSpec = field(default_factory=CoefficientSpec)
    grid: GridSpec = field(default_factory=GridSpec)
    refinement: RefinementSpec = field(default_factory=RefinementSpec)
    series: SeriesSpec = field(default_factory=SeriesSpec)
    verifier: VerifierSettings = field(default_factory=VerifierSettings)
    output_dir: str = "levikernel-out"
    seed: int = 0

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        g = self.grid
        if not g.t_min > 0:
            raise ConfigError("grid.t_min must be positive")
        if not g.T > g.t_min:
            raise ConfigError("grid.T must exceed grid.t_min")
        steps = g.T / g.t_min
        if abs(steps - round(steps)) > 1e-9 * steps:
            raise ConfigError("grid.T must be an integer multiple of grid.t_min")
        if not g.window > 0:
            raise ConfigError("grid.window (half width of the symmetric window) must be positive")
        if g.n_x < 5 or g.n_x % 2 == 0:
            raise ConfigError("grid.n_x must be odd and >= 5 (the window is symmetric about 0)")
        if self.refinement.T is not None and not 0 < self.refinement.T <= g.T:
            raise ConfigError("refinement.T must lie in (0, grid.T]")
        s = self.series
        if s.max_terms < 1 or not s.tol > 0 or not s.residual_tol > 0:
            raise ConfigError("series controls must be positive")
        v = self.verifier
        for name in ("conservation_tol", "ck_tol", "pde_tol", "initial_tol", "max_principle_tol",
                     "negativity_budget", "frozen_mass_tol", "residual_tol", "drift_tol", "extrapolated_share_tol"):
            if not getattr(v, name) > 0:
                raise ConfigError(f"verifier.{name} must be positive")
        if any(not 0 < e <= 1 for e in v.eps_ladder):
            raise ConfigError("verifier.eps_ladder values must lie in (0, 1]")

    # serialization -------------------------------------------------------------------
    def to_dict(self) -> dict:
        d = asdict(self)
        v = d["verifier"]
        v["checks"] = dict(sorted(v.pop("enabled").items()))
        v.pop("seed")
        for name in ("check_times", "bound_times", "ck_times", "eps_ladder"):
            v[name] = list(v[name])
        return d

    def canonical_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def dump(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=True, default_flow_style=False)

    @property
    def hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()[:16]

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        if not isinstance(data, dict):
            raise ConfigError("config root must be a mapping")
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown top-level keys {sorted(unknown)}")
        return cls(
            name=str(data.get("name", "run")),
            profile=_build(ProfileSpec, data.get("profile"), "profile"),
            coefficient=_build(CoefficientSpec, data.get("coefficient"), "coefficient"),
            grid=_build(GridSpec, data.get("grid"), "grid"),
            refinement=_build(RefinementSpec, data.get("refinement"), "refinement"),
            series=_build(SeriesSpec, data.get("series"), "series"),
            verifier=_settings(data.get("verifier")),
            output_dir=str(data.get("output_dir", "levikernel-out")),
            seed=int(data.get("seed", 0)),
        )

    def resolved_output(self, override: str | None = None) -> Path:
        if override:
            return Path(override)
        return Path(os.environ.get(OUTPUT_ENV) or self.output_dir)

    # model objects ---------------------------------------------------------------------
    def make_profile(self):
        from .levy_profile import make_profile
        p = self.profile
        return make_profile(p.family, d=p.d, gamma0=p.gamma0, j_skew=p.j_skew,
                            integrability_cut=p.integrability_cut, **p.params)

    def make_coefficient(self, profile=None):
        from .coefficient import make_coefficient
        c = self.coefficient
        return make_coefficient(c.family, beta=c.beta, kappa0=c.kappa0, kappa1=c.kappa1, kappa2=c.kappa2,
                                kappa3=c.kappa3, kappa4=c.kappa4, profile=profile, **c.params)

    def make_grid(self, refined: bool = False):
        from .parametrix import Grid
        g = self.grid
        base = Grid(float(g.window), int(g.n_x), float(g.t_min), int(round(g.T / g.t_min)))
        return base.refined(self.refinement.T) if refined else base


def parse_config(text: str) -> RunConfig:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config parse error: {exc}") from None
    return RunConfig.from_dict(data or {})


def load_config(path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        candidate = _BUNDLED / f"{path.name}.yaml" if path.suffix == "" else _BUNDLED / path.name
        if candidate.exists():
            path = candidate
        else:
            raise ConfigError(f"config file not found: {path}")
    return parse_config(path.read_text())


def bundled_names() -> list[str]:
    return sorted(p.stem for p in _BUNDLED.glob("*.yaml"))


def bundled_config(name: str) -> RunConfig:
    path = _BUNDLED / f"{name}.yaml"
    if not path.exists():
        raise ConfigError(f"no bundled config {name!r}; available: {bundled_names()}")
    return parse_config(path.read_text())
