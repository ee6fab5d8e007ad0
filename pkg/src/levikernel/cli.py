"""Command-line pipeline: profile -> build -> verify -> report.

Exit codes: 0 success, 1 a check failed, 2 config error, 3 regime rejected,
4 divergent or unconverged series, 5 a required earlier stage is missing.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig, load_config

log = logging.getLogger("levikernel")

EXIT_OK, EXIT_CHECKS, EXIT_CONFIG, EXIT_REGIME, EXIT_SERIES, EXIT_STAGE = 0, 1, 2, 3, 4, 5

BUILD_FILE = "build.npz"
REFINED_FILE = "build_refined.npz"
REPORT_FILE = "report.json"


class StageError(RuntimeError):
    """An artifact of an earlier stage is missing or stale."""

    def __init__(self, stage: str, detail: str):
        super().__init__(f"missing stage '{stage}': {detail}")
        self.stage = stage


def _write_json(path: Path, obj) -> None:
    from .verifier import _round
    path.write_text(json.dumps(_round(obj), sort_keys=True, indent=2) + "\n")


def _context(cfg: RunConfig):
    from .levy_profile import ScaleFunctions
    profile = cfg.make_profile()
    sf = ScaleFunctions(profile)
    coef = cfg.make_coefficient(profile)
    return profile, sf, coef


# stages -------------------------------------------------------------------------------

def stage_profile(cfg: RunConfig, out: Path) -> int:
    from .coefficient import estimate_scaling_exponents
    from .levy_profile import certify_scaling, nu_homogeneity_constant
    profile, sf, _ = _context(cfg)
    r = np.geomspace(1e-3, 1e3, 25)
    t = np.array(sorted({cfg.grid.t_min, 2 * cfg.grid.t_min, 0.25, 0.5, 1.0, 2.0, cfg.grid.T}))
    x = np.array([0.0, 0.1, 0.5, 1.0, 2.0, 4.0, 8.0])
    a_lo, a_hi = estimate_scaling_exponents(sf)
    alpha_h = min(math.floor(a_lo * 1000) / 1000, 1.0)
    lower = certify_scaling(sf, alpha_h, "lower")
    data = {
        "config_hash": cfg.hash,
        "profile": cfg.to_dict()["profile"],
        "r": r, "h": sf.h(r), "K": sf.K(r),
        "t": t, "h_inverse_of_1_over_t": sf.scale(t),
        "rho_x": x, "rho": {f"{tt:g}": np.asarray(sf.rho(float(tt), x)) for tt in t},
        "scaling_index_range": [a_lo, a_hi],
        "lower_scaling_certificate": lower.to_dict(),
        "nu_homogeneity_constant": nu_homogeneity_constant(profile, min(a_hi, 1.999)),
    }
    _write_json(out / "profile.json", data)
    log.info("h(1) = %.12g", float(sf.h(1.0)))
    return EXIT_OK


def stage_regime(cfg: RunConfig, out: Path, force: bool) -> int:
    from .coefficient import classify_regime
    profile, sf, coef = _context(cfg)
    rep = classify_regime(coef, profile, sf, t_min=cfg.grid.t_min)
    _write_json(out / "regime.json", rep.to_dict() | {"config_hash": cfg.hash, "forced": force})
    if rep.regime == "rejected":
        log.error("regime rejected: failing %s", rep.failing)
        return EXIT_OK if force else EXIT_REGIME
    log.info("regime %s", rep.regime)
    return EXIT_OK


def stage_build(cfg: RunConfig, out: Path) -> int:
    from .parametrix import SeriesDivergenceError, build_parametrix
    profile, sf, coef = _context(cfg)
    g = cfg.grid
    series = {"config_hash": cfg.hash}
    grids = [("coarse", cfg.make_grid(), BUILD_FILE)]
    if cfg.refinement.enabled:
        grids.append(("refined", cfg.make_grid(refined=True), REFINED_FILE))
    status = EXIT_OK
    for label, grid, fname in grids:
        log.info("building %s grid: n_x=%d tau=%g T=%g", label, grid.n_x, grid.tau, grid.T)
        try:
            b = build_parametrix(coef, profile, sf, grid, cfg.series.max_terms, cfg.series.tol,
                                 cfg.series.residual_tol, symbol_step=g.symbol_step,
                                 panel_periods=g.panel_periods, refine=g.frequency_refine * (2 if label == "refined" else 1))
        except SeriesDivergenceError as exc:
            series[label] = {"error": str(exc)}
            _write_json(out / "series.json", series)
            log.error("%s", exc)
            return EXIT_SERIES
        b.meta = {"config_hash": cfg.hash, "label": label}
        series[label] = b.diagnostics.to_dict() | {
            "grid": grid.to_dict(), "phi_extrapolated_share": b.phi_share, "clip_max": b.clip_max}
        b.save(out / fname)
        if label == "coarse":
            times = [t for t in cfg.verifier.check_times if _on_lattice(grid, t)]
            b.p_kappa.meta = dict(b.meta)
            b.p_kappa.save(out / "p_kappa.npz")
            b.p_kappa.to_csv(out / "p_kappa.csv", times=times, stride=max(1, (grid.n_x - 1) // 80))
        if not b.diagnostics.converged:
            log.error("%s series residual %.3g exceeds %.3g", label, b.diagnostics.residual, cfg.series.residual_tol)
            status = EXIT_SERIES
    _write_json(out / "series.json", series)
    return status


def _on_lattice(grid, t: float) -> bool:
    try:
        grid.t_index(t)
        return True
    except Exception:
        return False


def _load_build(path: Path, cfg: RunConfig):
    from .parametrix import ParametrixBuild
    if not path.exists():
        raise StageError("build", f"{path} not found; run `levikernel build` first")
    b = ParametrixBuild.load(path)
    if b.meta.get("config_hash") != cfg.hash:
        raise StageError("build", f"{path} was built from a different config; rerun `levikernel build`")
    return b


def stage_verify(cfg: RunConfig, out: Path, echo: bool = True) -> int:
    from .verifier import ratio_field_rows, verify
    build = _load_build(out / BUILD_FILE, cfg)
    refined = _load_build(out / REFINED_FILE, cfg) if cfg.refinement.enabled else None
    profile, sf, coef = _context(cfg)
    settings = dataclasses.replace(cfg.verifier, seed=cfg.seed)
    report = verify(build, coef, profile, sf, settings, refined)
    report.meta["config_hash"] = cfg.hash
    report.meta["name"] = cfg.name
    (out / REPORT_FILE).write_text(report.to_json())
    (out / "report.txt").write_text(report.table())
    times = [t for t in settings.check_times if _on_lattice(build.grid, t)]
    rows = ratio_field_rows(build, sf, times, settings.box_fraction, stride=max(1, (build.grid.n_x - 1) // 160))
    np.savetxt(out / "ratio_field.csv", rows, delimiter=",", fmt="%.10g", comments="",
               header="t,x,y,p_kappa,rho,ratio")
    if echo:
        sys.stdout.write(report.table())
    return EXIT_OK if report.passed else EXIT_CHECKS


def stage_report(out: Path) -> int:
    from .verifier import render_table
    path = out / REPORT_FILE
    if not path.exists():
        raise StageError("verify", f"{path} not found; run `levikernel verify` first")
    report = json.loads(path.read_text())
    text = render_table(report)
    (out / "report.txt").write_text(text)
    rows = ["id,status,value,tolerance,refined_value,trend"]
    for c in report["checks"]:
        rows.append(",".join(str("" if c[k] is None else c[k])
                             for k in ("id", "status", "value", "tolerance", "refined_value", "trend")))
    (out / "checks.csv").write_text("\n".join(rows) + "\n")
    sys.stdout.write(text)
    return EXIT_OK if report["passed"] else EXIT_CHECKS


# entry point -----------------------------------------------------------------------------

def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML/JSON run config (path or bundled name)")
    common.add_argument("--out", help="output directory (overrides the config and $LEVIKERNEL_OUT)")
    common.add_argument("--threads", type=int, default=None, help="cap BLAS worker threads")
    common.add_argument("--force", action="store_true", help="continue even if the regime is rejected")
    common.add_argument("--check-only", action="store_true", help="run the regime classifier and stop")
    common.add_argument("-v", "--verbose", action="store_true")
    p = argparse.ArgumentParser(prog="levikernel", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("profile", parents=[common], help="scale-function tables and scaling certificates")
    sub.add_parser("build", parents=[common], help="regime check, frozen kernels and the parametrix build")
    sub.add_parser("verify", parents=[common], help="property suite against a saved build")
    sub.add_parser("report", parents=[common], help="render tables/CSV from a saved report")
    sub.add_parser("run", parents=[common], help="profile, build, verify and report")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.command == "report" and args.config is None:
            if args.out is None:
                raise ConfigError("report needs --out or --config")
            return stage_report(Path(args.out))
        if args.config is None:
            raise ConfigError("--config is required")
        cfg = load_config(args.config)
        out = cfg.resolved_output(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "config.yaml").write_text(cfg.dump())
        from threadpoolctl import threadpool_limits
        with threadpool_limits(limits=args.threads):
            return _dispatch(args, cfg, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_STAGE
    except ValueError as exc:  # model construction errors from invalid parameters
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def _dispatch(args, cfg: RunConfig, out: Path) -> int:
    cmd = args.command
    if cmd == "profile":
        return stage_profile(cfg, out)
    if cmd in ("build", "run") or args.check_only:
        code = stage_regime(cfg, out, args.force)
        if code != EXIT_OK or args.check_only:
            return code
    if cmd == "build":
        return stage_build(cfg, out)
    if cmd == "verify":
        return stage_verify(cfg, out)
    if cmd == "report":
        return stage_report(out)
    # run
    for step in (lambda: stage_profile(cfg, out), lambda: stage_build(cfg, out),
                 lambda: stage_verify(cfg, out, echo=False)):
        code = step()
        if code not in (EXIT_OK, EXIT_CHECKS):
            return code
    return stage_report(out)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
