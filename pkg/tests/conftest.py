"""Shared builds. Heavy fixtures are session scoped and built from the bundled configs."""

from __future__ import annotations

import dataclasses

import pytest

from levikernel.config import bundled_config
from levikernel.levy_profile import ScaleFunctions
from levikernel.parametrix import build_parametrix
from levikernel.verifier import verify

ACCEPTANCE = pytest.StashKey[dict]()
N_CRITERIA = 10


class Run:
    """A bundled configuration built on its coarse and refined grids and verified."""

    def __init__(self, name: str):
        self.cfg = cfg = bundled_config(name)
        self.profile = cfg.make_profile()
        self.sf = ScaleFunctions(self.profile)
        self.coef = cfg.make_coefficient(self.profile)
        g = cfg.grid
        kw = dict(max_terms=cfg.series.max_terms, tol=cfg.series.tol, residual_tol=cfg.series.residual_tol,
                  symbol_step=g.symbol_step, panel_periods=g.panel_periods)
        self.build = build_parametrix(self.coef, self.profile, self.sf, cfg.make_grid(),
                                      refine=g.frequency_refine, **kw)
        self.refined = build_parametrix(self.coef, self.profile, self.sf, cfg.make_grid(refined=True),
                                        refine=2 * g.frequency_refine, **kw)
        self.settings = dataclasses.replace(cfg.verifier, seed=cfg.seed)
        self.report = verify(self.build, self.coef, self.profile, self.sf, self.settings, self.refined)


@pytest.fixture(scope="session")
def cauchy_run() -> Run:
    return Run("cauchy_const")


@pytest.fixture(scope="session")
def nonsym_run() -> Run:
    return Run("nonsym")


@pytest.fixture
def acceptance(request):
    """``acceptance(k, ok, detail)`` records the outcome of criterion ``k`` for the summary."""
    table = request.config.stash.setdefault(ACCEPTANCE, {})

    def record(k: int, ok: bool, detail: str) -> bool:
        table[k] = (bool(ok), detail)
        return bool(ok)

    return record


def pytest_terminal_summary(terminalreporter):
    table = terminalreporter.config.stash.get(ACCEPTANCE, None)
    if not table:
        return
    terminalreporter.section("acceptance criteria")
    for k in range(1, N_CRITERIA + 1):
        ok, detail = table.get(k, (False, "not evaluated (test errored or was deselected)"))
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
