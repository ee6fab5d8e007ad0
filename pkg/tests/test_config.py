import pytest
import yaml

from levikernel.config import (
    OUTPUT_ENV, ConfigError, RunConfig, bundled_config, bundled_names, load_config, parse_config,
)
from levikernel.verifier import VerifierSettings

BUNDLED = ["cauchy_const", "drift_violating", "nonsym"]


def test_bundled_names():
    assert bundled_names() == BUNDLED


@pytest.mark.parametrize("name", BUNDLED)
def test_dump_is_a_fixed_point(name):
    cfg = bundled_config(name)
    text = cfg.dump()
    again = parse_config(text)
    assert again.dump() == text
    assert again.hash == cfg.hash and len(cfg.hash) == 16


@pytest.mark.parametrize("name", BUNDLED)
def test_bundled_configs_build_model_objects(name):
    cfg = load_config(name)
    prof = cfg.make_profile()
    coef = cfg.make_coefficient(prof)
    g, r = cfg.make_grid(), cfg.make_grid(refined=True)
    assert g.T == pytest.approx(cfg.grid.T) and r.tau == pytest.approx(g.tau / 2)
    assert coef.kappa0 > 0 and prof.d == 1


def test_hash_tracks_content():
    a = bundled_config("nonsym")
    b = parse_config(a.dump().replace("n_x: 321", "n_x: 161"))
    assert a.hash != b.hash
    c = parse_config(a.dump())
    c.seed = 3
    assert c.hash != a.hash


def test_defaults_and_checks_toggle():
    cfg = parse_config("verifier:\n  checks:\n    pde-residual: false\n  check_times: [0.5, 1]\n")
    assert isinstance(cfg.verifier, VerifierSettings)
    assert cfg.verifier.check_times == (0.5, 1.0)
    assert not cfg.verifier.is_enabled("pde-residual") and cfg.verifier.is_enabled("conservation")
    assert parse_config(cfg.dump()).verifier.enabled == {"pde-residual": False}


@pytest.mark.parametrize("text, match", [
    ("grid: [1, 2", "parse error"),
    ("bogus: 1", "unknown top-level"),
    ("grid:\n  nx: 5", "unknown keys"),
    ("grid:\n  n_x: 100", "odd"),
    ("grid:\n  t_min: 0.03\n  T: 1.0", "integer multiple"),
    ("grid:\n  t_min: -1", "positive"),
    ("refinement:\n  T: 10", "refinement.T"),
    ("series:\n  max_terms: 0", "positive"),
    ("verifier:\n  seed: 3", "top-level seed"),
    ("verifier:\n  checks:\n    nope: true", "unknown check"),
    ("verifier:\n  ck_tol: 0", "ck_tol"),
    ("verifier:\n  eps_ladder: [0.1, 2]", "eps_ladder"),
    ("- 1\n- 2", "mapping"),
])
def test_invalid_configs(text, match):
    with pytest.raises(ConfigError, match=match):
        parse_config(text)


def test_missing_files(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_config(tmp_path / "none.yaml")
    with pytest.raises(ConfigError, match="available"):
        bundled_config("none")


def test_json_configs_are_accepted(tmp_path):
    p = tmp_path / "c.json"
    p.write_text('{"name": "j", "grid": {"n_x": 81, "window": 8.0}}')
    assert load_config(p).grid.n_x == 81


def test_output_precedence(monkeypatch):
    cfg = RunConfig(output_dir="from-config")
    monkeypatch.delenv(OUTPUT_ENV, raising=False)
    assert str(cfg.resolved_output()) == "from-config"
    monkeypatch.setenv(OUTPUT_ENV, "from-env")
    assert str(cfg.resolved_output()) == "from-env"
    assert str(cfg.resolved_output("from-flag")) == "from-flag"


def test_dump_is_plain_yaml():
    d = yaml.safe_load(bundled_config("cauchy_const").dump())
    assert set(d) == {"name", "profile", "coefficient", "grid", "refinement", "series", "verifier",
                      "output_dir", "seed"}
