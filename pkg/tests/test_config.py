import json

import pytest

from hybridlab.config import ConfigError, PlanCfg, RunConfig, load_config


def _write(tmp_path, obj, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(obj) if not isinstance(obj, str) else obj)
    return p


def test_defaults_without_file():
    cfg = load_config(None, "solve", env={})
    assert cfg.n == 65 and cfg.seed == 0


def test_seed_override(tmp_path):
    p = _write(tmp_path, {"seed": 3})
    assert load_config(p, "solve", env={}).seed == 3
    assert load_config(p, "solve", env={"HIF_SEED": "11"}).seed == 11
    with pytest.raises(ConfigError):
        load_config(p, "solve", env={"HIF_SEED": "abc"})


@pytest.mark.parametrize("obj", [
    {"unknown": 1},
    {"n": 2},
    {"solve": {"problem": {"case": {"name": "exp"}, "q_value": 1.0}}},
    {"solve": {"problem": {"q": "q.hif", "q_value": 1.0}}},
    {"reconstruct": {"method": "qu"}},
    {"reconstruct": {"method": "two_loads", "data": "u1.hif"}},
    {"stability": {"kind": "hs1", "ratio": 1.5}},
    {"stability": {"kind": "zzz"}},
    {"synth": {"noise": {"model": "additive-gaussian", "level": -1}}},
])
def test_invalid_configs(tmp_path, obj):
    with pytest.raises(ConfigError):
        load_config(_write(tmp_path, obj), "solve", env={})


def test_malformed_json(tmp_path):
    with pytest.raises(ConfigError):
        load_config(_write(tmp_path, "{not json"), "solve", env={})
    with pytest.raises(ConfigError):
        load_config(_write(tmp_path, "[1, 2]"), "solve", env={})


def test_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_config(tmp_path / "absent.json", "solve", env={})


def test_command_mismatch(tmp_path):
    with pytest.raises(ConfigError):
        load_config(_write(tmp_path, {"command": "eig"}), "solve", env={})


def test_class_alias_and_build():
    plan = PlanCfg.model_validate({"kind": "hs1", "class": {"q_minus": 1.0, "q_plus": 2.0}})
    assert plan.cls.build().q_bounds() == (-2.0, -1.0)


def test_builders_roundtrip():
    cfg = RunConfig.model_validate({"reconstruct": {"method": "qu", "data": "H.hif",
                                                    "recon": {"tol": 1e-9},
                                                    "noise": {"model": "relative-gaussian", "level": 0.01}}})
    assert cfg.reconstruct.recon.build().tol == 1e-9
    assert cfg.reconstruct.noise.build().model == "relative-gaussian"
