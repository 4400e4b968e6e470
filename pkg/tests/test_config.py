import json

import pytest

from mnemo.config import ENV_VAR, Config, from_mapping, load_config
from mnemo.errors import ConfigError


def test_defaults():
    c = Config()
    assert (c.dimension, c.horizon, c.top_k, c.lam, c.strategy) == (256, 5, 3, 0.5, "top_k")
    w = c.weights()
    assert (w.w_f, w.w_a, w.w_t, w.w_p, w.tau_iou) == (0.1, 0.9, 0.5, 0.5, 0.5)
    s = c.schedule()
    assert (s.eps_low, s.eps_init, s.eps_end, c.beta) == (0.2, 0.4, 0.2, 0.04)


def test_unknown_keys_rejected(tmp_path):
    with pytest.raises(ConfigError):
        from_mapping({"lambda": 0.3})
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"top_k": 5, "colour": "red"}))
    with pytest.raises(ConfigError):
        load_config(p)


@pytest.mark.parametrize("bad", [{"lam": 2}, {"w_f": 0.5}, {"strategy": "best"}, {"horizon": 0}, {"top_k": "3"},
                                 {"eps_init": 0.1}, {"provider": "remote"}, {"jitter": 0.2}, {"seed": True}])
def test_validation(bad):
    with pytest.raises(ConfigError):
        from_mapping(bad)


def test_file_env_and_overrides(tmp_path, monkeypatch):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"top_k": 5, "lam": 0.25}))
    monkeypatch.setenv(ENV_VAR, str(p))
    c = load_config()
    assert (c.top_k, c.lam) == (5, 0.25)
    c = load_config(overrides={"top_k": 7})
    assert (c.top_k, c.lam) == (7, 0.25)
    monkeypatch.delenv(ENV_VAR)
    assert load_config().top_k == 3


def test_bad_file(tmp_path):
    p = tmp_path / "c.json"
    p.write_text("{nope")
    with pytest.raises(ConfigError):
        load_config(p)
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.json")
