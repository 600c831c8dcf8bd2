"""Run-configuration defaults, merging, and validation."""

import json
from fractions import Fraction

import pytest

from sap_engine.config import (
    ConfigError,
    RunConfig,
    build_config,
    load_config_file,
    parse_weights,
)
from sap_engine.fitness import FitnessWeights
from sap_engine.scheduler import Endpoint


def test_defaults():
    cfg = RunConfig()
    assert (cfg.mu, cfg.lam, cfg.tau, cfg.generations) == (2, 2, 2, 2)
    assert cfg.weights == FitnessWeights()
    assert cfg.dispatch_mode == "one-call"
    assert cfg.decision == "elite"
    assert cfg.route_cache is True
    assert cfg.seed == 0
    assert cfg.max_objects == 32


def test_validate_rejects_bad_values():
    for kwargs in [
        {"mu": 0},
        {"lam": 0},
        {"tau": 0},
        {"generations": -1},
        {"max_objects": 0},
        {"dispatch_mode": "zigzag"},
        {"decision": "vote"},
    ]:
        with pytest.raises(ConfigError):
            build_config(**kwargs)


def test_parse_weights():
    w = parse_weights("1, 1/2, 2, 0")
    assert w == FitnessWeights(Fraction(1), Fraction(1, 2), Fraction(2), Fraction(0))
    with pytest.raises(ConfigError):
        parse_weights("1,2,3")
    with pytest.raises(ConfigError):
        parse_weights("1,2,3,frog")


def test_flags_beat_file_beat_defaults(tmp_path):
    file_values = {"mu": 5, "tau": 3, "lambda": 4}
    cfg = build_config(file_values, mu=7)
    assert cfg.mu == 7  # flag wins
    assert cfg.tau == 3  # file wins
    assert cfg.lam == 4  # file alias
    assert cfg.generations == 2  # default


def test_file_type_checking():
    with pytest.raises(ConfigError, match="mu"):
        build_config({"mu": "two"})
    with pytest.raises(ConfigError, match="route_cache"):
        build_config({"route_cache": 1})
    with pytest.raises(ConfigError, match="mu"):
        build_config({"mu": True})
    # float fields accept ints
    assert build_config({"backoff_base": 1}).backoff_base == 1


def test_file_weights_and_endpoints():
    cfg = build_config(
        {
            "weights": {"c": "1/2", "d": 1, "e": 2, "u": "3"},
            "endpoints": [{"url": "http://a", "model": "m", "max_concurrency": 2}],
        }
    )
    assert cfg.weights.w_c == Fraction(1, 2)
    assert cfg.weights.w_u == Fraction(3)
    assert cfg.endpoints == [Endpoint(url="http://a", model="m", max_concurrency=2)]

    cfg = build_config({"weights": "1,1,1,0"})
    assert cfg.weights.w_u == 0
    with pytest.raises(ConfigError, match="weights"):
        build_config({"weights": 5})
    with pytest.raises(ConfigError, match="endpoints"):
        build_config({"endpoints": "http://a"})


def test_load_config_file(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"mu": 3}))
    assert load_config_file(str(path)) == {"mu": 3}
    with pytest.raises(ConfigError):
        load_config_file(str(tmp_path / "missing.json"))
    bad = tmp_path / "bad.json"
    bad.write_text("{nope")
    with pytest.raises(ConfigError):
        load_config_file(str(bad))
    arr = tmp_path / "arr.json"
    arr.write_text("[1]")
    with pytest.raises(ConfigError):
        load_config_file(str(arr))


def test_as_dict_uses_lambda_key():
    doc = RunConfig(lam=3).as_dict()
    assert doc["lambda"] == 3
    assert "lam" not in doc
    assert doc["weights"] == {"c": "1", "d": "1", "e": "1", "u": "1"}
