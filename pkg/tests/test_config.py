import json

import pytest

from wdaep.config import DEFAULTS, RunConfig, parse_dims, parse_list
from wdaep.errors import ConfigError


def test_defaults_and_nested_overrides():
    cfg = RunConfig({"recon": {"lambda": 0.5}, "wavelet.name": "db4"}, command="reconstruct")
    assert cfg["recon.lambda"] == 0.5 and cfg["wavelet.name"] == "db4"
    assert cfg["recon.iterations"] == DEFAULTS["recon.iterations"]


def test_unknown_keys_are_rejected():
    with pytest.raises(ConfigError, match="recon.lamda"):
        RunConfig({"recon.lamda": 1})
    with pytest.raises(ConfigError):
        RunConfig()["nope.key"]


@pytest.mark.parametrize("key,value", [("recon.iterations", 2.5), ("recon.lambda", "big"), ("wavelet.name", 3)])
def test_type_checks(key, value):
    with pytest.raises(ConfigError, match=key):
        RunConfig({key: value})


def test_coercion():
    cfg = RunConfig({"recon.iterations": 30.0, "mask.r": 5, "recon.sigma_eta": 25, "mask.dims": [32, 48]})
    assert cfg["recon.iterations"] == 30 and isinstance(cfg["recon.iterations"], int)
    assert cfg["mask.r"] == 5.0 and isinstance(cfg["mask.r"], float)
    assert cfg["recon.sigma_eta"] == 25.0
    assert cfg["mask.dims"] == "32x48"


def test_require_names_the_key():
    with pytest.raises(ConfigError, match="io.out"):
        RunConfig().require("io.out")


def test_file_round_trip(tmp_path):
    cfg = RunConfig({"recon.lambda": 0.01, "io.out": "/x/y.bin"}, command="reconstruct")
    cfg.write(tmp_path / "c.json")
    doc = json.loads((tmp_path / "c.json").read_text())
    assert next(iter(doc)) == "command" and doc["recon"]["lambda"] == 0.01
    assert RunConfig.from_file(tmp_path / "c.json", "reconstruct") == cfg
    with pytest.raises(ConfigError, match="reconstruct"):
        RunConfig.from_file(tmp_path / "c.json", "train")


def test_bad_files(tmp_path):
    (tmp_path / "a.json").write_text("{not json")
    (tmp_path / "b.json").write_text("[1, 2]")
    for name in ("a.json", "b.json"):
        with pytest.raises(ConfigError):
            RunConfig.from_file(tmp_path / name)


def test_parse_helpers():
    assert parse_dims("64x48") == (64, 48)
    assert parse_dims(32) == (32, 32)
    assert parse_dims([8, 9]) == (8, 9)
    for bad in ("64by64", "0x4", "1x2x3", None):
        with pytest.raises(ConfigError):
            parse_dims(bad)
    assert parse_list("0.1, 1,") == ["0.1", "1"]
    assert parse_list([1, 2]) == [1, 2]
    assert parse_list(5) == [5]
