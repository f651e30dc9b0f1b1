import json

import pytest

from clickvos.errors import ConfigError
from clickvos.presets import (
    delete_preset,
    list_presets,
    load_preset,
    resolve_config,
    save_preset,
    split_config,
)


def _write(path, data):
    path.write_text(json.dumps(data), encoding="utf-8")
    return path


def test_shipped_presets():
    assert list_presets() == ["full", "toy"]
    assert load_preset("toy")["lr"] == 3e-4
    assert load_preset("full")["channels"] == 1024


def test_resolution_order_is_preset_file_then_flags(tmp_path):
    config = _write(tmp_path / "run.json", {"preset": "toy", "channels": 16, "lr": 1e-3})
    model, train = resolve_config(config, {"lr": 1e-2, "steps": None, "objmem": "first_only"})
    assert model.channels == 16
    assert model.n_heads == 4
    assert model.objmem == "first_only"
    assert train.lr == 1e-2
    assert train.batch_size == 4
    assert train.steps == 1000


def test_defaults_without_file_or_preset():
    model, train = resolve_config()
    assert model.channels == 32
    assert train.bootstrap_ratio == 0.4


@pytest.mark.parametrize("content", [
    {"chanels": 16},
    {"preset": "nope"},
    {"channels": 15},
    [1, 2],
])
def test_bad_config_files(tmp_path, content):
    with pytest.raises(ConfigError):
        resolve_config(_write(tmp_path / "bad.json", content))


def test_missing_or_malformed_config_file(tmp_path):
    with pytest.raises(ConfigError):
        resolve_config(tmp_path / "absent.json")
    broken = tmp_path / "broken.json"
    broken.write_text("{", encoding="utf-8")
    with pytest.raises(ConfigError):
        resolve_config(broken)


def test_split_config_routes_keys():
    model, train = split_config({"channels": 8, "lr": 0.1, "preset": "toy"})
    assert model == {"channels": 8}
    assert train == {"lr": 0.1}
    with pytest.raises(ConfigError):
        split_config({"epochs": 2})


def test_save_and_delete_presets(tmp_path):
    store = tmp_path / "presets.json"
    assert list_presets(store) == []
    assert save_preset("small", {"channels": "16", "steps": 20, "colour": "red"}, store)
    assert load_preset("small", store) == {"channels": 16, "steps": 20}
    with pytest.raises(ConfigError):
        save_preset("  ", {"channels": 8}, store)

    run = _write(tmp_path / "run.json", {"preset": "small"})
    model, train = resolve_config(run, presets_path=store)
    assert (model.channels, train.steps) == (16, 20)

    assert delete_preset("small", store)
    assert not delete_preset("small", store)
    assert list_presets(store) == []
