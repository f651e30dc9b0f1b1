"""Named configuration presets stored as one JSON object of flat config dicts."""

import json
import logging
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Tuple

from ..errors import ConfigError
from ..model.config import ModelConfig, coerce_fields
from ..training.trainer import TrainConfig


log = logging.getLogger(__name__)

PRESETS_FILE = Path(__file__).parent / "presets.json"
PRESET_KEY = "preset"


def _load_presets(path: Path = PRESETS_FILE) -> Dict[str, Dict[str, Any]]:
    if not path.is_file():
        return {}
    try:
        with path.open("r", encoding="utf-8") as f:
            data = json.load(f)
        return data if isinstance(data, dict) else {}
    except Exception as e:
        log.error(f"[clickvos.presets] load error: {e}")
        return {}


def _save_presets(presets: Mapping[str, Any], path: Path = PRESETS_FILE) -> bool:
    try:
        with path.open("w", encoding="utf-8") as f:
            json.dump(presets, f, ensure_ascii=False, indent=2)
        return True
    except Exception as e:
        log.error(f"[clickvos.presets] save error: {e}")
        return False


def _normalize_entry(body: Mapping[str, Any]) -> Dict[str, Any]:
    """Keep the ModelConfig/TrainConfig keys of ``body``, coerced to their field types."""
    entry = {}
    entry.update(coerce_fields(ModelConfig, body, strict=False))
    entry.update(coerce_fields(TrainConfig, body, strict=False))
    dropped = sorted(set(body) - set(entry) - {PRESET_KEY})
    if dropped:
        log.warning(f"[clickvos.presets] ignoring unknown keys {dropped}")
    return entry


def list_presets(path: Path = PRESETS_FILE):
    return sorted(_load_presets(path))


def load_preset(name: str, path: Path = PRESETS_FILE) -> Dict[str, Any]:
    presets = _load_presets(path)
    if name not in presets:
        raise ConfigError(f"[clickvos.presets] unknown preset '{name}'; available: {sorted(presets)}")
    return _normalize_entry(presets[name])


def save_preset(name: str, values: Mapping[str, Any], path: Path = PRESETS_FILE) -> bool:
    name = (name or "").strip()
    if not name:
        raise ConfigError("[clickvos.presets] empty preset name")
    presets = _load_presets(path)
    presets[name] = _normalize_entry(values)
    return _save_presets(presets, path)


def delete_preset(name: str, path: Path = PRESETS_FILE) -> bool:
    presets = _load_presets(path)
    if name not in presets:
        return False
    del presets[name]
    return _save_presets(presets, path)


def split_config(data: Mapping[str, Any]) -> Tuple[Dict[str, Any], Dict[str, Any]]:
    """Flat mapping -> (ModelConfig fields, TrainConfig fields); unknown keys are an error."""
    model_keys = set(ModelConfig.__dataclass_fields__)
    train_keys = set(TrainConfig.__dataclass_fields__)
    unknown = sorted(set(data) - model_keys - train_keys - {PRESET_KEY})
    if unknown:
        raise ConfigError(f"[clickvos.config] unknown config keys {unknown}")
    model = {k: v for k, v in data.items() if k in model_keys}
    train = {k: v for k, v in data.items() if k in train_keys}
    return model, train


def resolve_config(
    path=None,
    overrides: Optional[Mapping[str, Any]] = None,
    presets_path: Path = PRESETS_FILE,
) -> Tuple[ModelConfig, TrainConfig]:
    """Preset values, then the config file, then ``overrides`` (None values are skipped)."""
    data: Dict[str, Any] = {}
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"[clickvos.config] config file not found: {path}")
        try:
            with path.open("r", encoding="utf-8") as f:
                data = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError(f"[clickvos.config] {path}: invalid JSON: {e}") from e
        if not isinstance(data, dict):
            raise ConfigError(f"[clickvos.config] {path}: expected a flat JSON object")

    merged: Dict[str, Any] = {}
    preset = data.get(PRESET_KEY)
    if preset:
        merged.update(load_preset(str(preset), presets_path))
    merged.update({k: v for k, v in data.items() if k != PRESET_KEY})
    merged.update({k: v for k, v in (overrides or {}).items() if v is not None})

    model, train = split_config(merged)
    return ModelConfig.from_dict(model), TrainConfig.from_dict(train)
