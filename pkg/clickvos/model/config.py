import dataclasses
import logging
import math
from dataclasses import dataclass, fields
from typing import Any, Dict, Mapping, Tuple

from ..errors import ConfigError


log = logging.getLogger(__name__)

MODALITIES = ("appearance_only", "concat_fuse", "bimodal_enhance")
OBJMEM_MODES = ("first_only", "all")
DENSEMEM_MODES = ("on", "off")

CHOICES: Dict[str, Tuple[str, ...]] = {
    "modality": MODALITIES,
    "objmem": OBJMEM_MODES,
    "densemem": DENSEMEM_MODES,
}


def _coerce(name: str, value: Any, kind, choices=None):
    """Flat JSON / CLI string -> declared field type."""
    try:
        if kind is bool:
            if isinstance(value, bool):
                return value
            if isinstance(value, str):
                lowered = value.strip().lower()
                if lowered in ("true", "1", "yes", "on"):
                    return True
                if lowered in ("false", "0", "no", "off"):
                    return False
            if isinstance(value, (int, float)) and value in (0, 1):
                return bool(value)
            raise ValueError(f"not a boolean: {value!r}")
        if kind is int:
            if isinstance(value, bool):
                raise ValueError("booleans are not integers")
            as_float = float(value)
            if as_float != math.floor(as_float):
                raise ValueError(f"not an integer: {value!r}")
            return int(as_float)
        if kind is float:
            return float(value)
        value = str(value)
        if choices and value not in choices:
            raise ValueError(f"expected one of {list(choices)}, got '{value}'")
        return value
    except (TypeError, ValueError) as e:
        raise ConfigError(f"[clickvos.config] field '{name}': {e}") from e


def coerce_fields(cls, data: Mapping[str, Any], strict: bool = True) -> Dict[str, Any]:
    """Coerce the entries of ``data`` that name fields of dataclass ``cls``."""
    known = {f.name: f for f in fields(cls)}
    out = {}
    for key, value in data.items():
        if key not in known:
            if strict:
                raise ConfigError(f"[clickvos.config] unknown {cls.__name__} field '{key}'")
            continue
        kind = known[key].type
        kind = {"int": int, "float": float, "bool": bool, "str": str}.get(kind, kind)
        out[key] = _coerce(key, value, kind, CHOICES.get(key))
    return out


@dataclass
class ModelConfig:
    channels: int = 32
    n_heads: int = 4
    stride: int = 4
    max_objects: int = 4
    modality: str = "bimodal_enhance"
    objmem: str = "all"
    densemem: str = "on"
    ln_eps: float = 1e-5
    seed: int = 0

    @classmethod
    def from_dict(cls, data: Mapping[str, Any], strict: bool = True) -> "ModelConfig":
        config = cls(**coerce_fields(cls, data, strict=strict))
        config.validate()
        return config

    def to_dict(self) -> Dict[str, Any]:
        return dataclasses.asdict(self)

    def replace(self, **changes) -> "ModelConfig":
        config = dataclasses.replace(self, **coerce_fields(type(self), changes))
        config.validate()
        return config

    @property
    def half_channels(self) -> int:
        return self.channels // 2

    @property
    def upsample_stages(self) -> int:
        return int(math.log2(self.stride))

    @property
    def dense_memory(self) -> bool:
        return self.densemem == "on"

    def validate(self) -> None:
        if self.channels < 2 or self.channels % 2:
            raise ConfigError(f"[clickvos.ModelConfig] channels must be even and >= 2, got {self.channels}")
        if self.n_heads < 1 or self.channels % self.n_heads:
            raise ConfigError(f"[clickvos.ModelConfig] channels {self.channels} not divisible by n_heads {self.n_heads}")
        if self.half_channels % self.n_heads:
            raise ConfigError(
                f"[clickvos.ModelConfig] stage width {self.half_channels} not divisible by n_heads {self.n_heads}"
            )
        if self.stride < 2 or self.stride & (self.stride - 1):
            raise ConfigError(f"[clickvos.ModelConfig] stride must be a power of 2 >= 2, got {self.stride}")
        if self.max_objects < 2:
            raise ConfigError(f"[clickvos.ModelConfig] max_objects must be >= 2, got {self.max_objects}")
        for key, choices in CHOICES.items():
            if getattr(self, key) not in choices:
                raise ConfigError(f"[clickvos.ModelConfig] {key} must be one of {list(choices)}")
        if self.ln_eps <= 0:
            raise ConfigError(f"[clickvos.ModelConfig] ln_eps must be positive, got {self.ln_eps}")
