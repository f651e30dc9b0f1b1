import logging
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional

from ..engine import functional as F
from ..engine.tensor import Tensor
from .tokens import DenseTokens, TokenSet


log = logging.getLogger(__name__)


@dataclass
class MemoryState:
    """Object memory (per-frame TokenSets) plus the {first, previous} dense slots."""

    objmem: str = "all"
    dense_enabled: bool = True
    objects: List[TokenSet] = field(default_factory=list)
    dense_first: Optional[DenseTokens] = None
    dense_previous: Optional[DenseTokens] = None
    from_points: bool = False
    frames: int = 0

    @classmethod
    def seeded(cls, point_tokens: TokenSet, objmem: str = "all", dense_enabled: bool = True) -> "MemoryState":
        return cls(objmem=objmem, dense_enabled=dense_enabled, objects=[point_tokens], from_points=True)

    @property
    def dense_slots(self) -> List[DenseTokens]:
        if self.dense_first is None:
            return []
        return [self.dense_first, self.dense_previous]

    def _entries(self):
        return list(self.objects) + self.dense_slots

    def keys(self) -> Optional[Tensor]:
        entries = self._entries()
        if not entries:
            return None
        return F.concat([e.z for e in entries], axis=0)

    def values(self) -> Optional[Tensor]:
        entries = self._entries()
        if not entries:
            return None
        return F.concat([e.z_id for e in entries], axis=0)

    @property
    def object_rows(self) -> int:
        return sum(e.rows for e in self.objects)

    @property
    def key_rows(self) -> int:
        return sum(e.rows for e in self._entries())

    def trace(self) -> Dict[str, int]:
        return {
            "frames": self.frames,
            "object_entries": len(self.objects),
            "object_rows": self.object_rows,
            "dense_slots": len(self.dense_slots),
            "key_rows": self.key_rows,
        }


def memory_update(mem: MemoryState, tokens: TokenSet, dense: Optional[DenseTokens] = None) -> MemoryState:
    """Functional update; ``mem`` is left untouched."""
    objects = list(mem.objects)
    from_points = mem.from_points
    if mem.objmem == "all":
        if from_points:
            objects = [tokens]
            from_points = False
        else:
            objects.append(tokens)

    first, previous = mem.dense_first, mem.dense_previous
    if mem.dense_enabled and dense is not None:
        if first is None:
            first = dense
        previous = dense

    updated = replace(mem, objects=objects, dense_first=first, dense_previous=previous,
                      from_points=from_points, frames=mem.frames + 1)
    log.debug(f"[clickvos.memory_update] {updated.trace()}")
    return updated
