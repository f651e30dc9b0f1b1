"""Identity bank and the three token producers: points, mask pooling, dense."""

import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
import torch

from ..annotation.points import PointSet
from ..engine import functional as F
from ..engine.layers import Module, parameter
from ..engine.tensor import Tensor
from ..errors import ConfigError, ShapeError


log = logging.getLogger(__name__)


class IdentityBank(Module):
    """Learnable rows; row n marks object n, row 0 the background."""

    def __init__(self, max_objects: int, channels: int, gen: torch.Generator):
        self.weight = parameter((max_objects, channels), gen, std=math.sqrt(1.0 / channels))

    @property
    def size(self) -> int:
        return self.weight.shape[0]

    def rows(self, ids: Sequence[int]) -> Tensor:
        ids = np.asarray(ids, dtype=np.int64).reshape(-1)
        if ids.size and (ids.min() < 0 or ids.max() >= self.size):
            raise ConfigError(f"[clickvos.IdentityBank] ids {ids.tolist()} outside [0, {self.size})")
        return F.gather_rows(self.weight, ids)


@dataclass
class TokenSet:
    z: Tensor                          # (rows, C)
    z_id: Tensor                       # z + bank rows
    ids: List[int] = field(default_factory=list)
    absent: List[bool] = field(default_factory=list)

    @property
    def rows(self) -> int:
        return self.z.shape[0]

    def detach(self) -> "TokenSet":
        return TokenSet(self.z.detach(), self.z_id.detach(), list(self.ids), list(self.absent))


@dataclass
class DenseTokens:
    z: Tensor                          # (h*w, C)
    z_id: Tensor
    labels: np.ndarray                 # (h*w,) downsampled label per cell

    @property
    def rows(self) -> int:
        return self.z.shape[0]

    def detach(self) -> "DenseTokens":
        return DenseTokens(self.z.detach(), self.z_id.detach(), self.labels)


def downsample_mask(mask: np.ndarray, stride: int) -> np.ndarray:
    """Majority label of every stride x stride cell; ties go to the lower label."""
    mask = np.asarray(mask)
    H, W = mask.shape
    if H % stride or W % stride:
        raise ConfigError(f"[clickvos.downsample_mask] mask {H}x{W} not divisible by stride {stride}")
    h, w = H // stride, W // stride
    cells = mask.reshape(h, stride, w, stride).transpose(0, 2, 1, 3).reshape(h, w, stride * stride)
    n_labels = int(mask.max()) + 1 if mask.size else 1
    counts = np.stack([(cells == label).sum(axis=-1) for label in range(n_labels)])
    return counts.argmax(axis=0).astype(np.int64)


def one_hot_cells(mask: np.ndarray, stride: int, ids: Sequence[int]) -> np.ndarray:
    """(len(ids), h*w) binary matrix: row k marks the cells voted to ids[k]."""
    labels = downsample_mask(mask, stride).reshape(-1)
    return np.stack([(labels == i) for i in ids]).astype(np.float64)


def point_tokenize(fmap: Tensor, points: PointSet, bank: IdentityBank, stride: int) -> TokenSet:
    """z[n] = F[y_n // s, x_n // s] for every point, rows ordered by object id."""
    c, h, w = fmap.shape
    cells, ids = [], []
    owner = {}
    for p in points:
        row, col = p.y // stride, p.x // stride
        if not (0 <= row < h and 0 <= col < w) or p.x < 0 or p.y < 0:
            raise ShapeError("point_tokenize", [fmap.shape], f"point {p.object_id} at ({p.x}, {p.y}) out of bounds")
        cell = row * w + col
        if cell in owner and owner[cell] != p.object_id:
            log.warning(
                f"[clickvos.point_tokenize] objects {owner[cell]} and {p.object_id} share feature cell ({row}, {col})"
            )
        owner.setdefault(cell, p.object_id)
        cells.append(cell)
        ids.append(p.object_id)
    z = F.gather_rows(F.map_to_tokens(fmap), cells)
    return TokenSet(z, F.add(z, bank.rows(ids)), ids, [False] * len(ids))


def mask_pool(fmap: Tensor, mask: np.ndarray, bank: IdentityBank, stride: int, ids: Sequence[int]) -> TokenSet:
    """Mean feature under each object's downsampled one-hot channel; empty channels give zeros."""
    one_hot = one_hot_cells(mask, stride, ids)
    counts = one_hot.sum(axis=1, keepdims=True)
    absent = (counts[:, 0] == 0).tolist()
    weights = np.divide(one_hot, counts, out=np.zeros_like(one_hot), where=counts > 0)
    z = F.matmul(F.constant(weights), F.map_to_tokens(fmap))
    for oid, gone in zip(ids, absent):
        if gone:
            log.debug(f"[clickvos.mask_pool] object {oid} absent from mask; storing a zero token")
    return TokenSet(z, F.add(z, bank.rows(ids)), list(ids), absent)


def make_dense_tokens(fmap: Tensor, mask: np.ndarray, bank: IdentityBank, stride: int) -> DenseTokens:
    labels = downsample_mask(mask, stride).reshape(-1)
    z = F.map_to_tokens(fmap)
    return DenseTokens(z, F.add(z, bank.rows(labels)), labels)
