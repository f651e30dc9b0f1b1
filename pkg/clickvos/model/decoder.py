import logging
from typing import List, Optional, Sequence, Tuple

import numpy as np
import torch

from ..engine import functional as F
from ..engine.layers import Conv2d, Module
from ..engine.tensor import Tensor
from ..errors import ShapeError
from .config import ModelConfig


log = logging.getLogger(__name__)

# initial logits stay close to uniform
HEAD_GAIN = 0.02


class UpBlock(Module):
    """Nearest x2 upsample, conv3x3, ReLU, conv3x3, plus a 1x1 shortcut."""

    def __init__(self, in_channels: int, out_channels: int, gen: torch.Generator):
        self.conv1 = Conv2d(in_channels, out_channels, 3, gen)
        self.conv2 = Conv2d(out_channels, out_channels, 3, gen)
        self.shortcut = Conv2d(in_channels, out_channels, 1, gen, bias=False)

    def __call__(self, x: Tensor) -> Tensor:
        up = F.upsample2x(x)
        y = self.conv2(F.relu(self.conv1(up)))
        return F.relu(F.add(y, self.shortcut(up)))


class Decoder(Module):

    def __init__(self, config: ModelConfig, gen: torch.Generator):
        c, half = config.channels, config.half_channels
        self.blocks: List[UpBlock] = [
            UpBlock(2 * c if i == 0 else half, half, gen) for i in range(config.upsample_stages)
        ]
        self.head = Conv2d(half, config.max_objects, 1, gen, gain=HEAD_GAIN)

    def __call__(self, embedding: Tensor, features: Tensor) -> Tensor:
        if embedding.shape != features.shape:
            raise ShapeError("decode_mask", [embedding.shape, features.shape], "E_t and F_t must be congruent")
        x = F.concat([embedding, features], axis=0)
        for block in self.blocks:
            x = block(x)
        return self.head(x)


def labels_from_logits(logits: np.ndarray, labels: Optional[Sequence[int]] = None) -> np.ndarray:
    """Per-pixel argmax over ``labels`` (default: all channels); ties go to the lower label."""
    logits = np.asarray(logits)
    if labels is None:
        labels = list(range(logits.shape[0]))
    labels = np.asarray(sorted(labels), dtype=np.int64)
    winner = np.argmax(logits[labels], axis=0)
    return labels[winner].astype(np.uint8)


def decode_mask(decoder: Decoder, embedding: Tensor, features: Tensor,
                labels: Optional[Sequence[int]] = None) -> Tuple[Tensor, np.ndarray]:
    logits = decoder(embedding, features)
    return logits, labels_from_logits(logits.data.numpy(), labels)
