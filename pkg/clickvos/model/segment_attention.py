import logging
from typing import Optional

import torch

from ..engine import functional as F
from ..engine.layers import LayerNorm, Module, MultiHeadAttention
from ..engine.tensor import Tensor
from ..errors import ModelStateError, ShapeError


log = logging.getLogger(__name__)


class SegmentAttention(Module):
    """X = F + MHA(LN F); E = X + MHA(LN X, keys, values).

    Frame tokens are layer-normalized before each attention; memory keys and
    values enter as stored.
    """

    def __init__(self, channels: int, n_heads: int, gen: Optional[torch.Generator], eps: float = 1e-5):
        self.self_norm = LayerNorm(channels, eps)
        self.self_attn = MultiHeadAttention(channels, n_heads, gen)
        self.cross_norm = LayerNorm(channels, eps)
        self.cross_attn = MultiHeadAttention(channels, n_heads, gen)

    def __call__(self, fmap: Tensor, keys: Optional[Tensor], values: Optional[Tensor]) -> Tensor:
        if keys is None or values is None or keys.shape[0] == 0:
            raise ModelStateError("[clickvos.segment_attention] memory is empty; frame 1 needs the point tokens")
        if keys.shape != values.shape:
            raise ShapeError("segment_attention", [keys.shape, values.shape], "keys and values must be congruent")
        _, h, w = fmap.shape
        tokens = F.map_to_tokens(fmap)
        n = self.self_norm(tokens)
        x = F.add(tokens, self.self_attn(n, n, n))
        e = F.add(x, self.cross_attn(self.cross_norm(x), keys, values))
        return F.tokens_to_map(e, h, w)
