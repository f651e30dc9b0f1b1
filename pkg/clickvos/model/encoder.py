"""Two-branch image/flow encoder with mutual attention enhancement."""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
import torch

from ..engine import functional as F
from ..engine.layers import Conv2d, LayerNorm, Linear, Module, MultiHeadAttention
from ..engine.tensor import Tensor
from ..errors import ConfigError
from .config import ModelConfig


log = logging.getLogger(__name__)


@dataclass
class FeatureMap:
    features: Tensor                                  # (C, H/s, W/s)
    intermediates: Dict[str, Tensor] = field(default_factory=dict)

    @property
    def channels(self) -> int:
        return self.features.shape[0]

    @property
    def height(self) -> int:
        return self.features.shape[1]

    @property
    def width(self) -> int:
        return self.features.shape[2]

    def tokens(self) -> Tensor:
        return F.map_to_tokens(self.features)


def image_tensor(image) -> Tensor:
    """H x W x 3 array -> constant (3, H, W) tensor."""
    if isinstance(image, Tensor):
        return image
    array = np.asarray(image, dtype=np.float64)
    if array.ndim != 3 or array.shape[2] != 3:
        raise ConfigError(f"[clickvos.encode_bimodal] expected an H x W x 3 image, got {array.shape}")
    return F.constant(np.ascontiguousarray(np.transpose(array, (2, 0, 1))))


class ResidualBlock(Module):

    def __init__(self, in_channels: int, out_channels: int, gen: torch.Generator, stride: int = 1):
        self.conv1 = Conv2d(in_channels, out_channels, 3, gen, stride=stride)
        self.conv2 = Conv2d(out_channels, out_channels, 3, gen)
        self.shortcut = None
        if in_channels != out_channels or stride != 1:
            self.shortcut = Conv2d(in_channels, out_channels, 1, gen, stride=stride, bias=False)

    def __call__(self, x: Tensor) -> Tensor:
        y = self.conv2(F.relu(self.conv1(x)))
        skip = self.shortcut(x) if self.shortcut is not None else x
        return F.relu(F.add(y, skip))


class ResidualStage(Module):
    """Residual blocks downsampling by ``factor`` (a power of two) to ``out_channels``."""

    def __init__(self, in_channels: int, out_channels: int, factor: int, gen: torch.Generator):
        steps = max(int(factor).bit_length() - 1, 0)
        self.blocks: List[ResidualBlock] = []
        if steps == 0:
            self.blocks.append(ResidualBlock(in_channels, out_channels, gen, stride=1))
        for i in range(steps):
            self.blocks.append(ResidualBlock(in_channels if i == 0 else out_channels, out_channels, gen, stride=2))

    def __call__(self, x: Tensor) -> Tensor:
        for block in self.blocks:
            x = block(x)
        return x


class SelfEnhance(Module):
    """f' = f + MHA(LN f) over all positions of one modality."""

    def __init__(self, channels: int, n_heads: int, gen: torch.Generator, eps: float = 1e-5):
        self.norm = LayerNorm(channels, eps)
        self.attn = MultiHeadAttention(channels, n_heads, gen)

    def tokens(self, t: Tensor) -> Tensor:
        n = self.norm(t)
        return F.add(t, self.attn(n, n, n))

    def __call__(self, fmap: Tensor) -> Tensor:
        _, h, w = fmap.shape
        return F.tokens_to_map(self.tokens(F.map_to_tokens(fmap)), h, w)


class ModalEnhanceBlock(Module):
    """Per-modality self-attention, then residual cross-attention between modalities."""

    def __init__(self, channels: int, n_heads: int, gen: torch.Generator, eps: float = 1e-5):
        self.image_self = SelfEnhance(channels, n_heads, gen, eps)
        self.flow_self = SelfEnhance(channels, n_heads, gen, eps)
        self.image_norm = LayerNorm(channels, eps)
        self.flow_norm = LayerNorm(channels, eps)
        self.image_from_flow = MultiHeadAttention(channels, n_heads, gen)
        self.flow_from_image = MultiHeadAttention(channels, n_heads, gen)

    def __call__(self, f_image: Tensor, f_flow: Tensor) -> Dict[str, Tensor]:
        _, h, w = f_image.shape
        t_image = self.image_self.tokens(F.map_to_tokens(f_image))
        t_flow = self.flow_self.tokens(F.map_to_tokens(f_flow))
        n_image = self.image_norm(t_image)
        n_flow = self.flow_norm(t_flow)
        t_io = F.add(t_image, self.image_from_flow(n_image, n_flow, n_flow))
        t_oi = F.add(t_flow, self.flow_from_image(n_flow, n_image, n_image))
        return {
            "image_self": F.tokens_to_map(t_image, h, w),
            "flow_self": F.tokens_to_map(t_flow, h, w),
            "image_flow": F.tokens_to_map(t_io, h, w),
            "flow_image": F.tokens_to_map(t_oi, h, w),
        }


class ChannelAttentionFusion(Module):
    """Squeeze-excite gates over [a, b] followed by a 1x1 projection to ``channels``."""

    def __init__(self, channels: int, gen: torch.Generator):
        both = 2 * channels
        self.squeeze = Linear(both, max(channels // 2, 1), gen)
        self.excite = Linear(max(channels // 2, 1), both, gen)
        self.project = Conv2d(both, channels, 1, gen)

    def gates(self, x: Tensor) -> Tensor:
        c = x.shape[0]
        pooled = F.reshape(F.mean(x, axis=(1, 2)), (1, c))
        g = F.sigmoid(self.excite(F.relu(self.squeeze(pooled))))
        return F.reshape(g, (c, 1, 1))

    def __call__(self, a: Tensor, b: Tensor) -> Tensor:
        x = F.concat([a, b], axis=0)
        return self.project(F.mul(x, self.gates(x)))


class BimodalEncoder(Module):

    def __init__(self, config: ModelConfig, gen: torch.Generator):
        c, half, heads, eps = config.channels, config.half_channels, config.n_heads, config.ln_eps
        self.stride = config.stride
        self.modality = config.modality

        self.image_stage1 = ResidualStage(3, half, config.stride // 2, gen)
        self.image_stage2 = ResidualStage(half, c, 2, gen)
        if self.modality != "appearance_only":
            self.flow_stage1 = ResidualStage(3, half, config.stride // 2, gen)
            self.flow_stage2 = ResidualStage(half, c, 2, gen)

        if self.modality == "bimodal_enhance":
            self.enhance1 = ModalEnhanceBlock(half, heads, gen, eps)
            self.enhance2 = ModalEnhanceBlock(c, heads, gen, eps)
            self.fusion = ChannelAttentionFusion(c, gen)
        elif self.modality == "appearance_only":
            self.enhance1 = SelfEnhance(half, heads, gen, eps)
            self.enhance2 = SelfEnhance(c, heads, gen, eps)
            self.project = Conv2d(c, c, 1, gen)
        else:
            self.fuse = Linear(2 * c, c, gen)

    def check_input(self, height: int, width: int) -> None:
        if height % self.stride or width % self.stride:
            raise ConfigError(
                f"[clickvos.encode_bimodal] image {height}x{width} not divisible by stride {self.stride}"
            )

    def __call__(self, image, flow_image) -> FeatureMap:
        x_image = image_tensor(image)
        _, height, width = x_image.shape
        self.check_input(height, width)

        if self.modality == "appearance_only":
            f1 = self.enhance1(self.image_stage1(x_image))
            f2 = self.enhance2(self.image_stage2(f1))
            return FeatureMap(self.project(f2), {"image1": f1, "image2": f2})

        x_flow = image_tensor(flow_image)
        if x_flow.shape != x_image.shape:
            raise ConfigError(
                f"[clickvos.encode_bimodal] image {x_image.shape} and flow image {x_flow.shape} differ"
            )

        if self.modality == "concat_fuse":
            f_image = self.image_stage2(self.image_stage1(x_image))
            f_flow = self.flow_stage2(self.flow_stage1(x_flow))
            _, h, w = f_image.shape
            tokens = F.concat([F.map_to_tokens(f_image), F.map_to_tokens(f_flow)], axis=1)
            fused = F.tokens_to_map(self.fuse(tokens), h, w)
            return FeatureMap(fused, {"image": f_image, "flow": f_flow})

        stage1 = self.enhance1(self.image_stage1(x_image), self.flow_stage1(x_flow))
        stage2 = self.enhance2(
            self.image_stage2(stage1["image_flow"]),
            self.flow_stage2(stage1["flow_image"]),
        )
        fused = self.fusion(stage2["image_flow"], stage2["flow_image"])
        intermediates = {f"{k}1": v for k, v in stage1.items()}
        intermediates.update({f"{k}2": v for k, v in stage2.items()})
        return FeatureMap(fused, intermediates)
