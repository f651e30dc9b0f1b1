import logging
import math
from typing import Dict, Iterator, List, Mapping, Optional, Tuple

import numpy as np
import torch

from ..errors import ConfigError, ShapeError
from . import functional as F
from .tensor import DTYPE, Tensor


log = logging.getLogger(__name__)


def make_generator(seed: int) -> torch.Generator:
    gen = torch.Generator()
    gen.manual_seed(int(seed))
    return gen


def parameter(shape, gen: torch.Generator, std: float = 0.0, fill: float = 0.0) -> Tensor:
    if std > 0.0:
        data = torch.randn(tuple(shape), generator=gen, dtype=DTYPE) * std
    else:
        data = torch.full(tuple(shape), float(fill), dtype=DTYPE)
    return Tensor(data, requires_grad=True)


class Module:
    """Parameter container; parameters are discovered in attribute order."""

    def named_parameters(self, prefix: str = "") -> Iterator[Tuple[str, Tensor]]:
        for name, value in vars(self).items():
            if isinstance(value, Tensor) and value.requires_grad:
                yield f"{prefix}{name}", value
            elif isinstance(value, Module):
                yield from value.named_parameters(f"{prefix}{name}.")
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield from item.named_parameters(f"{prefix}{name}.{i}.")

    def parameters(self) -> List[Tensor]:
        return [p for _, p in self.named_parameters()]

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.grad = None

    def state_dict(self) -> Dict[str, np.ndarray]:
        return {name: p.numpy() for name, p in self.named_parameters()}

    def load_state_dict(self, state: Mapping[str, np.ndarray], strict: bool = True) -> None:
        own = dict(self.named_parameters())
        missing = sorted(set(own) - set(state))
        unexpected = sorted(set(state) - set(own))
        if strict and (missing or unexpected):
            raise ConfigError(
                f"[clickvos.Module] parameter names differ; missing={missing[:5]} unexpected={unexpected[:5]}"
            )
        for name, p in own.items():
            if name not in state:
                continue
            value = np.asarray(state[name], dtype=np.float64)
            if list(value.shape) != p.shape:
                raise ShapeError("load_state_dict", [p.shape, value.shape], name)
            p.data = torch.as_tensor(value.copy(), dtype=DTYPE)
            p.grad = None


class Linear(Module):

    def __init__(self, in_features: int, out_features: int, gen: torch.Generator, bias: bool = True):
        self.weight = parameter((in_features, out_features), gen, std=math.sqrt(1.0 / in_features))
        self.bias = parameter((out_features,), gen) if bias else None

    def __call__(self, x: Tensor) -> Tensor:
        return F.linear(x, self.weight, self.bias)


class Conv2d(Module):

    def __init__(self, in_channels: int, out_channels: int, kernel_size: int, gen: torch.Generator,
                 stride: int = 1, bias: bool = True, gain: float = 1.0):
        fan_in = in_channels * kernel_size * kernel_size
        self.stride = stride
        self.weight = parameter((out_channels, in_channels, kernel_size, kernel_size), gen,
                                std=gain * math.sqrt(2.0 / fan_in))
        self.bias = parameter((out_channels, 1, 1), gen) if bias else None

    def __call__(self, x: Tensor) -> Tensor:
        y = F.conv2d(x, self.weight, stride=self.stride)
        return F.add(y, self.bias) if self.bias is not None else y


class LayerNorm(Module):

    def __init__(self, dim: int, eps: float = 1e-5):
        self.eps = eps
        self.gamma = Tensor(torch.ones(dim, dtype=DTYPE), requires_grad=True)
        self.beta = Tensor(torch.zeros(dim, dtype=DTYPE), requires_grad=True)

    def __call__(self, x: Tensor) -> Tensor:
        return F.layer_norm(x, self.gamma, self.beta, eps=self.eps)


class MultiHeadAttention(Module):
    """AttentionParams: d_model C, n_heads, d_k = C / n_heads and W_Q, W_K, W_V, W_O."""

    def __init__(self, d_model: int, n_heads: int, gen: Optional[torch.Generator] = None):
        if n_heads <= 0 or d_model % n_heads != 0:
            raise ConfigError(f"[clickvos.MultiHeadAttention] d_model {d_model} not divisible by n_heads {n_heads}")
        self.d_model = d_model
        self.n_heads = n_heads
        self.d_k = d_model // n_heads
        std = math.sqrt(1.0 / d_model)
        if gen is None:
            eye = torch.eye(d_model, dtype=DTYPE)
            self.w_q, self.w_k, self.w_v, self.w_o = (Tensor(eye.clone(), requires_grad=True) for _ in range(4))
        else:
            self.w_q = parameter((d_model, d_model), gen, std=std)
            self.w_k = parameter((d_model, d_model), gen, std=std)
            self.w_v = parameter((d_model, d_model), gen, std=std)
            self.w_o = parameter((d_model, d_model), gen, std=std)

    def __call__(self, q_src: Tensor, k_src: Tensor, v_src: Tensor) -> Tensor:
        return F.multi_head_attention(q_src, k_src, v_src, self)
