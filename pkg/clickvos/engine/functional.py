import logging
import math
from typing import Optional, Sequence, Tuple, Union

import numpy as np
import torch

from ..errors import ShapeError
from .tensor import Tensor, apply_primitive


log = logging.getLogger(__name__)


def constant(data) -> Tensor:
    return Tensor(data, requires_grad=False)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    return apply_primitive("matmul", [a, b])


def conv2d(x: Tensor, weight: Tensor, stride: int = 1, padding: Optional[int] = None) -> Tensor:
    attrs = {"stride": stride}
    if padding is not None:
        attrs["padding"] = padding
    return apply_primitive("conv2d", [x, weight], attrs)


def add(a: Tensor, b: Tensor) -> Tensor:
    return apply_primitive("add", [a, b])


def sub(a: Tensor, b: Tensor) -> Tensor:
    return apply_primitive("sub", [a, b])


def mul(a: Tensor, b: Tensor) -> Tensor:
    return apply_primitive("mul", [a, b])


def div(a: Tensor, b: Tensor) -> Tensor:
    return apply_primitive("div", [a, b])


def scalar_mul(x: Tensor, c: float) -> Tensor:
    return apply_primitive("scalar_mul", [x], {"c": float(c)})


def relu(x: Tensor) -> Tensor:
    return apply_primitive("relu", [x])


def sigmoid(x: Tensor) -> Tensor:
    return apply_primitive("sigmoid", [x])


def exp(x: Tensor) -> Tensor:
    return apply_primitive("exp", [x])


def log_(x: Tensor) -> Tensor:
    return apply_primitive("log", [x])


def softmax(x: Tensor) -> Tensor:
    return apply_primitive("softmax", [x])


def log_softmax(x: Tensor) -> Tensor:
    return apply_primitive("log_softmax", [x])


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    return apply_primitive("layer_norm", [x, gamma, beta], {"eps": eps})


def sum_(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    return apply_primitive("sum", [x], {"axis": axis, "keepdims": keepdims})


def mean(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    return apply_primitive("mean", [x], {"axis": axis, "keepdims": keepdims})


def max_(x: Tensor, axis: Optional[int] = None, keepdims: bool = False) -> Tensor:
    return apply_primitive("max", [x], {"axis": axis, "keepdims": keepdims})


def concat(xs: Sequence[Tensor], axis: int = 0) -> Tensor:
    return apply_primitive("concat", list(xs), {"axis": axis})


def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    return apply_primitive("reshape", [x], {"shape": tuple(shape)})


def transpose(x: Tensor, perm: Optional[Sequence[int]] = None) -> Tensor:
    return apply_primitive("transpose", [x], {"perm": tuple(perm) if perm is not None else None})


def upsample2x(x: Tensor) -> Tensor:
    return apply_primitive("upsample2x", [x])


def gather_rows(x: Tensor, index: Union[Sequence[int], np.ndarray, torch.Tensor]) -> Tensor:
    return apply_primitive("gather_rows", [x], {"index": torch.as_tensor(np.asarray(index), dtype=torch.long)})


def linear(x: Tensor, weight: Tensor, bias: Optional[Tensor] = None) -> Tensor:
    y = matmul(x, weight)
    return add(y, bias) if bias is not None else y


def map_to_tokens(fmap: Tensor) -> Tensor:
    """(C, h, w) feature map -> (h*w, C) tokens in row-major cell order."""
    c, h, w = fmap.shape
    return transpose(reshape(fmap, (c, h * w)), (1, 0))


def tokens_to_map(tokens: Tensor, h: int, w: int) -> Tensor:
    n, c = tokens.shape
    if n != h * w:
        raise ShapeError("tokens_to_map", [tokens.shape], f"expected {h * w} rows for a {h}x{w} map")
    return reshape(transpose(tokens, (1, 0)), (c, h, w))


def _split_heads(x: Tensor, n_heads: int) -> Tensor:
    n, c = x.shape
    return transpose(reshape(x, (n, n_heads, c // n_heads)), (1, 0, 2))


def attention_weights(q: Tensor, k: Tensor, d_k: int) -> Tensor:
    """softmax(q k^T / sqrt(d_k)) for head-split q (h, n, d_k) and k (h, m, d_k)."""
    logits = matmul(q, transpose(k, (0, 2, 1)))
    return softmax(scalar_mul(logits, 1.0 / math.sqrt(d_k)))


def multi_head_attention(
    q_src: Tensor,
    k_src: Tensor,
    v_src: Tensor,
    params,
    return_weights: bool = False,
) -> Union[Tensor, Tuple[Tensor, Tensor]]:
    """Scaled dot-product attention with all four projections applied.

    ``params`` exposes ``d_model``, ``n_heads``, ``d_k`` and the projection
    matrices ``w_q``, ``w_k``, ``w_v``, ``w_o`` (each C x C).
    """
    c = params.d_model
    for name, src in (("query", q_src), ("key", k_src), ("value", v_src)):
        if src.ndim != 2 or src.shape[1] != c:
            raise ShapeError("multi_head_attention", [q_src.shape, k_src.shape, v_src.shape],
                             f"{name} rows must have width {c}")
    if k_src.shape[0] != v_src.shape[0]:
        raise ShapeError("multi_head_attention", [k_src.shape, v_src.shape], "key/value row counts differ")

    n = q_src.shape[0]
    q = _split_heads(matmul(q_src, params.w_q), params.n_heads)
    k = _split_heads(matmul(k_src, params.w_k), params.n_heads)
    v = _split_heads(matmul(v_src, params.w_v), params.n_heads)
    weights = attention_weights(q, k, params.d_k)
    heads = matmul(weights, v)
    merged = reshape(transpose(heads, (1, 0, 2)), (n, c))
    out = matmul(merged, params.w_o)
    return (out, weights) if return_weights else out
