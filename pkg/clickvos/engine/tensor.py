"""Reverse-mode differentiation over float64 torch storage.

Every forward value is computed by one of the primitives registered in
``PRIMITIVES``; torch is used purely as an array library here (no torch
autograd). Each application is recorded as a ``Node`` on the current
``Graph`` and ``Graph.backward`` replays the nodes in reverse insertion order.
"""

import logging
import threading
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Any, Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np
import torch
import torch.nn.functional as F

from ..errors import GraphError, NumericOverflowError, ShapeError


log = logging.getLogger(__name__)

DTYPE = torch.float64


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "name", "_node", "__weakref__")

    def __init__(self, data, requires_grad: bool = False, name: Optional[str] = None):
        if isinstance(data, Tensor):
            data = data.data
        if isinstance(data, torch.Tensor):
            data = data.detach().to(DTYPE)
        else:
            data = torch.as_tensor(np.asarray(data, dtype=np.float64), dtype=DTYPE)
        self.data: torch.Tensor = data.contiguous()
        self.requires_grad = bool(requires_grad)
        self.grad: Optional[torch.Tensor] = None
        self.name = name
        self._node: Optional["Node"] = None

    @classmethod
    def _wrap(cls, data: torch.Tensor, requires_grad: bool = False) -> "Tensor":
        t = cls.__new__(cls)
        t.data = data.contiguous()
        t.requires_grad = requires_grad
        t.grad = None
        t.name = None
        t._node = None
        return t

    @property
    def shape(self) -> List[int]:
        return list(self.data.shape)

    @property
    def ndim(self) -> int:
        return self.data.dim()

    def numel(self) -> int:
        return self.data.numel()

    def numpy(self) -> np.ndarray:
        return self.data.numpy().copy()

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def detach(self) -> "Tensor":
        return Tensor._wrap(self.data, requires_grad=False)

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self) -> None:
        current_graph().backward(self)

    def __repr__(self) -> str:
        label = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad}{label})"

    # operator sugar; scalars become constants
    def __add__(self, other):
        return apply_primitive("add", [self, _as_tensor(other)])

    def __radd__(self, other):
        return apply_primitive("add", [_as_tensor(other), self])

    def __sub__(self, other):
        return apply_primitive("sub", [self, _as_tensor(other)])

    def __rsub__(self, other):
        return apply_primitive("sub", [_as_tensor(other), self])

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return apply_primitive("scalar_mul", [self], {"c": float(other)})
        return apply_primitive("mul", [self, other])

    def __rmul__(self, other):
        return self.__mul__(other)

    def __truediv__(self, other):
        if isinstance(other, (int, float)):
            return apply_primitive("scalar_mul", [self], {"c": 1.0 / float(other)})
        return apply_primitive("div", [self, other])

    def __neg__(self):
        return apply_primitive("scalar_mul", [self], {"c": -1.0})

    def __matmul__(self, other):
        return apply_primitive("matmul", [self, other])


def _as_tensor(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


@dataclass
class Node:
    kind: str
    inputs: List[Tensor]
    output: Tensor
    attrs: Dict[str, Any]
    saved: Any = None


class Graph:
    """Ordered record of primitive applications; one backward per recording."""

    def __init__(self):
        self.nodes: List[Node] = []
        self._consumed = False

    def record(self, node: Node) -> None:
        if self._consumed:
            raise GraphError("[clickvos.Graph] cannot record on a graph already differentiated; call reset()")
        self.nodes.append(node)

    def reset(self) -> None:
        for node in self.nodes:
            node.output._node = None
        self.nodes = []
        self._consumed = False

    def backward(self, output: Tensor) -> None:
        if self._consumed:
            raise GraphError("[clickvos.Graph] backward called twice without reset")
        if output.numel() != 1:
            raise GraphError(f"[clickvos.Graph] backward needs a scalar output, got shape {output.shape}")
        if not output.requires_grad:
            raise GraphError("[clickvos.Graph] output does not depend on any requires_grad tensor")

        grads: Dict[int, torch.Tensor] = {id(output): torch.ones_like(output.data)}
        if output._node is None:
            output.grad = grads[id(output)] if output.grad is None else output.grad + grads[id(output)]

        for node in reversed(self.nodes):
            g = grads.pop(id(node.output), None)
            if g is None:
                continue
            prim = PRIMITIVES[node.kind]
            in_grads = prim.backward(g, [t.data for t in node.inputs], node.output.data, node.attrs, node.saved)
            for t, ig in zip(node.inputs, in_grads):
                if ig is None or not t.requires_grad:
                    continue
                if t._node is None:
                    t.grad = ig.clone() if t.grad is None else t.grad + ig
                else:
                    key = id(t)
                    grads[key] = grads[key] + ig if key in grads else ig

        self._consumed = True
        log.debug(f"[clickvos.Graph] backward over {len(self.nodes)} nodes")

    def __enter__(self) -> "Graph":
        _graph_stack().append(self)
        return self

    def __exit__(self, *exc) -> None:
        stack = _graph_stack()
        if stack and stack[-1] is self:
            stack.pop()


_state = threading.local()


def _graph_stack() -> List[Graph]:
    stack = getattr(_state, "graphs", None)
    if stack is None:
        stack = [Graph()]
        _state.graphs = stack
    return stack


def current_graph() -> Graph:
    return _graph_stack()[-1]


def grad_enabled() -> bool:
    return getattr(_state, "grad_enabled", True)


@contextmanager
def no_grad() -> Iterator[None]:
    previous = grad_enabled()
    _state.grad_enabled = False
    try:
        yield
    finally:
        _state.grad_enabled = previous


# ----------------------------------------------------------------------------
# primitives
# ----------------------------------------------------------------------------

def _unbroadcast(g: torch.Tensor, shape: Sequence[int]) -> torch.Tensor:
    while g.dim() > len(shape):
        g = g.sum(0)
    for i, n in enumerate(shape):
        if n == 1 and g.shape[i] != 1:
            g = g.sum(i, keepdim=True)
    return g.reshape(tuple(shape))


def _axes(axis, ndim: int) -> Tuple[int, ...]:
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(sorted(a % ndim for a in axis))


def _expand_reduced(g: torch.Tensor, shape, axes, keepdims: bool) -> torch.Tensor:
    if not keepdims:
        for a in axes:
            g = g.unsqueeze(a)
    return g.expand(tuple(shape))


class Primitive:
    kind = ""
    arity: Optional[int] = 1

    def check(self, xs: List[torch.Tensor], attrs: Dict[str, Any]) -> None:
        if self.arity is not None and len(xs) != self.arity:
            raise ShapeError(self.kind, [x.shape for x in xs], f"expected {self.arity} input(s)")

    def forward(self, xs, attrs):
        raise NotImplementedError

    def backward(self, g, xs, out, attrs, saved):
        raise NotImplementedError

    def _fail(self, xs, detail: str = ""):
        raise ShapeError(self.kind, [x.shape for x in xs], detail)


class _Binary(Primitive):
    arity = 2

    def check(self, xs, attrs):
        super().check(xs, attrs)
        try:
            torch.broadcast_shapes(xs[0].shape, xs[1].shape)
        except RuntimeError:
            self._fail(xs, "shapes are not broadcastable")


class Add(_Binary):
    kind = "add"

    def forward(self, xs, attrs):
        return xs[0] + xs[1], None

    def backward(self, g, xs, out, attrs, saved):
        return _unbroadcast(g, xs[0].shape), _unbroadcast(g, xs[1].shape)


class Sub(_Binary):
    kind = "sub"

    def forward(self, xs, attrs):
        return xs[0] - xs[1], None

    def backward(self, g, xs, out, attrs, saved):
        return _unbroadcast(g, xs[0].shape), _unbroadcast(-g, xs[1].shape)


class Mul(_Binary):
    kind = "mul"

    def forward(self, xs, attrs):
        return xs[0] * xs[1], None

    def backward(self, g, xs, out, attrs, saved):
        return _unbroadcast(g * xs[1], xs[0].shape), _unbroadcast(g * xs[0], xs[1].shape)


class Div(_Binary):
    kind = "div"

    def forward(self, xs, attrs):
        return xs[0] / xs[1], None

    def backward(self, g, xs, out, attrs, saved):
        a, b = xs
        return _unbroadcast(g / b, a.shape), _unbroadcast(-g * a / (b * b), b.shape)


class ScalarMul(Primitive):
    kind = "scalar_mul"

    def forward(self, xs, attrs):
        return xs[0] * attrs["c"], None

    def backward(self, g, xs, out, attrs, saved):
        return (g * attrs["c"],)


class MatMul(Primitive):
    kind = "matmul"
    arity = 2

    def check(self, xs, attrs):
        super().check(xs, attrs)
        a, b = xs
        if a.dim() < 2 or b.dim() < 2 or a.dim() != b.dim():
            self._fail(xs, "operands must have equal rank >= 2")
        if a.shape[-1] != b.shape[-2] or a.shape[:-2] != b.shape[:-2]:
            self._fail(xs)

    def forward(self, xs, attrs):
        return torch.matmul(xs[0], xs[1]), None

    def backward(self, g, xs, out, attrs, saved):
        a, b = xs
        return torch.matmul(g, b.transpose(-1, -2)), torch.matmul(a.transpose(-1, -2), g)


class Conv2d(Primitive):
    """Channel-first single-image convolution, im2col formulation."""

    kind = "conv2d"
    arity = 2

    def check(self, xs, attrs):
        super().check(xs, attrs)
        x, w = xs
        if x.dim() != 3 or w.dim() != 4 or w.shape[1] != x.shape[0] or w.shape[2] != w.shape[3]:
            self._fail(xs, "expected x (Cin,H,W) and w (Cout,Cin,k,k)")
        if attrs.get("stride", 1) not in (1, 2):
            self._fail(xs, f"stride must be 1 or 2, got {attrs.get('stride')}")

    @staticmethod
    def _geometry(w, attrs):
        k = w.shape[2]
        return k, attrs.get("stride", 1), attrs.get("padding", k // 2)

    def forward(self, xs, attrs):
        x, w = xs
        k, stride, pad = self._geometry(w, attrs)
        h_out = (x.shape[1] + 2 * pad - k) // stride + 1
        w_out = (x.shape[2] + 2 * pad - k) // stride + 1
        cols = F.unfold(x.unsqueeze(0), kernel_size=k, padding=pad, stride=stride)[0]
        out = torch.matmul(w.reshape(w.shape[0], -1), cols).reshape(w.shape[0], h_out, w_out)
        return out, cols

    def backward(self, g, xs, out, attrs, saved):
        x, w = xs
        k, stride, pad = self._geometry(w, attrs)
        gf = g.reshape(w.shape[0], -1)
        gw = torch.matmul(gf, saved.transpose(0, 1)).reshape(w.shape)
        gcols = torch.matmul(w.reshape(w.shape[0], -1).transpose(0, 1), gf)
        gx = F.fold(gcols.unsqueeze(0), output_size=tuple(x.shape[1:]), kernel_size=k, padding=pad, stride=stride)[0]
        return gx, gw


class Relu(Primitive):
    kind = "relu"

    def forward(self, xs, attrs):
        return torch.clamp(xs[0], min=0.0), None

    def backward(self, g, xs, out, attrs, saved):
        return (g * (xs[0] > 0).to(g.dtype),)


class Sigmoid(Primitive):
    kind = "sigmoid"

    def forward(self, xs, attrs):
        return torch.sigmoid(xs[0]), None

    def backward(self, g, xs, out, attrs, saved):
        return (g * out * (1.0 - out),)


class Exp(Primitive):
    kind = "exp"

    def forward(self, xs, attrs):
        return torch.exp(xs[0]), None

    def backward(self, g, xs, out, attrs, saved):
        return (g * out,)


class Log(Primitive):
    kind = "log"

    def forward(self, xs, attrs):
        return torch.log(xs[0]), None

    def backward(self, g, xs, out, attrs, saved):
        return (g / xs[0],)


class Softmax(Primitive):
    kind = "softmax"

    def check(self, xs, attrs):
        super().check(xs, attrs)
        if xs[0].dim() < 1 or xs[0].shape[-1] == 0:
            self._fail(xs, "softmax needs a non-empty last axis")

    def forward(self, xs, attrs):
        return torch.softmax(xs[0], dim=-1), None

    def backward(self, g, xs, out, attrs, saved):
        return (out * (g - (g * out).sum(-1, keepdim=True)),)


class LogSoftmax(Softmax):
    kind = "log_softmax"

    def forward(self, xs, attrs):
        return torch.log_softmax(xs[0], dim=-1), None

    def backward(self, g, xs, out, attrs, saved):
        return (g - torch.exp(out) * g.sum(-1, keepdim=True),)


class LayerNorm(Primitive):
    """Inputs x (..., D), gamma (D), beta (D); normalizes over the last axis."""

    kind = "layer_norm"
    arity = 3

    def check(self, xs, attrs):
        super().check(xs, attrs)
        x, gamma, beta = xs
        d = x.shape[-1] if x.dim() else -1
        if list(gamma.shape) != [d] or list(beta.shape) != [d]:
            self._fail(xs, "gamma and beta must match the last axis")

    def forward(self, xs, attrs):
        x, gamma, beta = xs
        eps = attrs.get("eps", 1e-5)
        mu = x.mean(-1, keepdim=True)
        centered = x - mu
        inv_std = 1.0 / torch.sqrt((centered * centered).mean(-1, keepdim=True) + eps)
        xhat = centered * inv_std
        return xhat * gamma + beta, (xhat, inv_std)

    def backward(self, g, xs, out, attrs, saved):
        x, gamma, _ = xs
        xhat, inv_std = saved
        d = x.shape[-1]
        lead = tuple(range(x.dim() - 1))
        g_beta = g.sum(lead) if lead else g.clone()
        g_gamma = (g * xhat).sum(lead) if lead else g * xhat
        gxhat = g * gamma
        gx = inv_std / d * (
            d * gxhat - gxhat.sum(-1, keepdim=True) - xhat * (gxhat * xhat).sum(-1, keepdim=True)
        )
        return gx, g_gamma, g_beta


class Sum(Primitive):
    kind = "sum"

    def forward(self, xs, attrs):
        axes = _axes(attrs.get("axis"), xs[0].dim())
        return xs[0].sum(dim=axes, keepdim=attrs.get("keepdims", False)) if axes else xs[0].clone(), None

    def backward(self, g, xs, out, attrs, saved):
        axes = _axes(attrs.get("axis"), xs[0].dim())
        return (_expand_reduced(g, xs[0].shape, axes, attrs.get("keepdims", False)).clone(),)


class Mean(Primitive):
    kind = "mean"

    def forward(self, xs, attrs):
        axes = _axes(attrs.get("axis"), xs[0].dim())
        return xs[0].mean(dim=axes, keepdim=attrs.get("keepdims", False)) if axes else xs[0].clone(), None

    def backward(self, g, xs, out, attrs, saved):
        x = xs[0]
        axes = _axes(attrs.get("axis"), x.dim())
        count = 1
        for a in axes:
            count *= x.shape[a]
        return (_expand_reduced(g, x.shape, axes, attrs.get("keepdims", False)) / count,)


class Max(Primitive):
    """Max over one axis (or all); gradient flows to the first maximal entry."""

    kind = "max"

    def forward(self, xs, attrs):
        x = xs[0]
        axis = attrs.get("axis")
        keep = attrs.get("keepdims", False)
        if axis is None:
            flat = x.reshape(-1)
            idx = torch.argmax(flat)
            out = flat[idx].reshape([1] * x.dim() if keep else [])
            return out, idx
        idx = torch.argmax(x, dim=axis, keepdim=True)
        out = torch.gather(x, axis, idx)
        return (out if keep else out.squeeze(axis)), idx

    def backward(self, g, xs, out, attrs, saved):
        x = xs[0]
        axis = attrs.get("axis")
        gx = torch.zeros_like(x)
        if axis is None:
            gx.reshape(-1)[saved] = g.reshape(-1)[0]
            return (gx,)
        gk = g if attrs.get("keepdims", False) else g.unsqueeze(axis)
        gx.scatter_(axis, saved, gk)
        return (gx,)


class Concat(Primitive):
    kind = "concat"
    arity = None

    def check(self, xs, attrs):
        if not xs:
            self._fail(xs, "nothing to concatenate")
        axis = attrs.get("axis", 0)
        ref = list(xs[0].shape)
        for x in xs[1:]:
            other = list(x.shape)
            if len(other) != len(ref):
                self._fail(xs, "ranks differ")
            ax = axis % len(ref)
            if other[:ax] + other[ax + 1:] != ref[:ax] + ref[ax + 1:]:
                self._fail(xs, f"non-concat axes differ (axis={axis})")

    def forward(self, xs, attrs):
        return torch.cat(xs, dim=attrs.get("axis", 0)), None

    def backward(self, g, xs, out, attrs, saved):
        axis = attrs.get("axis", 0)
        return tuple(torch.split(g, [x.shape[axis] for x in xs], dim=axis))


class Reshape(Primitive):
    kind = "reshape"

    def check(self, xs, attrs):
        super().check(xs, attrs)
        try:
            xs[0].reshape(tuple(attrs["shape"]))
        except RuntimeError:
            self._fail(xs, f"cannot reshape to {list(attrs['shape'])}")

    def forward(self, xs, attrs):
        return xs[0].reshape(tuple(attrs["shape"])), None

    def backward(self, g, xs, out, attrs, saved):
        return (g.reshape(xs[0].shape),)


class Transpose(Primitive):
    kind = "transpose"

    @staticmethod
    def _perm(x, attrs):
        perm = attrs.get("perm")
        if perm is None:
            perm = list(range(x.dim()))
            perm[-2], perm[-1] = perm[-1], perm[-2]
        return tuple(perm)

    def check(self, xs, attrs):
        super().check(xs, attrs)
        perm = attrs.get("perm")
        if perm is None and xs[0].dim() < 2:
            self._fail(xs, "default transpose needs rank >= 2")
        if perm is not None and sorted(perm) != list(range(xs[0].dim())):
            self._fail(xs, f"invalid permutation {list(perm)}")

    def forward(self, xs, attrs):
        return xs[0].permute(self._perm(xs[0], attrs)), None

    def backward(self, g, xs, out, attrs, saved):
        perm = self._perm(xs[0], attrs)
        inverse = tuple(int(i) for i in np.argsort(perm))
        return (g.permute(inverse),)


class Upsample2x(Primitive):
    """Nearest-neighbour x2 on the last two axes."""

    kind = "upsample2x"

    def check(self, xs, attrs):
        super().check(xs, attrs)
        if xs[0].dim() < 2:
            self._fail(xs, "needs rank >= 2")

    def forward(self, xs, attrs):
        return xs[0].repeat_interleave(2, dim=-2).repeat_interleave(2, dim=-1), None

    def backward(self, g, xs, out, attrs, saved):
        x = xs[0]
        lead = tuple(x.shape[:-2])
        h, w = x.shape[-2], x.shape[-1]
        return (g.reshape(*lead, h, 2, w, 2).sum(dim=(-3, -1)),)


class GatherRows(Primitive):
    kind = "gather_rows"

    def check(self, xs, attrs):
        super().check(xs, attrs)
        idx = torch.as_tensor(attrs["index"], dtype=torch.long).reshape(-1)
        if xs[0].dim() < 1:
            self._fail(xs, "cannot gather rows of a scalar")
        if idx.numel() and (int(idx.min()) < 0 or int(idx.max()) >= xs[0].shape[0]):
            self._fail(xs, f"row index out of range [0, {xs[0].shape[0]})")

    def forward(self, xs, attrs):
        idx = torch.as_tensor(attrs["index"], dtype=torch.long).reshape(-1)
        return xs[0].index_select(0, idx), idx

    def backward(self, g, xs, out, attrs, saved):
        gx = torch.zeros_like(xs[0])
        gx.index_add_(0, saved, g)
        return (gx,)


PRIMITIVES: Dict[str, Primitive] = {
    prim.kind: prim
    for prim in (
        MatMul(), Conv2d(), Add(), Sub(), Mul(), Div(), ScalarMul(), Relu(), Sigmoid(), Exp(), Log(),
        Softmax(), LogSoftmax(), LayerNorm(), Mean(), Sum(), Max(), Concat(), Reshape(), Transpose(),
        Upsample2x(), GatherRows(),
    )
}


def apply_primitive(kind: str, inputs: Sequence[Tensor], attrs: Optional[Dict[str, Any]] = None) -> Tensor:
    prim = PRIMITIVES.get(kind)
    if prim is None:
        raise ValueError(f"[clickvos.apply_primitive] unknown primitive '{kind}'")
    attrs = dict(attrs or {})
    inputs = [_as_tensor(t) for t in inputs]
    xs = [t.data for t in inputs]
    prim.check(xs, attrs)
    out, saved = prim.forward(xs, attrs)
    if not bool(torch.isfinite(out).all()):
        raise NumericOverflowError(kind, [x.shape for x in xs])

    needs_grad = grad_enabled() and any(t.requires_grad for t in inputs)
    result = Tensor._wrap(out, requires_grad=needs_grad)
    if needs_grad:
        node = Node(kind, list(inputs), result, attrs, saved)
        current_graph().record(node)
        result._node = node
    return result
