from .tensor import DTYPE, PRIMITIVES, Graph, Tensor, apply_primitive, current_graph, no_grad
from .gradcheck import GradCheckReport, grad_check
from .layers import Conv2d, LayerNorm, Linear, Module, MultiHeadAttention, make_generator
from .optim import Adam
