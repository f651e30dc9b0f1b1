import logging
from typing import List, Sequence

import torch

from .tensor import Tensor


log = logging.getLogger(__name__)


class Adam:
    """Adam with an optional single step drop of the learning rate."""

    def __init__(
        self,
        params: Sequence[Tensor],
        lr: float = 3e-4,
        betas=(0.9, 0.999),
        eps: float = 1e-8,
        lr_drop_step: int = 0,
        lr_drop_to: float = 1e-6,
    ):
        self.params: List[Tensor] = list(params)
        self.base_lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.lr_drop_step = lr_drop_step
        self.lr_drop_to = lr_drop_to
        self.t = 0
        self.m = [torch.zeros_like(p.data) for p in self.params]
        self.v = [torch.zeros_like(p.data) for p in self.params]

    @property
    def lr(self) -> float:
        if self.lr_drop_step and self.t >= self.lr_drop_step:
            return self.lr_drop_to
        return self.base_lr

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None

    def step(self) -> None:
        self.t += 1
        lr = self.lr
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for i, p in enumerate(self.params):
            if p.grad is None:
                continue
            g = p.grad
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g
            m_hat = self.m[i] / bc1
            v_hat = self.v[i] / bc2
            # rebind rather than mutate: earlier graphs may still reference the old storage
            p.data = p.data - lr * m_hat / (torch.sqrt(v_hat) + self.eps)
        if self.lr_drop_step and self.t == self.lr_drop_step:
            log.info(f"[clickvos.Adam] learning rate dropped to {self.lr_drop_to:g} at step {self.t}")
