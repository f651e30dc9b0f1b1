import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Sequence

import torch

from .tensor import Graph, Tensor, no_grad


log = logging.getLogger(__name__)


@dataclass
class GradCheckEntry:
    name: str
    max_rel_error: float
    finite: bool = True


@dataclass
class GradCheckReport:
    tol: float
    entries: List[GradCheckEntry] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(e.finite and e.max_rel_error <= self.tol for e in self.entries)

    @property
    def worst(self) -> float:
        return max((e.max_rel_error for e in self.entries), default=0.0)

    def as_dict(self) -> Dict[str, float]:
        return {e.name: e.max_rel_error for e in self.entries}


def grad_check(
    scalar_fn: Callable[[], Tensor],
    inputs: Sequence[Tensor],
    h: float = 1e-6,
    tol: float = 1e-3,
) -> GradCheckReport:
    """Compare backward gradients with central finite differences.

    ``scalar_fn`` rebuilds the graph from ``inputs`` each call. The relative
    error of one input is max|analytic - numeric| / max(max|analytic|,
    max|numeric|), taken as 0 when both gradients vanish.
    """
    if h <= 0:
        raise ValueError(f"[clickvos.grad_check] step must be positive, got {h}")

    for t in inputs:
        t.grad = None
    with Graph() as graph:
        out = scalar_fn()
        if out.requires_grad:
            graph.backward(out)
    analytic = [t.grad.clone() if t.grad is not None else torch.zeros_like(t.data) for t in inputs]

    report = GradCheckReport(tol=tol)
    with no_grad():
        for i, t in enumerate(inputs):
            numeric = torch.zeros_like(t.data)
            flat = numeric.reshape(-1)
            original = t.data.clone()
            finite = True
            for j in range(original.numel()):
                plus = original.clone()
                plus.reshape(-1)[j] += h
                t.data = plus
                f_plus = scalar_fn().item()
                minus = original.clone()
                minus.reshape(-1)[j] -= h
                t.data = minus
                f_minus = scalar_fn().item()
                estimate = (f_plus - f_minus) / (2.0 * h)
                if not math.isfinite(estimate):
                    finite = False
                flat[j] = estimate
            t.data = original

            scale = max(float(analytic[i].abs().max()) if analytic[i].numel() else 0.0,
                        float(numeric.abs().max()) if numeric.numel() else 0.0)
            diff = float((analytic[i] - numeric).abs().max()) if numeric.numel() else 0.0
            rel = 0.0 if scale == 0.0 else diff / scale
            name = t.name or f"input{i}"
            report.entries.append(GradCheckEntry(name, rel if finite else math.inf, finite))
            log.debug(f"[clickvos.grad_check] {name}: max relative error {rel:.3e}")
    return report
