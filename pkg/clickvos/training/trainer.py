"""Training by simulating inference on short windows of synthetic sequences."""

import csv
import dataclasses
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence

import numpy as np
import torch

from ..annotation.points import annotate_first_frame
from ..data.video import VideoSample
from ..engine.checkpoint import save_checkpoint
from ..engine.optim import Adam
from ..engine.tensor import Graph
from ..errors import ConfigError, DivergenceError, NumericError
from ..evaluation.report import evaluate
from ..model.abs_net import ABSNet, save_model
from ..model.config import ModelConfig, coerce_fields
from .losses import loss_bootstrapped_ce, loss_dice


log = logging.getLogger(__name__)

METRICS_HEADER = ("step", "ce", "dice", "total", "val_J", "val_F")


@dataclass
class TrainConfig:
    t_train: int = 4
    batch_size: int = 4
    steps: int = 1000
    lr: float = 3e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    bootstrap_ratio: float = 0.4
    ce_weight: float = 1.0
    dice_weight: float = 1.0
    seed: int = 0
    eval_every: int = 0
    detach_memory: bool = False
    lr_drop_step: int = 0
    lr_drop_to: float = 1e-6

    @classmethod
    def from_dict(cls, data: Mapping[str, Any], strict: bool = True) -> "TrainConfig":
        config = cls(**coerce_fields(cls, data, strict=strict))
        config.validate()
        return config

    def to_dict(self) -> Dict[str, Any]:
        return dataclasses.asdict(self)

    def validate(self) -> None:
        if not 0.0 < self.bootstrap_ratio <= 1.0:
            raise ConfigError(f"[clickvos.TrainConfig] bootstrap_ratio must lie in (0, 1], got {self.bootstrap_ratio}")
        if self.t_train < 2:
            raise ConfigError(f"[clickvos.TrainConfig] t_train must be >= 2, got {self.t_train}")
        if self.batch_size < 1 or self.steps < 0 or self.eval_every < 0 or self.lr_drop_step < 0:
            raise ConfigError("[clickvos.TrainConfig] batch_size must be >= 1 and step counts >= 0")
        if self.lr <= 0 or self.lr_drop_to <= 0:
            raise ConfigError("[clickvos.TrainConfig] learning rates must be positive")


@dataclass
class StepMetrics:
    step: int
    ce: float
    dice: float
    total: float
    val_j: Optional[float] = None
    val_f: Optional[float] = None

    def row(self) -> List[str]:
        def fmt(v):
            return "" if v is None else f"{v:.6f}"
        return [str(self.step), fmt(self.ce), fmt(self.dice), fmt(self.total), fmt(self.val_j), fmt(self.val_f)]


@dataclass
class TrainResult:
    model: ABSNet
    metrics: List[StepMetrics] = field(default_factory=list)


def write_metrics(path, metrics: Sequence[StepMetrics]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(METRICS_HEADER)
        for m in metrics:
            writer.writerow(m.row())
    return path


def validate_model(model: ABSNet, samples: Sequence[VideoSample], seed: int = 0):
    """Held-out J and F with fixed-seed clicks."""
    pred, gt = {}, {}
    for i, sample in enumerate(samples):
        name = sample.name or f"val_{i:04d}"
        points = annotate_first_frame(sample.masks[0], seed + i)
        pred[name] = model.infer_video(sample, points).masks
        gt[name] = sample.masks
    report = evaluate(pred, gt)
    return report.j, report.f


class Trainer:

    def __init__(
        self,
        model: ABSNet,
        config: TrainConfig,
        samples: Sequence[VideoSample],
        val_samples: Sequence[VideoSample] = (),
        checkpoint_path=None,
    ):
        if not samples:
            raise ConfigError("[clickvos.Trainer] training set is empty")
        config.validate()
        self.model = model
        self.config = config
        self.samples = list(samples)
        self.val_samples = list(val_samples)
        self.checkpoint_path = Path(checkpoint_path) if checkpoint_path else None
        self.rng = np.random.default_rng(config.seed)
        self.optimizer = Adam(
            model.parameters(),
            lr=config.lr,
            betas=(config.beta1, config.beta2),
            eps=config.eps,
            lr_drop_step=config.lr_drop_step,
            lr_drop_to=config.lr_drop_to,
        )
        self.metrics: List[StepMetrics] = []
        # parameters whose last evaluated loss was finite
        self.last_good: Dict[str, np.ndarray] = model.state_dict()

    def _window(self) -> VideoSample:
        sample = self.samples[int(self.rng.integers(len(self.samples)))]
        length = min(self.config.t_train, sample.num_frames)
        starts = [s for s in range(sample.num_frames - length + 1) if sample.first_frame_complete(s)]
        start = starts[int(self.rng.integers(len(starts)))] if starts else 0
        return sample.window(start, length)

    def _sequence_loss(self, window: VideoSample):
        points = annotate_first_frame(window.masks[0], self.rng)
        out = self.model.forward_sequence(window.frames, window.flow_images, points,
                                          detach_memory=self.config.detach_memory)
        ce_total = dice_total = None
        for logits, gt in zip(out.logits, window.masks):
            ce = loss_bootstrapped_ce(logits, gt, self.config.bootstrap_ratio)
            dice = loss_dice(logits, gt)
            ce_total = ce if ce_total is None else ce_total + ce
            dice_total = dice if dice_total is None else dice_total + dice
        return ce_total, dice_total

    def _diverged(self, step: int, cause: Optional[BaseException] = None):
        path = None
        if self.checkpoint_path is not None:
            path = self.checkpoint_path.with_name(self.checkpoint_path.stem + ".last_good" + self.checkpoint_path.suffix)
            save_checkpoint(path, self.last_good, self.model.config.to_dict())
        log.error(f"[clickvos.Trainer] divergence at step {step}; last good parameters at {path}")
        error = DivergenceError(step, str(path) if path else None)
        if cause is not None:
            raise error from cause
        raise error

    def step(self, step: int) -> StepMetrics:
        self.optimizer.zero_grad()
        ce_sum = dice_sum = 0.0
        scale = 1.0 / self.config.batch_size
        for _ in range(self.config.batch_size):
            window = self._window()
            with Graph() as graph:
                try:
                    ce, dice = self._sequence_loss(window)
                    total = ce * self.config.ce_weight + dice * self.config.dice_weight
                except NumericError as e:
                    self._diverged(step, e)
                if not math.isfinite(total.item()):
                    self._diverged(step)
                graph.backward(total * scale)
            ce_sum += ce.item()
            dice_sum += dice.item()

        for p in self.optimizer.params:
            if p.grad is not None and not bool(torch.isfinite(p.grad).all()):
                self._diverged(step)
        self.last_good = self.model.state_dict()
        self.optimizer.step()

        ce_mean, dice_mean = ce_sum * scale, dice_sum * scale
        metrics = StepMetrics(step, ce_mean, dice_mean,
                              self.config.ce_weight * ce_mean + self.config.dice_weight * dice_mean)
        log.debug(f"[clickvos.Trainer] step {step}: ce={metrics.ce:.4f} dice={metrics.dice:.4f}")
        return metrics

    def run(self) -> TrainResult:
        log.info(f"[clickvos.Trainer] training {self.config.steps} step(s) on {len(self.samples)} sequence(s), "
                 f"lr={self.config.lr:g}, batch={self.config.batch_size}, T={self.config.t_train}")
        for step in range(self.config.steps):
            metrics = self.step(step)
            last = step == self.config.steps - 1
            if self.val_samples and self.config.eval_every and ((step + 1) % self.config.eval_every == 0 or last):
                metrics.val_j, metrics.val_f = validate_model(self.model, self.val_samples, self.config.seed)
                log.info(f"[clickvos.Trainer] step {step}: total={metrics.total:.4f} "
                         f"val J={metrics.val_j:.4f} F={metrics.val_f:.4f}")
            self.metrics.append(metrics)
        if self.checkpoint_path is not None:
            save_model(self.model, self.checkpoint_path)
        return TrainResult(self.model, self.metrics)


def train(
    config: TrainConfig,
    dataset: Sequence[VideoSample],
    model_config: Optional[ModelConfig] = None,
    val_samples: Sequence[VideoSample] = (),
    checkpoint_path=None,
    metrics_path=None,
) -> TrainResult:
    model = ABSNet(model_config or ModelConfig())
    result = Trainer(model, config, dataset, val_samples, checkpoint_path).run()
    if metrics_path is not None:
        write_metrics(metrics_path, result.metrics)
        log.info(f"[clickvos.train] metrics written to {metrics_path}")
    return result
