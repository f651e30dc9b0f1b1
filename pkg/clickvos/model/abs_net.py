"""The ABS network and its frame-by-frame inference loop."""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from ..annotation.points import PointSet
from ..data.video import VideoSample
from ..engine.checkpoint import load_checkpoint, save_checkpoint
from ..engine.layers import Module, make_generator
from ..engine.tensor import Tensor, no_grad
from ..errors import ConfigError
from .config import ModelConfig
from .decoder import Decoder, labels_from_logits
from .encoder import BimodalEncoder, FeatureMap
from .memory import MemoryState, memory_update
from .segment_attention import SegmentAttention
from .tokens import IdentityBank, make_dense_tokens, mask_pool, point_tokenize


log = logging.getLogger(__name__)


@dataclass
class SequenceOutput:
    logits: List[Tensor] = field(default_factory=list)
    masks: List[np.ndarray] = field(default_factory=list)
    trace: List[Dict[str, int]] = field(default_factory=list)
    memory: Optional[MemoryState] = None


@dataclass
class InferenceResult:
    masks: np.ndarray                          # T x H x W, uint8
    trace: List[Dict[str, int]] = field(default_factory=list)


class ABSNet(Module):

    def __init__(self, config: Optional[ModelConfig] = None):
        self.config = config or ModelConfig()
        self.config.validate()
        gen = make_generator(self.config.seed)
        c = self.config.channels
        self.encoder = BimodalEncoder(self.config, gen)
        self.bank = IdentityBank(self.config.max_objects, c, gen)
        self.segment_attention = SegmentAttention(c, self.config.n_heads, gen, self.config.ln_eps)
        self.decoder = Decoder(self.config, gen)

    def encode(self, image, flow_image) -> FeatureMap:
        return self.encoder(image, flow_image)

    def _check_points(self, points: PointSet) -> List[int]:
        ids = points.ids
        if not ids or ids[0] != 0:
            raise ConfigError("[clickvos.ABSNet] points need a background point (id 0)")
        if max(ids) >= self.config.max_objects:
            raise ConfigError(
                f"[clickvos.ABSNet] object id {max(ids)} needs max_objects > {max(ids)}, "
                f"model has {self.config.max_objects}"
            )
        return ids

    def forward_sequence(
        self,
        frames: Sequence[np.ndarray],
        flow_images: Sequence[np.ndarray],
        points: PointSet,
        first_mask_override: Optional[np.ndarray] = None,
        detach_memory: bool = False,
    ) -> SequenceOutput:
        """Segment frames in order, feeding predicted masks back into memory.

        ``first_mask_override`` replaces the decoded frame-1 mask for memory
        construction only; the returned frame-1 prediction is unchanged.
        """
        ids = self._check_points(points)
        stride = self.config.stride
        out = SequenceOutput()
        memory = None
        for t in range(len(frames)):
            fmap = self.encode(frames[t], flow_images[t]).features
            if memory is None:
                memory = MemoryState.seeded(
                    point_tokenize(fmap, points, self.bank, stride),
                    objmem=self.config.objmem,
                    dense_enabled=self.config.dense_memory,
                )
            out.trace.append({"frame": t + 1, **memory.trace()})

            embedding = self.segment_attention(fmap, memory.keys(), memory.values())
            logits = self.decoder(embedding, fmap)
            mask = labels_from_logits(logits.data.numpy(), ids)
            out.logits.append(logits)
            out.masks.append(mask)

            memory_mask = first_mask_override if (t == 0 and first_mask_override is not None) else mask
            pooled = mask_pool(fmap, memory_mask, self.bank, stride, ids)
            dense = make_dense_tokens(fmap, memory_mask, self.bank, stride) if self.config.dense_memory else None
            if detach_memory:
                pooled = pooled.detach()
                dense = dense.detach() if dense is not None else None
            memory = memory_update(memory, pooled, dense)
        out.memory = memory
        return out

    def infer_video(
        self,
        sample: VideoSample,
        points: PointSet,
        first_mask_override: Optional[np.ndarray] = None,
    ) -> InferenceResult:
        with no_grad():
            out = self.forward_sequence(sample.frames, sample.flow_images, points, first_mask_override)
        log.debug(f"[clickvos.infer_video] '{sample.name}': {len(out.masks)} frame(s), "
                  f"final key rows {out.trace[-1]['key_rows'] if out.trace else 0}")
        return InferenceResult(np.stack(out.masks).astype(np.uint8), out.trace)


def save_model(model: ABSNet, path) -> Path:
    return save_checkpoint(path, model.state_dict(), model.config.to_dict())


def load_model(path, **overrides) -> ABSNet:
    """Rebuild the network from a checkpoint and its config sidecar.

    ``overrides`` may change memory policy fields (objmem, densemem) without
    touching the stored architecture.
    """
    params, stored = load_checkpoint(path)
    config = ModelConfig.from_dict(stored or {})
    if overrides:
        config = config.replace(**{k: v for k, v in overrides.items() if v is not None})
    model = ABSNet(config)
    model.load_state_dict(params)
    log.info(f"[clickvos.load_model] loaded {len(params)} tensors from {path} ({config.modality}, "
             f"objmem={config.objmem}, densemem={config.densemem})")
    return model
