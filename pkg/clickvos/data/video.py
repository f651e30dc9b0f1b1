import logging
from dataclasses import dataclass, field, replace
from typing import List

import numpy as np


log = logging.getLogger(__name__)


@dataclass
class VideoSample:
    """One sequence: frames I_t, forward flow, flow images O_t and labels M_t.

    ``flow[t]`` holds the displacement from frame t-1 to frame t, sampled on
    frame t-1's pixel grid; ``flow[0]`` repeats ``flow[1]``.
    """

    frames: np.ndarray          # T x H x W x 3, float64 in [0, 1]
    flow: np.ndarray            # T x H x W x 2, float32 px/frame
    flow_images: np.ndarray     # T x H x W x 3, float64 in [-1, 1]
    masks: np.ndarray           # T x H x W, uint8 labels, 0 = background
    object_ids: List[int] = field(default_factory=list)
    v_max: float = 4.0
    seed: int = 0
    name: str = ""

    @property
    def num_frames(self) -> int:
        return int(self.frames.shape[0])

    @property
    def height(self) -> int:
        return int(self.frames.shape[1])

    @property
    def width(self) -> int:
        return int(self.frames.shape[2])

    @property
    def num_objects(self) -> int:
        return len(self.object_ids)

    def window(self, start: int, length: int) -> "VideoSample":
        stop = min(start + length, self.num_frames)
        return replace(
            self,
            frames=self.frames[start:stop],
            flow=self.flow[start:stop],
            flow_images=self.flow_images[start:stop],
            masks=self.masks[start:stop],
        )

    def first_frame_complete(self, t: int) -> bool:
        """Whether every object of the sequence is visible in frame index t."""
        present = set(np.unique(self.masks[t]).tolist())
        return all(i in present for i in self.object_ids)
