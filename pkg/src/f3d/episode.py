"""Episode container shared by the world generators and the dataset store."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class Episode:
    """One demonstration. Frames are float32; actions align one per frame
    (the final frame carries a hold action). `states` is the per-frame scene
    record that makes exact depth/track oracles possible; file-loaded
    episodes only have it when the sidecar was present."""

    language_id: int
    rgb_main: np.ndarray      # (N, H, W, 3) in [0, 1]
    depth_main: np.ndarray    # (N, H, W) metric meters
    rgb_wrist: np.ndarray
    depth_wrist: np.ndarray
    proprio: np.ndarray       # (N, 7)
    actions: np.ndarray       # (N, 7)
    states: list | None = None      # per-frame Scene
    task_id: str | None = None

    @property
    def tracks_available(self):
        return self.states is not None

    @property
    def frame_count(self):
        return int(self.rgb_main.shape[0])

    @property
    def frame_shape(self):
        return int(self.rgb_main.shape[1]), int(self.rgb_main.shape[2])

    def __len__(self):
        return self.frame_count
