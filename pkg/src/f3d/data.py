"""Dataset files, point sampling, and training-sample assembly.

The observation file (magic "F3DE") is a plain little-endian record of
frames and actions. Exact flow targets additionally need per-frame scene
state, which lives in a sidecar (magic "F3DS") written next to the main
file; the loader attaches it when present and sets `tracks_available`.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .episode import Episode
from .world.scene import Box, COLOR_NAMES, Scene, make_embodiment
from .world.tracks import classify_moving, moving_pixel_mask, track_points

MAGIC = b"F3DE"
VERSION = 1
SIDECAR_MAGIC = b"F3DS"
SIDECAR_VERSION = 1


class DatasetError(ValueError):
    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


# ---------------------------------------------------------------------------
# observation file

def write_dataset(path, episodes, sidecar=True):
    """Write episodes to `path`; scene states go to a '.f3ds' sidecar."""
    path = Path(path)
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<II", VERSION, len(episodes)))
        for ep in episodes:
            n = ep.frame_count
            h, w = ep.frame_shape
            f.write(struct.pack("<IIHH", ep.language_id, n, h, w))
            for i in range(n):
                f.write(np.ascontiguousarray(ep.rgb_main[i], dtype="<f4").tobytes())
                f.write(np.ascontiguousarray(ep.depth_main[i], dtype="<f4").tobytes())
                f.write(np.ascontiguousarray(ep.rgb_wrist[i], dtype="<f4").tobytes())
                f.write(np.ascontiguousarray(ep.depth_wrist[i], dtype="<f4").tobytes())
                f.write(np.ascontiguousarray(ep.proprio[i], dtype="<f4").tobytes())
                f.write(np.ascontiguousarray(ep.actions[i], dtype="<f4").tobytes())
    if sidecar and all(ep.states is not None for ep in episodes):
        _write_sidecar(path.with_suffix(".f3ds"), episodes)


def read_dataset(path):
    """Read episodes; attaches exact scene states if the sidecar exists."""
    path = Path(path)
    with open(path, "rb") as f:
        data = f.read()
    pos = 0

    def need(nbytes, what):
        nonlocal pos
        if pos + nbytes > len(data):
            raise DatasetError(f"truncated dataset while reading {what}", offset=pos)
        chunk = data[pos:pos + nbytes]
        pos += nbytes
        return chunk

    if need(4, "magic") != MAGIC:
        raise DatasetError("bad magic, not a dataset file", offset=0)
    version, count = struct.unpack("<II", need(8, "header"))
    if version != VERSION:
        raise DatasetError(f"unsupported dataset version {version} (reader supports {VERSION})", offset=4)

    episodes = []
    for _ in range(count):
        lang, n, h, w = struct.unpack("<IIHH", need(12, "episode header"))
        rgb_main = np.empty((n, h, w, 3), dtype=np.float32)
        depth_main = np.empty((n, h, w), dtype=np.float32)
        rgb_wrist = np.empty((n, h, w, 3), dtype=np.float32)
        depth_wrist = np.empty((n, h, w), dtype=np.float32)
        proprio = np.empty((n, 7), dtype=np.float32)
        actions = np.empty((n, 7), dtype=np.float32)
        for i in range(n):
            rgb_main[i] = np.frombuffer(need(h * w * 12, "rgb_main"), "<f4").reshape(h, w, 3)
            depth_main[i] = np.frombuffer(need(h * w * 4, "depth_main"), "<f4").reshape(h, w)
            rgb_wrist[i] = np.frombuffer(need(h * w * 12, "rgb_wrist"), "<f4").reshape(h, w, 3)
            depth_wrist[i] = np.frombuffer(need(h * w * 4, "depth_wrist"), "<f4").reshape(h, w)
            proprio[i] = np.frombuffer(need(28, "proprio"), "<f4")
            actions[i] = np.frombuffer(need(28, "action"), "<f4")
        episodes.append(Episode(language_id=lang, rgb_main=rgb_main, depth_main=depth_main,
                                rgb_wrist=rgb_wrist, depth_wrist=depth_wrist,
                                proprio=proprio, actions=actions))
    sidecar = path.with_suffix(".f3ds")
    if sidecar.exists():
        _read_sidecar(sidecar, episodes)
    return episodes


# ---------------------------------------------------------------------------
# scene-state sidecar

def _write_sidecar(path, episodes):
    with open(path, "wb") as f:
        f.write(SIDECAR_MAGIC)
        f.write(struct.pack("<II", SIDECAR_VERSION, len(episodes)))
        for ep in episodes:
            emb = ep.states[0].embodiment.name.encode()
            f.write(struct.pack("<H", len(emb)))
            f.write(emb)
            objs = ep.states[0].objects
            f.write(struct.pack("<II", len(objs), len(ep.states)))
            for obj in objs:
                f.write(np.asarray(obj.half, "<f8").tobytes())
                f.write(struct.pack("<I", COLOR_NAMES.index(obj.color)))
            for st in ep.states:
                for obj in st.objects:
                    f.write(np.asarray(obj.center, "<f8").tobytes())
                f.write(np.asarray(st.gripper_pose, "<f8").tobytes())
                f.write(struct.pack("<bi", 1 if st.gripper_closed else 0,
                                    -1 if st.held is None else st.held))


def _read_sidecar(path, episodes):
    with open(path, "rb") as f:
        data = f.read()
    pos = 0

    def need(nbytes, what):
        nonlocal pos
        if pos + nbytes > len(data):
            raise DatasetError(f"truncated sidecar while reading {what}", offset=pos)
        chunk = data[pos:pos + nbytes]
        pos += nbytes
        return chunk

    if need(4, "magic") != SIDECAR_MAGIC:
        raise DatasetError("bad sidecar magic", offset=0)
    version, count = struct.unpack("<II", need(8, "header"))
    if version != SIDECAR_VERSION:
        raise DatasetError(f"unsupported sidecar version {version}", offset=4)
    if count != len(episodes):
        raise DatasetError(f"sidecar lists {count} episodes, dataset has {len(episodes)}")
    for ep in episodes:
        (name_len,) = struct.unpack("<H", need(2, "embodiment name"))
        emb = make_embodiment(need(name_len, "embodiment name").decode())
        n_obj, n_frames = struct.unpack("<II", need(8, "sidecar episode header"))
        if n_frames != ep.frame_count:
            raise DatasetError(f"sidecar frame count {n_frames} != dataset {ep.frame_count}")
        halves, colors = [], []
        for _ in range(n_obj):
            halves.append(np.frombuffer(need(24, "half extents"), "<f8").copy())
            (ci,) = struct.unpack("<I", need(4, "color"))
            colors.append(COLOR_NAMES[ci])
        states = []
        for _ in range(n_frames):
            boxes = []
            for j in range(n_obj):
                center = np.frombuffer(need(24, "center"), "<f8").copy()
                boxes.append(Box(center=center, half=halves[j], color=colors[j]))
            pose = np.frombuffer(need(48, "gripper pose"), "<f8").copy()
            closed, held = struct.unpack("<bi", need(5, "gripper state"))
            states.append(Scene(objects=tuple(boxes), gripper_pose=pose,
                                gripper_closed=bool(closed), held=None if held < 0 else held,
                                held_offset=None, embodiment=emb))
        ep.states = states


# ---------------------------------------------------------------------------
# point sampling

def grid_pixels(P, height, width):
    """The deterministic inference grid: g = ceil(sqrt(P)), pixel centers
    ((i + 0.5) * W / g, (j + 0.5) * H / g), row-major, first P points."""
    if P > height * width:
        raise ValueError(f"cannot sample {P} points from a {height}x{width} frame")
    g = int(np.ceil(np.sqrt(P)))
    xs = (np.arange(g) + 0.5) * width / g
    ys = (np.arange(g) + 0.5) * height / g
    gy, gx = np.meshgrid(ys, xs, indexing="ij")
    pts = np.stack([gx.reshape(-1), gy.reshape(-1)], axis=-1)
    return pts[:P]


def sample_points(episode, t, P, mode, rng=None, flow_len=6):
    """Starting pixels for flow tracking.

    infer: the exact uniform grid. train: grid jittered within +-half cell,
    then rebalanced toward 1 moving : 3 static whenever the frame offers at
    least P/4 moving-surface pixels.
    """
    h, w = episode.frame_shape
    pts = grid_pixels(P, h, w)
    if mode == "infer":
        return pts
    if mode != "train":
        raise ValueError(f"unknown sampling mode {mode!r}")
    if rng is None:
        raise ValueError("train sampling needs an rng")
    g = int(np.ceil(np.sqrt(P)))
    pts = pts + rng.uniform(-0.5, 0.5, size=pts.shape) * np.array([w / g, h / g])
    pts[:, 0] = np.clip(pts[:, 0], 0, w - 1)
    pts[:, 1] = np.clip(pts[:, 1], 0, h - 1)

    target_moving = int(round(P / 4))
    mask, _ = moving_pixel_mask(episode, t, flow_len)
    flags = classify_moving(episode, t, pts, flow_len)
    moving_idx = np.flatnonzero(flags)
    static_idx = np.flatnonzero(~flags)

    if len(moving_idx) > target_moving:
        # demote surplus moving points to random static pixels
        surplus = rng.permutation(moving_idx)[:len(moving_idx) - target_moving]
        static_cells = np.argwhere(~mask)
        pick = static_cells[rng.integers(len(static_cells), size=len(surplus))]
        pts[surplus, 0] = pick[:, 1]
        pts[surplus, 1] = pick[:, 0]
    elif len(moving_idx) < target_moving:
        moving_cells = np.argwhere(mask)
        want = min(target_moving - len(moving_idx), len(moving_cells), len(static_idx))
        if want > 0:
            promote = rng.permutation(static_idx)[:want]
            pick = moving_cells[rng.choice(len(moving_cells), size=want, replace=False)]
            pts[promote, 0] = pick[:, 1]
            pts[promote, 1] = pick[:, 0]
    return pts


# ---------------------------------------------------------------------------
# training samples

@dataclass
class TrainSample:
    language_id: int
    rgb_main: np.ndarray        # (T, H, W, 3)
    rgb_wrist: np.ndarray
    proprio: np.ndarray         # (T, 7)
    depth_main: np.ndarray      # (H, W) current-depth target, main view
    depth_wrist: np.ndarray
    future_rgb_main: np.ndarray     # (H, W, 3) at t+S (clamped)
    future_depth_main: np.ndarray
    future_rgb_wrist: np.ndarray
    future_depth_wrist: np.ndarray
    points: np.ndarray          # (P, 2) starting pixels
    flow: np.ndarray            # (L, P, 3)
    actions: np.ndarray         # (K, 7)


def make_train_sample(episode, t, T, S, K, L, P, rng=None, mode="train"):
    """Windows are left-padded by repeating the first frame; future, flow and
    action targets clamp at the episode end (repeat last frame / hold)."""
    n = episode.frame_count
    if not 0 <= t < n:
        raise ValueError(f"frame index {t} outside episode of {n} frames")
    idx = np.clip(np.arange(t - T + 1, t + 1), 0, n - 1)
    fut = min(t + S, n - 1)

    acts = np.empty((K, 7), dtype=np.float32)
    hold = np.zeros(7, dtype=np.float32)
    hold[6] = episode.actions[n - 1, 6]
    for j in range(K):
        acts[j] = episode.actions[t + j] if t + j < n else hold

    points = sample_points(episode, t, P, mode=mode, rng=rng, flow_len=L)
    flow = track_points(episode, t, points, L)

    return TrainSample(
        language_id=episode.language_id,
        rgb_main=episode.rgb_main[idx],
        rgb_wrist=episode.rgb_wrist[idx],
        proprio=episode.proprio[idx],
        depth_main=episode.depth_main[t],
        depth_wrist=episode.depth_wrist[t],
        future_rgb_main=episode.rgb_main[fut],
        future_depth_main=episode.depth_main[fut],
        future_rgb_wrist=episode.rgb_wrist[fut],
        future_depth_wrist=episode.depth_wrist[fut],
        points=points.astype(np.float32),
        flow=flow,
        actions=acts,
    )


def batch_samples(samples):
    """Stack a list of TrainSamples into arrays with a leading batch dim."""
    out = {}
    for name in ("rgb_main", "rgb_wrist", "proprio", "depth_main", "depth_wrist",
                 "future_rgb_main", "future_depth_main", "future_rgb_wrist",
                 "future_depth_wrist", "points", "flow", "actions"):
        out[name] = np.stack([getattr(s, name) for s in samples])
    out["language_id"] = np.array([s.language_id for s in samples], dtype=np.int64)
    return out


def draw_batch(episodes, batch, T, S, K, L, P, rng):
    """Uniform (episode, t) draws; deterministic under the rng."""
    samples = []
    for _ in range(batch):
        ep = episodes[int(rng.integers(len(episodes)))]
        t = int(rng.integers(ep.frame_count))
        samples.append(make_train_sample(ep, t, T=T, S=S, K=K, L=L, P=P, rng=rng))
    return batch_samples(samples)
