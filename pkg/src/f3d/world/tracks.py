"""Exact 3D point tracks from recorded scene states.

A point sampled at a pixel is anchored to the surface its ray hits (block,
gripper part, table or far-plane background) and then followed through the
surface's known rigid motion. Tracks report (pixel x, pixel y, metric
depth) in the main camera at every step, regardless of later occlusion.
"""

from __future__ import annotations

import numpy as np

from .geometry import rpy_matrix
from .render import ID_GRIPPER_BASE, ID_OBJECT_BASE, ID_TABLE, trace
from .scene import Scene


def track_points(episode, t, pixels, flow_len):
    """FlowTensor for `pixels` ((P, 2) float (x, y)) anchored at frame t.

    Returns (flow_len, P, 3) float32; frames past the episode end repeat the
    final state, so those track steps are constant.
    """
    if episode.states is None:
        raise ValueError("episode has no scene states; exact tracks unavailable")
    if len(pixels) == 0:
        return np.zeros((flow_len, 0, 3), dtype=np.float32)
    pixels = np.asarray(pixels, dtype=np.float64)
    h, w = episode.frame_shape
    if (pixels[:, 0].min() < 0 or pixels[:, 0].max() > w - 1
            or pixels[:, 1].min() < 0 or pixels[:, 1].max() > h - 1):
        raise ValueError("track points outside frame bounds")

    scene_t: Scene = episode.states[t]
    camera = scene_t.embodiment.main_camera
    res = trace(scene_t, camera, pixels)
    ids = res["ids"]
    hits = res["hit"]

    rot_t = rpy_matrix(*scene_t.gripper_pose[3:6])
    tip_t = scene_t.tip
    locals_ = np.empty_like(hits)
    kinds = np.empty(len(pixels), dtype=np.int32)  # 0 static, 1 object, 2 gripper
    which = np.zeros(len(pixels), dtype=np.int32)
    for p, sid in enumerate(ids):
        if sid >= ID_GRIPPER_BASE:
            kinds[p] = 2
            locals_[p] = rot_t.T @ (hits[p] - tip_t)
        elif sid >= ID_OBJECT_BASE:
            kinds[p] = 1
            which[p] = sid - ID_OBJECT_BASE
            locals_[p] = hits[p] - scene_t.objects[sid - ID_OBJECT_BASE].center
        else:
            kinds[p] = 0
            locals_[p] = hits[p]

    out = np.empty((flow_len, len(pixels), 3), dtype=np.float32)
    last = len(episode.states) - 1
    for step_i in range(flow_len):
        scene_k: Scene = episode.states[min(t + step_i, last)]
        world = locals_.copy()
        obj_pts = kinds == 1
        if obj_pts.any():
            centers = np.stack([scene_k.objects[j].center for j in which[obj_pts]])
            world[obj_pts] = locals_[obj_pts] + centers
        grip_pts = kinds == 2
        if grip_pts.any():
            rot_k = rpy_matrix(*scene_k.gripper_pose[3:6])
            world[grip_pts] = locals_[grip_pts] @ rot_k.T + scene_k.tip
        out[step_i] = camera.project(world).astype(np.float32)
    return out


def surface_motion(episode, t, flow_len, eps=1e-9):
    """Which surfaces move anywhere in the window [t, t+flow_len)?

    Returns (object_moving: (n_objects,) bool, gripper_moving: bool).
    """
    states = episode.states
    last = len(states) - 1
    hi = min(t + flow_len - 1, last)
    n_obj = len(states[t].objects)
    obj_moving = np.zeros(n_obj, dtype=bool)
    gripper_moving = False
    for k in range(t, hi):
        a, b = states[k], states[k + 1]
        for i in range(n_obj):
            if np.any(np.abs(a.objects[i].center - b.objects[i].center) > eps):
                obj_moving[i] = True
        if np.any(np.abs(a.gripper_pose - b.gripper_pose) > eps):
            gripper_moving = True
    return obj_moving, gripper_moving


def moving_pixel_mask(episode, t, flow_len):
    """(H, W) bool mask of pixels whose frame-t surface moves in the window."""
    scene_t: Scene = episode.states[t]
    camera = scene_t.embodiment.main_camera
    res = trace(scene_t, camera)
    ids = res["ids"].reshape(camera.height, camera.width)
    obj_moving, gripper_moving = surface_motion(episode, t, flow_len)
    mask = np.zeros_like(ids, dtype=bool)
    if gripper_moving:
        mask |= ids >= ID_GRIPPER_BASE
    for i, moving in enumerate(obj_moving):
        if moving:
            mask |= ids == ID_OBJECT_BASE + i
    return mask, ids


def classify_moving(episode, t, pixels, flow_len):
    """Per-point moving flags via each point's own anchor ray."""
    scene_t: Scene = episode.states[t]
    res = trace(scene_t, scene_t.embodiment.main_camera, np.asarray(pixels, dtype=np.float64))
    ids = res["ids"]
    obj_moving, gripper_moving = surface_motion(episode, t, flow_len)
    flags = np.zeros(len(ids), dtype=bool)
    for p, sid in enumerate(ids):
        if sid >= ID_GRIPPER_BASE:
            flags[p] = gripper_moving
        elif sid >= ID_OBJECT_BASE:
            flags[p] = bool(obj_moving[sid - ID_OBJECT_BASE])
    return flags
