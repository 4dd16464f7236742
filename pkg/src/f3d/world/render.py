"""Per-pixel ray-cast renderer with exact z-buffer depth.

Depth is the camera-frame z of the nearest surface along each pixel ray;
pixels that hit nothing carry the far-plane constant. Shading is flat:
base color x face factor x a brightness factor tied to the depth of the
face *center*, so image brightness carries a mild, learnable depth cue
while staying constant across each face.
"""

from __future__ import annotations

import numpy as np

from .geometry import Camera
from .scene import (BACKGROUND_RGB, COLOR_RGB, FAR_PLANE, Scene, TABLE_HALF, TABLE_RGB)

NEAR = 0.01

ID_BACKGROUND = 0
ID_TABLE = 1
ID_OBJECT_BASE = 10    # object i -> 10 + i
ID_GRIPPER_BASE = 100  # gripper part j -> 100 + j

# flat-shading factor per local face (axis, sign)
_FACE_FACTOR = np.array([
    [0.72, 0.72],   # x-, x+
    [0.85, 0.62],   # y- (camera-facing), y+
    [0.50, 1.00],   # z- (bottom), z+ (top)
])


def shade(depth):
    """Brightness multiplier tied to depth; nearer is brighter."""
    return np.clip(1.08 - 0.75 * np.asarray(depth), 0.15, 1.0)


def _ray_box(origin, dirs, center, half, rot):
    """Slab intersection. Returns (t_enter, axis, sign) with t=inf for misses."""
    if rot is None:
        o = origin - center
        d = dirs
    else:
        o = rot.T @ (origin - center)
        d = dirs @ rot
    n = len(dirs)
    tlo = np.empty((3, n))
    thi = np.empty((3, n))
    for ax in range(3):
        da = d[:, ax]
        degenerate = np.abs(da) < 1e-12
        with np.errstate(divide="ignore", invalid="ignore"):
            t1 = (-half[ax] - o[ax]) / da
            t2 = (half[ax] - o[ax]) / da
        lo = np.minimum(t1, t2)
        hi = np.maximum(t1, t2)
        inside = abs(o[ax]) <= half[ax]
        tlo[ax] = np.where(degenerate, np.where(inside, -np.inf, np.inf), lo)
        thi[ax] = np.where(degenerate, np.where(inside, np.inf, -np.inf), hi)
    axis = np.argmax(tlo, axis=0)
    t_enter = tlo[axis, np.arange(n)]
    t_exit = thi.min(axis=0)
    hit = (t_exit >= t_enter) & (t_enter > NEAR)
    t_enter = np.where(hit, t_enter, np.inf)
    sign = np.where(np.take_along_axis(d.T, axis[None, :], axis=0)[0] > 0, 0, 1)
    return t_enter, axis, sign


def trace(scene: Scene, camera: Camera, pixels=None):
    """Cast pixel rays into the scene.

    Returns dict with `depth` (N,), `ids` (N,) int32, `hit` (N, 3) world
    points (far-plane points for misses) and `rgb` (N, 3) flat-shaded color.
    """
    origin = camera.position
    dirs = camera.pixel_rays(pixels)
    n = len(dirs)
    fwd = camera.forward

    depths = [np.full(n, np.inf)]
    rgbs = [np.zeros((n, 3))]
    ids = [np.zeros(n, dtype=np.int32)]

    # table plane z=0, bounded
    dz = dirs[:, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        t_table = np.where(np.abs(dz) > 1e-12, -origin[2] / dz, np.inf)
    pt = origin[None, :] + t_table[:, None] * dirs
    ok = (t_table > NEAR) & (np.abs(pt[:, 0]) <= TABLE_HALF[0]) & (np.abs(pt[:, 1]) <= TABLE_HALF[1])
    t_table = np.where(ok, t_table, np.inf)
    table_shade = shade(float(np.dot(-origin, fwd)))  # table is one face, shaded by its center depth
    depths.append(t_table)
    rgbs.append(np.broadcast_to(np.asarray(TABLE_RGB) * table_shade, (n, 3)))
    ids.append(np.full(n, ID_TABLE, dtype=np.int32))

    def add_box(center, half, rot, base_rgb, surf_id):
        t, axis, sign = _ray_box(origin, dirs, center, half, rot)
        factor = _FACE_FACTOR[axis, sign]
        # depth of each face center for the flat brightness factor
        face_depth = np.empty((3, 2))
        for ax in range(3):
            for s, sgn in enumerate((-1.0, 1.0)):
                local = np.zeros(3)
                local[ax] = sgn * half[ax]
                fc = center + (local if rot is None else rot @ local)
                face_depth[ax, s] = np.dot(fc - origin, fwd)
        col = np.asarray(base_rgb)[None, :] * (factor * shade(face_depth[axis, sign]))[:, None]
        depths.append(t)
        rgbs.append(col)
        ids.append(np.full(n, surf_id, dtype=np.int32))

    for i, obj in enumerate(scene.objects):
        add_box(obj.center, obj.half, None, COLOR_RGB[obj.color], ID_OBJECT_BASE + i)
    for j, (center, half, rot, rgb) in enumerate(scene.gripper_boxes()):
        add_box(center, half, rot, rgb, ID_GRIPPER_BASE + j)

    depth_stack = np.stack(depths)
    winner = np.argmin(depth_stack, axis=0)
    idx = np.arange(n)
    depth = depth_stack[winner, idx]
    miss = ~np.isfinite(depth)
    depth = np.where(miss, FAR_PLANE, depth)
    out_ids = np.stack(ids)[winner, idx]
    out_ids = np.where(miss, ID_BACKGROUND, out_ids)
    rgb = np.stack(rgbs)[winner, idx]
    rgb = np.where(miss[:, None], np.asarray(BACKGROUND_RGB)[None, :], rgb)
    hit = origin[None, :] + depth[:, None] * dirs
    return {"depth": depth, "ids": out_ids, "hit": hit, "rgb": rgb}


def render(scene: Scene, camera: Camera):
    """Render to (rgb HxWx3 in [0,1], depth HxW metric meters), float32."""
    res = trace(scene, camera)
    h, w = camera.height, camera.width
    rgb = np.clip(res["rgb"], 0.0, 1.0).reshape(h, w, 3).astype(np.float32)
    depth = res["depth"].reshape(h, w).astype(np.float32)
    return rgb, depth
