"""Poses, rotations and pinhole cameras.

Conventions: world z is up; camera frame is x right, y down (image), z
forward; depth is the camera-frame z coordinate, so a plane perpendicular
to the optical axis has constant depth at every pixel. Continuous image
coordinates equal pixel indices (pixel (i, j) center is at (i, j)), which
makes projected track coordinates line up exactly with sampled pixels.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def rpy_matrix(roll, pitch, yaw):
    """Rotation matrix Rz(yaw) @ Ry(pitch) @ Rx(roll)."""
    cr, sr = np.cos(roll), np.sin(roll)
    cp, sp = np.cos(pitch), np.sin(pitch)
    cy, sy = np.cos(yaw), np.sin(yaw)
    rx = np.array([[1, 0, 0], [0, cr, -sr], [0, sr, cr]])
    ry = np.array([[cp, 0, sp], [0, 1, 0], [-sp, 0, cp]])
    rz = np.array([[cy, -sy, 0], [sy, cy, 0], [0, 0, 1]])
    return rz @ ry @ rx


@dataclass
class Camera:
    position: np.ndarray   # (3,) world
    rotation: np.ndarray   # (3,3), columns = camera axes (x right, y down, z forward) in world
    fx: float
    fy: float
    cx: float
    cy: float
    height: int
    width: int

    @property
    def forward(self):
        return self.rotation[:, 2]

    def project(self, points):
        """World points (..., 3) -> (u, v, depth) arrays of shape (..., 3)."""
        p = np.asarray(points, dtype=np.float64)
        rel = p - self.position
        cam = rel @ self.rotation  # p_cam = R^T (p - c)
        z = cam[..., 2]
        u = self.fx * cam[..., 0] / z + self.cx
        v = self.fy * cam[..., 1] / z + self.cy
        return np.stack([u, v, z], axis=-1)

    def pixel_rays(self, pixels=None):
        """World-space ray directions scaled so the ray parameter equals depth.

        pixels: (N, 2) float (x, y) image coords, or None for the full frame
        in row-major order. Returns (N, 3).
        """
        if pixels is None:
            ys, xs = np.meshgrid(np.arange(self.height, dtype=np.float64),
                                 np.arange(self.width, dtype=np.float64), indexing="ij")
            px = np.stack([xs.reshape(-1), ys.reshape(-1)], axis=-1)
        else:
            px = np.asarray(pixels, dtype=np.float64)
        d_cam = np.stack([(px[:, 0] - self.cx) / self.fx,
                          (px[:, 1] - self.cy) / self.fy,
                          np.ones(len(px))], axis=-1)
        return d_cam @ self.rotation.T


def look_at(position, target, fx, height, width, fy=None):
    """Camera at `position` looking toward `target`, world z as up reference."""
    position = np.asarray(position, dtype=np.float64)
    fwd = np.asarray(target, dtype=np.float64) - position
    fwd = fwd / np.linalg.norm(fwd)
    up = np.array([0.0, 0.0, 1.0])
    right = np.cross(fwd, up)
    nr = np.linalg.norm(right)
    if nr < 1e-9:  # looking straight up/down: pick world x as right
        right = np.array([1.0, 0.0, 0.0])
    else:
        right = right / nr
    down = np.cross(fwd, right)
    rot = np.stack([right, down, fwd], axis=1)
    return Camera(position=position, rotation=rot, fx=float(fx), fy=float(fy or fx),
                  cx=(width - 1) / 2.0, cy=(height - 1) / 2.0, height=height, width=width)
