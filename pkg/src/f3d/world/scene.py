"""Scene state and kinematic dynamics.

Everything is deterministic and value-like: `step` returns a fresh Scene,
so episode replay from the initial scene reproduces observations bitwise.
The grasp model is a kinematic snap-on: closing the gripper within 1 cm of
an object's top face attaches it; released objects drop straight down onto
the table or the highest overlapping support. An open, empty gripper near
a block drags it laterally (magnet contact), which is how the push-family
tasks move things without a physics engine.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .geometry import Camera, look_at, rpy_matrix

FAR_PLANE = 2.0
TABLE_HALF = (0.32, 0.30)
TABLE_RGB = (0.55, 0.53, 0.50)
BACKGROUND_RGB = (0.09, 0.09, 0.11)

# per-step action limits
MAX_XYZ_STEP = 0.02
MAX_RPY_STEP = 0.1
WORKSPACE_LO = np.array([-0.30, -0.28, 0.004])
WORKSPACE_HI = np.array([0.30, 0.28, 0.26])
RPY_LIMIT = 0.5

GRASP_DIST = 0.01        # max distance from tip to a top face when closing
DRAG_RADIUS = 0.03       # lateral magnet-contact radius for open-gripper drags
DRAG_MAX_TIP_Z = 0.08    # drags only engage with the tip near the table

COLOR_RGB = {
    "red": (0.85, 0.10, 0.08),
    "green": (0.10, 0.75, 0.12),
    "blue": (0.10, 0.25, 0.88),
    "yellow": (0.88, 0.82, 0.10),
}
COLOR_NAMES = list(COLOR_RGB)


class ActionError(ValueError):
    """Raised for malformed actions (NaN); the episode is marked failed."""


@dataclass(frozen=True)
class Box:
    center: np.ndarray       # (3,)
    half: np.ndarray         # (3,)
    color: str

    @property
    def top(self):
        return float(self.center[2] + self.half[2])

    @property
    def bottom(self):
        return float(self.center[2] - self.half[2])

    def moved(self, center):
        return Box(center=np.asarray(center, dtype=np.float64), half=self.half, color=self.color)


@dataclass(frozen=True)
class GripperPart:
    offset: np.ndarray       # (3,) in gripper frame, relative to the tip point
    half: np.ndarray
    rgb: tuple


@dataclass(frozen=True)
class Embodiment:
    name: str
    main_camera: Camera
    wrist_cam_offset: np.ndarray   # position of wrist camera in gripper frame
    wrist_fx: float
    parts: tuple                   # GripperPart tuple
    home: np.ndarray               # tip position at episode start

    def wrist_camera(self, pose, height, width):
        rot_g = rpy_matrix(pose[3], pose[4], pose[5])
        pos = pose[:3] + rot_g @ self.wrist_cam_offset
        # looks straight down in the gripper frame
        z_cam = rot_g @ np.array([0.0, 0.0, -1.0])
        x_cam = rot_g @ np.array([1.0, 0.0, 0.0])
        y_cam = np.cross(z_cam, x_cam)
        rot = np.stack([x_cam, y_cam, z_cam], axis=1)
        return Camera(position=pos, rotation=rot, fx=self.wrist_fx, fy=self.wrist_fx,
                      cx=(width - 1) / 2.0, cy=(height - 1) / 2.0, height=height, width=width)


def make_embodiment(name):
    if name == "arm_a":
        return Embodiment(
            name=name,
            main_camera=look_at((0.0, -0.52, 0.42), (0.0, 0.06, 0.0), fx=52.0, height=32, width=32),
            wrist_cam_offset=np.array([0.0, 0.0, 0.12]),
            wrist_fx=22.0,
            parts=(
                GripperPart(np.array([0.0, 0.0, 0.012]), np.array([0.008, 0.008, 0.012]), (0.72, 0.74, 0.82)),
                GripperPart(np.array([0.0, 0.0, 0.052]), np.array([0.013, 0.013, 0.028]), (0.60, 0.62, 0.72)),
            ),
            home=np.array([0.0, -0.02, 0.16]),
        )
    if name == "arm_b":
        return Embodiment(
            name=name,
            main_camera=look_at((0.07, -0.46, 0.52), (0.0, 0.06, 0.0), fx=52.0, height=32, width=32),
            wrist_cam_offset=np.array([0.0, 0.0, 0.13]),
            wrist_fx=20.0,
            parts=(
                GripperPart(np.array([0.0, 0.0, 0.014]), np.array([0.010, 0.010, 0.014]), (0.85, 0.68, 0.40)),
                GripperPart(np.array([0.0, 0.0, 0.062]), np.array([0.016, 0.016, 0.030]), (0.72, 0.55, 0.30)),
            ),
            home=np.array([0.02, -0.04, 0.17]),
        )
    raise KeyError(f"unknown embodiment {name!r}")


EMBODIMENTS = ("arm_a", "arm_b")


@dataclass(frozen=True)
class Scene:
    objects: tuple                # Box tuple
    gripper_pose: np.ndarray      # (6,) tip x,y,z + roll,pitch,yaw
    gripper_closed: bool
    held: int | None              # index into objects
    held_offset: np.ndarray | None
    embodiment: Embodiment

    @property
    def tip(self):
        return self.gripper_pose[:3]

    def proprio(self):
        return np.concatenate([self.gripper_pose, [1.0 if self.gripper_closed else 0.0]]).astype(np.float32)

    def gripper_boxes(self):
        """Gripper parts as (center, half, rotation, rgb) in world frame."""
        rot = rpy_matrix(*self.gripper_pose[3:6])
        out = []
        for part in self.embodiment.parts:
            out.append((self.tip + rot @ part.offset, part.half, rot, part.rgb))
        return out


def _top_face_distance(tip, box):
    dx = max(0.0, abs(tip[0] - box.center[0]) - box.half[0])
    dy = max(0.0, abs(tip[1] - box.center[1]) - box.half[1])
    dz = tip[2] - box.top
    return float(np.sqrt(dx * dx + dy * dy + dz * dz))


def _footprints_overlap(a, b):
    return (abs(a.center[0] - b.center[0]) < a.half[0] + b.half[0]
            and abs(a.center[1] - b.center[1]) < a.half[1] + b.half[1])


def _drop(objects, idx):
    """Settle object `idx` straight down onto the table or the highest
    overlapping support beneath it."""
    obj = objects[idx]
    rest_top = 0.0
    for j, other in enumerate(objects):
        if j != idx and _footprints_overlap(obj, other) and other.top <= obj.bottom + 1e-6:
            rest_top = max(rest_top, other.top)
    center = obj.center.copy()
    center[2] = rest_top + obj.half[2]
    return objects[:idx] + (obj.moved(center),) + objects[idx + 1:]


def step(scene: Scene, action) -> Scene:
    """Apply one 7-float action (dx dy dz droll dpitch dyaw grip-target)."""
    action = np.asarray(action, dtype=np.float64)
    if action.shape != (7,):
        raise ActionError(f"action must have 7 entries, got shape {action.shape}")
    if not np.all(np.isfinite(action)):
        raise ActionError("action contains NaN/inf")

    delta_xyz = np.clip(action[:3], -MAX_XYZ_STEP, MAX_XYZ_STEP)
    delta_rpy = np.clip(action[3:6], -MAX_RPY_STEP, MAX_RPY_STEP)
    grip_target = action[6] >= 0.5

    pose = scene.gripper_pose.copy()
    old_xy = pose[:2].copy()
    pose[:3] = np.clip(pose[:3] + delta_xyz, WORKSPACE_LO, WORKSPACE_HI)
    pose[3:6] = np.clip(pose[3:6] + delta_rpy, -RPY_LIMIT, RPY_LIMIT)
    moved_xy = pose[:2] - old_xy

    objects = scene.objects
    held = scene.held
    held_offset = scene.held_offset
    closed = scene.gripper_closed

    if grip_target and not closed:
        # closing event: try to grasp the nearest object whose top face is in reach
        best, best_d = None, GRASP_DIST
        for i, obj in enumerate(objects):
            d = _top_face_distance(pose[:3], obj)
            if d <= best_d:
                best, best_d = i, d
        closed = True
        if best is not None:
            held = best
            held_offset = objects[best].center - pose[:3]
    elif not grip_target and closed:
        closed = False
        if held is not None:
            objects = _drop(objects, held)
            held = None
            held_offset = None

    if held is not None:
        center = pose[:3] + held_offset
        center[2] = max(center[2], objects[held].half[2])  # no sinking through the table
        objects = objects[:held] + (objects[held].moved(center),) + objects[held + 1:]
    elif not closed and pose[2] <= DRAG_MAX_TIP_Z and np.any(moved_xy != 0.0):
        new_objects = list(objects)
        for i, obj in enumerate(objects):
            lateral = np.hypot(pose[0] - obj.center[0], pose[1] - obj.center[1])
            if lateral <= DRAG_RADIUS + max(obj.half[0], obj.half[1]):
                center = obj.center.copy()
                center[:2] = np.clip(center[:2] + moved_xy,
                                     [-TABLE_HALF[0] + 0.02, -TABLE_HALF[1] + 0.02],
                                     [TABLE_HALF[0] - 0.02, TABLE_HALF[1] - 0.02])
                new_objects[i] = obj.moved(center)
        objects = tuple(new_objects)

    return replace(scene, objects=objects, gripper_pose=pose, gripper_closed=closed,
                   held=held, held_offset=held_offset)
