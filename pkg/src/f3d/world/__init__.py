"""Deterministic synthetic 3D environment and its exact oracles."""

from .geometry import Camera, look_at, rpy_matrix
from .scene import (ActionError, Box, COLOR_NAMES, COLOR_RGB, EMBODIMENTS, Embodiment,
                    FAR_PLANE, Scene, make_embodiment, step)
from .render import render, trace, shade
from .tasks import (DEPTH_WISE_TEMPLATES, LANGUAGE_TABLE, TEMPLATES, Task, VOCAB_SIZE,
                    feasible, language_id, make_task, phrase, sample_chain_scene, sample_scene)
from .expert import DemoError, expert_demo, plan_waypoints, run_expert
from .tracks import classify_moving, moving_pixel_mask, surface_motion, track_points

__all__ = [
    "ActionError", "Box", "COLOR_NAMES", "COLOR_RGB", "Camera", "DEPTH_WISE_TEMPLATES",
    "DemoError", "EMBODIMENTS", "Embodiment", "FAR_PLANE", "LANGUAGE_TABLE", "Scene",
    "TEMPLATES", "Task", "VOCAB_SIZE", "classify_moving", "expert_demo", "feasible",
    "language_id", "look_at", "make_embodiment", "make_task", "moving_pixel_mask",
    "phrase", "plan_waypoints", "render", "rpy_matrix", "run_expert", "sample_chain_scene",
    "sample_scene", "shade", "step", "surface_motion", "trace", "track_points",
]
