"""Scripted expert: waypoint plans per task template, demo recording.

Plans read the exact scene state (heights, positions), so demos always
close the gripper inside the 1 cm grasp window; a learned policy has to
recover that height from vision. Actions are emitted below the per-step
clamp so recorded deltas replay exactly.
"""

from __future__ import annotations

import numpy as np

from ..episode import Episode
from .render import render
from .scene import ActionError, Scene, step
from .tasks import Task, find_object, make_task, sample_scene

STEP_SIZE = 0.019
MAX_DEMO_STEPS = 72


class DemoError(RuntimeError):
    pass


def plan_waypoints(scene: Scene, task: Task):
    """List of (tip xyz target, grip 0/1) waypoints solving the task."""
    _, obj = find_object(scene, task.color)
    bx, by = obj.center[0], obj.center[1]
    top = obj.top
    if task.template == "lift":
        return [
            (np.array([bx, by, 0.13]), 0.0),
            (np.array([bx, by, top + 0.004]), 0.0),
            (np.array([bx, by, top + 0.004]), 1.0),
            (np.array([bx, by, min(top + 0.119, 0.24)]), 1.0),
        ]
    if task.template == "stack":
        _, sup = find_object(scene, task.support)
        hz = obj.half[2]
        carry = max(0.13, sup.top + 2 * hz + 0.035)
        place = sup.top + 2 * hz + 0.008
        return [
            (np.array([bx, by, 0.13]), 0.0),
            (np.array([bx, by, top + 0.004]), 0.0),
            (np.array([bx, by, top + 0.004]), 1.0),
            (np.array([bx, by, carry]), 1.0),
            (np.array([sup.center[0], sup.center[1], carry]), 1.0),
            (np.array([sup.center[0], sup.center[1], place]), 1.0),
            (np.array([sup.center[0], sup.center[1], place]), 0.0),
            (np.array([sup.center[0], sup.center[1], 0.15]), 0.0),
        ]
    direction = {
        "push_left": np.array([-1.0, 0.0]),
        "push_right": np.array([1.0, 0.0]),
        "push_away": np.array([0.0, 1.0]),
        "pull_closer": np.array([0.0, -1.0]),
    }[task.template]
    dist = 0.095
    goal_xy = np.array([bx, by]) + direction * dist
    return [
        (np.array([bx, by, 0.12]), 0.0),
        (np.array([bx, by, 0.045]), 0.0),
        (np.array([goal_xy[0], goal_xy[1], 0.045]), 0.0),
        (np.array([goal_xy[0], goal_xy[1], 0.13]), 0.0),
    ]


def run_expert(scene: Scene, task: Task, frame_hw=(32, 32)):
    """Execute the waypoint plan, recording observations + scene snapshots.

    Returns (episode, final_scene). Raises DemoError when the plan fails
    (caller resamples the initial scene).
    """
    h, w = frame_hw
    waypoints = plan_waypoints(scene, task)
    frames = {"rgb_main": [], "depth_main": [], "rgb_wrist": [], "depth_wrist": []}
    proprio, actions, states = [], [], []
    grip = 1.0 if scene.gripper_closed else 0.0

    def record(obs_scene, action):
        rm, dm = render(obs_scene, obs_scene.embodiment.main_camera)
        rw, dw = render(obs_scene, obs_scene.embodiment.wrist_camera(obs_scene.gripper_pose, h, w))
        frames["rgb_main"].append(rm)
        frames["depth_main"].append(dm)
        frames["rgb_wrist"].append(rw)
        frames["depth_wrist"].append(dw)
        proprio.append(obs_scene.proprio())
        actions.append(np.asarray(action, dtype=np.float32))
        states.append(obs_scene)

    steps = 0
    for target, target_grip in waypoints:
        while True:
            delta = target - scene.tip
            if np.max(np.abs(delta)) < 5e-4 and target_grip == grip:
                break
            move = np.clip(delta, -STEP_SIZE, STEP_SIZE)
            # record and execute the same float32 action so replay is bitwise
            action = np.array([move[0], move[1], move[2], 0.0, 0.0, 0.0, target_grip],
                              dtype=np.float32)
            record(scene, action)
            scene = step(scene, action)
            grip = target_grip
            steps += 1
            if steps > MAX_DEMO_STEPS:
                raise DemoError(f"expert exceeded {MAX_DEMO_STEPS} steps on {task.tid}")
    # closing frame: hold in place
    hold = np.array([0, 0, 0, 0, 0, 0, grip], dtype=np.float32)
    record(scene, hold)

    if not task.success(scene):
        raise DemoError(f"expert failed {task.tid}")
    episode = Episode(
        language_id=task.language_id,
        rgb_main=np.stack(frames["rgb_main"]),
        depth_main=np.stack(frames["depth_main"]),
        rgb_wrist=np.stack(frames["rgb_wrist"]),
        depth_wrist=np.stack(frames["depth_wrist"]),
        proprio=np.stack(proprio),
        actions=np.stack(actions),
        states=states,
        task_id=task.tid,
    )
    return episode, scene


def expert_demo(template, color, seed, support=None, embodiment="arm_a",
                n_distractors=1, max_retries=8):
    """Deterministic demonstration episode for a task (resamples the scene
    on the rare plan failure, then errors out)."""
    rng = np.random.default_rng(seed)
    last = None
    for _ in range(max_retries):
        scene, task = sample_scene(rng, template, color, support=support,
                                   embodiment=embodiment, n_distractors=n_distractors)
        try:
            episode, _ = run_expert(scene, task)
            return episode
        except DemoError as e:
            last = e
    raise DemoError(f"no solvable scene for {template}/{color} after {max_retries} tries: {last}")
