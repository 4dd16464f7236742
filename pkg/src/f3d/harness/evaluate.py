"""Closed-loop evaluation: per-task success rates and CALVIN-style chains.

At each control step the policy sees its last T observations (left-padded
at episode start), predicts a K-step chunk, and executes only the first
action before re-predicting. Chains run 5 tasks in one persistent scene,
sampling each next task on the fly from the currently feasible ones and
resetting only the gripper between tasks.
"""

from __future__ import annotations

import csv
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from ..data import grid_pixels
from ..world import scene as world_scene
from ..world.render import render
from ..world.scene import ActionError, step
from ..world.tasks import (COLOR_NAMES, TEMPLATES, feasible, make_task,
                           sample_chain_scene, sample_scene)
from .config import RunConfig, parse_task_id
from .train import ACTION_SCALE


@dataclass
class EvalReport:
    per_task: dict
    chain_metric: float
    chain_counts: list
    latency_median_ms: float
    latency_p95_ms: float
    n_rollouts: int
    n_chains: int

    def rows(self):
        out = [("task", "success_rate")]
        out += [(tid, f"{rate:.4f}") for tid, rate in self.per_task.items()]
        out += [("chain_metric", f"{self.chain_metric:.4f}"),
                ("latency_median_ms", f"{self.latency_median_ms:.3f}"),
                ("latency_p95_ms", f"{self.latency_p95_ms:.3f}")]
        return out

    def save_csv(self, path):
        with open(path, "w", newline="") as f:
            csv.writer(f).writerows(self.rows())


class _History:
    """Rolling window of the policy's observations."""

    def __init__(self, T):
        self.T = T
        self.rgb_main = []
        self.rgb_wrist = []
        self.proprio = []

    def push(self, scene):
        cam_m = scene.embodiment.main_camera
        cam_w = scene.embodiment.wrist_camera(scene.gripper_pose, cam_m.height, cam_m.width)
        rm, _ = render(scene, cam_m)
        rw, _ = render(scene, cam_w)
        self.rgb_main.append(rm)
        self.rgb_wrist.append(rw)
        self.proprio.append(scene.proprio())

    def window(self, arr_list):
        idx = np.clip(np.arange(len(arr_list) - self.T, len(arr_list)), 0, None)
        return np.stack([arr_list[i] for i in idx])[None]

    def inputs(self, language_id, points):
        return {
            "language_id": np.array([language_id]),
            "rgb_main": self.window(self.rgb_main),
            "rgb_wrist": self.window(self.rgb_wrist),
            "proprio": self.window(self.proprio),
            "points": points[None],
        }


def decode_action(chunk_row):
    """Scaled network output -> executable SE(3) action; gripper logit
    thresholded at probability 0.5 (logit 0)."""
    arm = chunk_row[:6] / ACTION_SCALE[:6]
    grip = 1.0 if chunk_row[6] >= 0.0 else 0.0
    return np.concatenate([arm, [grip]]).astype(np.float32)


def rollout_task(model, cfg: RunConfig, scene, task, latencies=None):
    """Run one task to success or step budget. Returns (success, scene, steps)."""
    hist = _History(cfg.T)
    hist.push(scene)
    points = grid_pixels(cfg.P, 32, 32)
    for k in range(cfg.max_task_steps):
        t0 = time.perf_counter()
        chunk, _ = model.predict_actions(hist.inputs(task.language_id, points))
        if latencies is not None:
            latencies.append((time.perf_counter() - t0) * 1e3)
        if not np.all(np.isfinite(chunk)):
            return False, scene, k + 1
        try:
            # execute only the first action of the predicted chunk, re-predict
            scene = step(scene, decode_action(chunk[0, 0]))
        except ActionError:
            return False, scene, k + 1
        hist.push(scene)
        if task.success(scene):
            return True, scene, k + 1
    return False, scene, cfg.max_task_steps


def reset_gripper(scene, home=None):
    """Between chain tasks: open (dropping anything held) and re-home."""
    if scene.gripper_closed:
        release = np.zeros(7, dtype=np.float32)
        scene = step(scene, release)
    pose = scene.gripper_pose.copy()
    pose[:3] = scene.embodiment.home if home is None else home
    pose[3:] = 0.0
    return replace(scene, gripper_pose=pose)


def _sample_chain_task(rng, scene, max_tries=24):
    for _ in range(max_tries):
        template = TEMPLATES[int(rng.integers(len(TEMPLATES)))]
        color = COLOR_NAMES[int(rng.integers(len(COLOR_NAMES)))]
        support = None
        if template == "stack":
            others = [c for c in COLOR_NAMES if c != color]
            support = others[int(rng.integers(len(others)))]
        if feasible(template, color, scene, support):
            return make_task(template, color, scene, support)
    return None


def run_chain(model, cfg: RunConfig, seed, latencies=None):
    """One 5-task chain in a persistent scene; returns tasks completed."""
    rng = np.random.default_rng(seed)
    scene = sample_chain_scene(rng, embodiment=cfg.embodiment_list()[0])
    completed = 0
    for _ in range(cfg.chain_length):
        scene = reset_gripper(scene)
        task = _sample_chain_task(rng, scene)
        if task is None:
            break
        ok, scene, _ = rollout_task(model, cfg, scene, task, latencies=latencies)
        if not ok:
            break
        completed += 1
    return completed


def eval_policy(model, cfg: RunConfig, seed=None, log=print):
    """Full evaluation: per-task rollouts + chains + latency stats."""
    seed = cfg.seed if seed is None else seed
    tasks = cfg.task_list()
    latencies = []
    per_task = {}

    def one_rollout(args):
        ti, tid, k = args
        template, color, support = parse_task_id(tid)
        rng = np.random.default_rng(np.random.SeedSequence([seed, 0xE0, ti, k]))
        scene, task = sample_scene(rng, template, color, support=support,
                                   embodiment=cfg.embodiment_list()[0])
        ok, _, _ = rollout_task(model, cfg, scene, task, latencies=latencies)
        return tid, ok

    jobs = [(ti, tid, k) for ti, tid in enumerate(tasks) for k in range(cfg.eval_rollouts)]
    workers = cfg.worker_threads()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one_rollout, jobs))
    else:
        results = [one_rollout(j) for j in jobs]
    for tid in tasks:
        wins = sum(1 for t, ok in results if t == tid and ok)
        per_task[tid] = wins / max(1, cfg.eval_rollouts)
        log(f"[eval] {tid}: {per_task[tid]:.2f}")

    chain_counts = []
    for c in range(cfg.eval_chains):
        chain_counts.append(run_chain(model, cfg, np.random.SeedSequence([seed, 0xC4, c]),
                                      latencies=latencies))
    chain_metric = float(np.mean(chain_counts)) if chain_counts else 0.0
    log(f"[eval] chain metric: {chain_metric:.3f} over {cfg.eval_chains} chains")

    lat = np.array(latencies) if latencies else np.zeros(1)
    return EvalReport(per_task=per_task, chain_metric=chain_metric, chain_counts=chain_counts,
                      latency_median_ms=float(np.median(lat)),
                      latency_p95_ms=float(np.percentile(lat, 95)),
                      n_rollouts=cfg.eval_rollouts, n_chains=cfg.eval_chains)
