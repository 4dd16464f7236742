"""Demonstration corpus generation (parallel across seeds, deterministic)."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .. import data
from ..world.expert import expert_demo
from .config import RunConfig, parse_task_id


def demo_seed(base_seed, embodiment_idx, task_idx, demo_idx):
    return np.random.SeedSequence([base_seed, embodiment_idx, task_idx, demo_idx])


def generate_corpus(cfg: RunConfig, pretrain=False, demos_per_task=None, base_seed=None):
    """All (embodiment x task x demo index) episodes for the configured suite."""
    tasks = cfg.task_list()
    embodiments = cfg.embodiment_list(pretrain=pretrain)
    per_task = demos_per_task if demos_per_task is not None else (
        cfg.pretrain_demos_per_task if pretrain else cfg.demos_per_task)
    base = cfg.seed if base_seed is None else base_seed

    jobs = []
    for ei, emb in enumerate(embodiments):
        for ti, tid in enumerate(tasks):
            template, color, support = parse_task_id(tid)
            for k in range(per_task):
                jobs.append((emb, template, color, support, demo_seed(base, ei, ti, k)))

    def run(job):
        emb, template, color, support, seed = job
        return expert_demo(template, color, seed=seed, support=support, embodiment=emb)

    workers = cfg.worker_threads()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            episodes = list(pool.map(run, jobs))
    else:
        episodes = [run(j) for j in jobs]
    return episodes


def split_corpus(episodes, val_fraction, seed):
    """Deterministic train/val split (val gets at least one episode)."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0xDA7A]))
    idx = rng.permutation(len(episodes))
    n_val = max(1, int(round(len(episodes) * val_fraction)))
    val = [episodes[i] for i in idx[:n_val]]
    train = [episodes[i] for i in idx[n_val:]]
    return train, val


def datagen(cfg: RunConfig):
    """CLI datagen mode: generate the corpus and write it to disk."""
    episodes = generate_corpus(cfg, pretrain=(cfg.mode == "pretrain"))
    path = cfg.dataset or f"{cfg.out}/dataset.f3de"
    data.write_dataset(path, episodes)
    return path, len(episodes)
