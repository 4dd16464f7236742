"""Run configuration: a flat key=value text file plus CLI overrides."""

from __future__ import annotations

import os
from dataclasses import dataclass, fields
from pathlib import Path

from ..model.policy import ModelConfig

DEFAULT_TASKS = "lift_red,stack_red_on_blue,push_left_green,push_right_yellow,push_away_blue,pull_closer_yellow"
DEPTH_WISE_TASKS = ("lift_red", "stack_red_on_blue")


@dataclass
class RunConfig:
    mode: str = "finetune"        # datagen|pretrain|finetune|eval|bench|ablate
    # windows and weighting (paper-stated defaults)
    T: int = 10
    S: int = 3
    K: int = 5
    L: int = 6
    P: int = 64
    alpha: float = 0.01
    beta: float = 0.05
    gamma: float = 0.1
    delta: float = 0.1
    kl_weight: float = 10.0
    # model dims
    d: int = 128
    heads: int = 4
    enc_layers: int = 2
    backbone_layers: int = 4
    dec_layers: int = 2
    mlp_ratio: int = 4
    patch: int = 8
    r: int = 4
    l: int = 4
    z_dim: int = 16
    # training
    steps: int = 1000
    batch: int = 8
    lr: float = 1e-4
    adam_beta1: float = 0.9
    adam_beta2: float = 0.95
    adam_eps: float = 1e-8
    seed: int = 0
    save_every: int = 250
    resume: int = 1
    flow_dims: int = 3            # 2 switches on the 2D-foresight ablation
    val_fraction: float = 0.1
    # data
    tasks: str = DEFAULT_TASKS
    demos_per_task: int = 50
    embodiments: str = "arm_a"
    pretrain_embodiments: str = "arm_a,arm_b"
    pretrain_demos_per_task: int = 100
    dataset: str = ""             # optional .f3de path to read/write
    init_checkpoint: str = ""
    checkpoint: str = ""          # for eval/bench
    # evaluation
    eval_rollouts: int = 10
    eval_chains: int = 20
    chain_length: int = 5
    max_task_steps: int = 48
    # benchmarking
    bench_warmup: int = 10
    bench_iters: int = 100
    # ablation
    ablate_seeds: int = 3
    # misc
    out: str = "runs/out"
    threads: int = 0              # 0 -> F3D_THREADS env or 1

    def model_config(self) -> ModelConfig:
        return ModelConfig(d=self.d, heads=self.heads, enc_layers=self.enc_layers,
                           backbone_layers=self.backbone_layers, dec_layers=self.dec_layers,
                           mlp_ratio=self.mlp_ratio, patch=self.patch, r=self.r, l=self.l,
                           z_dim=self.z_dim, T=self.T, S=self.S, K=self.K, L=self.L, P=self.P)

    def task_list(self):
        return [t.strip() for t in self.tasks.split(",") if t.strip()]

    def embodiment_list(self, pretrain=False):
        src = self.pretrain_embodiments if pretrain else self.embodiments
        return [e.strip() for e in src.split(",") if e.strip()]

    def worker_threads(self):
        if self.threads > 0:
            return self.threads
        return int(os.environ.get("F3D_THREADS", "1"))


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def parse_value(name, raw):
    kind = _FIELD_TYPES[name]
    if kind == "int":
        return int(raw)
    if kind == "float":
        return float(raw)
    return raw


def load_config(path=None, overrides=None) -> RunConfig:
    cfg = RunConfig()
    if path:
        for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, raw = (s.strip() for s in line.split("=", 1))
            if key not in _FIELD_TYPES:
                raise ValueError(f"{path}:{lineno}: unknown config key {key!r}")
            setattr(cfg, key, parse_value(key, raw))
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key not in _FIELD_TYPES:
            raise ValueError(f"unknown config key {key!r}")
        setattr(cfg, key, parse_value(key, str(value)))
    return cfg


def parse_task_id(tid):
    """'lift_red' -> (template, color, support); 'stack_red_on_blue' keeps order."""
    if tid.startswith("stack_"):
        rest = tid[len("stack_"):]
        color, _, support = rest.partition("_on_")
        if not support:
            raise ValueError(f"bad stack task id {tid!r}")
        return "stack", color, support
    for template in ("push_left", "push_right", "push_away", "pull_closer", "lift"):
        if tid.startswith(template + "_"):
            return template, tid[len(template) + 1:], None
    raise ValueError(f"unrecognized task id {tid!r}")
