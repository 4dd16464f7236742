"""Training loops for cross-embodiment pretraining and downstream finetuning.

Actions are scaled to roughly unit range for the loss (Adam handles scale
per-parameter, but the auxiliary and action objectives share the backbone,
so their magnitudes need to be commensurate); evaluation unscales before
execution. Gripper stays a logit against a 0/1 BCE target.
"""

from __future__ import annotations

import os
from pathlib import Path

import numpy as np

from .. import checkpoint as ckpt
from .. import data
from .. import objectives as obj
from .. import tensor as T
from ..optim import Adam
from ..model.policy import PolicyModel
from ..tensor import Tape
from .config import RunConfig
from .datagen import generate_corpus, split_corpus

# xyz steps are clipped at 2 cm and rotations at 0.1 rad; scale both to ~1
ACTION_SCALE = np.array([50.0, 50.0, 50.0, 10.0, 10.0, 10.0, 1.0], dtype=np.float32)

PRETRAIN_CSV_COLUMNS = ("step", "depth", "future", "flow", "total")


def build_model(cfg: RunConfig) -> PolicyModel:
    return PolicyModel(cfg.model_config(), seed=cfg.seed)


def loss_weights(cfg: RunConfig) -> obj.LossWeights:
    beta = 0.0 if cfg.flow_dims == 2 else cfg.beta
    return obj.LossWeights(alpha=cfg.alpha, beta=beta, gamma=cfg.gamma,
                           delta=cfg.delta, kl=cfg.kl_weight)


def batch_inputs(batch, pretrain=False):
    return {
        "language_id": batch["language_id"],
        "rgb_main": batch["rgb_main"],
        "rgb_wrist": None if pretrain else batch["rgb_wrist"],
        "proprio": None if pretrain else batch["proprio"],
        "points": batch["points"],
    }


def compute_losses(model, batch, cfg: RunConfig, mode, rng):
    """Forward + all active losses for one batch. Returns (total, report)."""
    weights = loss_weights(cfg)
    pretrain = mode == "pretrain"
    two_d = cfg.flow_dims == 2
    heads = []
    if weights.beta > 0 and not two_d:
        heads.append("depth")
    if weights.gamma > 0:
        heads.append("future")
    if weights.delta > 0:
        heads.append("flow")
    if not pretrain:
        heads.append("action")
    preds = model.forward_train(batch_inputs(batch, pretrain), mode=mode,
                                heads=tuple(heads), gt_actions=_scaled_actions(batch),
                                rng=rng)
    patch = cfg.patch
    parts = {}
    if "depth" in heads:
        d = obj.loss_depth(preds["depth_main"], obj.pixelwise_normalize(batch["depth_main"], patch))
        if not pretrain:
            d = T.add(d, obj.loss_depth(preds["depth_wrist"],
                                        obj.pixelwise_normalize(batch["depth_wrist"], patch)))
        parts["depth"] = d
    if "future" in heads:
        if two_d:
            # 2D foresight: future prediction is RGB only
            f = T.mse(preds["future_rgb_main"],
                      T.constant(obj.pixelwise_normalize(batch["future_rgb_main"], patch),
                                 dtype=preds["future_rgb_main"].dtype))
            if not pretrain:
                f = T.add(f, T.mse(preds["future_rgb_wrist"],
                                   T.constant(obj.pixelwise_normalize(batch["future_rgb_wrist"], patch),
                                              dtype=preds["future_rgb_wrist"].dtype)))
        else:
            f = obj.loss_future(preds["future_rgb_main"], preds["future_depth_main"],
                                obj.pixelwise_normalize(batch["future_rgb_main"], patch),
                                obj.pixelwise_normalize(batch["future_depth_main"], patch))
            if not pretrain:
                f = T.add(f, obj.loss_future(preds["future_rgb_wrist"], preds["future_depth_wrist"],
                                             obj.pixelwise_normalize(batch["future_rgb_wrist"], patch),
                                             obj.pixelwise_normalize(batch["future_depth_wrist"], patch)))
        parts["future"] = f
    if "flow" in heads:
        parts["flow"] = obj.loss_flow(preds["flow"], batch["flow"], cfg.model_config().H,
                                      cfg.model_config().W, dims=cfg.flow_dims)
    if "action" in heads:
        arm, grip = obj.loss_action(preds["actions"], _scaled_actions(batch))
        parts["act_arm"] = arm
        parts["act_gripper"] = grip
        parts["kl"] = T.kl_normal(preds["cvae_mean"], preds["cvae_logvar"])
    return obj.combine(weights, depth=parts.get("depth"), future=parts.get("future"),
                       flow=parts.get("flow"), act_arm=parts.get("act_arm"),
                       act_gripper=parts.get("act_gripper"), kl=parts.get("kl"))


def _scaled_actions(batch):
    return batch["actions"] * ACTION_SCALE


def make_corpus(cfg: RunConfig, mode):
    """In-memory training corpus; reads `cfg.dataset` (with sidecar) when set,
    otherwise regenerates the configured suite deterministically."""
    if cfg.dataset:
        episodes = data.read_dataset(cfg.dataset)
        if not all(ep.tracks_available for ep in episodes):
            raise ValueError("dataset lacks the scene-state sidecar; exact flow targets unavailable")
    else:
        episodes = generate_corpus(cfg, pretrain=(mode == "pretrain"))
    return split_corpus(episodes, cfg.val_fraction, cfg.seed)


def validation_batches(val_eps, cfg: RunConfig, n_batches=4, seed_tag=0x7A1):
    """Fixed, seed-deterministic validation batches (identical across model
    variants trained with the same base seed)."""
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, seed_tag]))
    return [data.draw_batch(val_eps, cfg.batch, T=cfg.T, S=cfg.S, K=cfg.K,
                            L=cfg.L, P=cfg.P, rng=rng) for _ in range(n_batches)]


def validation_losses(model, val_batches_list, cfg: RunConfig, mode="finetune"):
    """Mean component losses over the fixed validation batches (no tape)."""
    pretrain = mode == "pretrain"
    patch = cfg.patch
    sums = {"depth": 0.0, "future": 0.0, "flow": 0.0}
    for batch in val_batches_list:
        preds = model.forward_train(batch_inputs(batch, pretrain), mode=mode,
                                    heads=("depth", "future", "flow"))
        d = obj.loss_depth(preds["depth_main"], obj.pixelwise_normalize(batch["depth_main"], patch))
        f = obj.loss_future(preds["future_rgb_main"], preds["future_depth_main"],
                            obj.pixelwise_normalize(batch["future_rgb_main"], patch),
                            obj.pixelwise_normalize(batch["future_depth_main"], patch))
        if not pretrain:
            d = T.add(d, obj.loss_depth(preds["depth_wrist"],
                                        obj.pixelwise_normalize(batch["depth_wrist"], patch)))
            f = T.add(f, obj.loss_future(preds["future_rgb_wrist"], preds["future_depth_wrist"],
                                         obj.pixelwise_normalize(batch["future_rgb_wrist"], patch),
                                         obj.pixelwise_normalize(batch["future_depth_wrist"], patch)))
        fl = obj.loss_flow(preds["flow"], batch["flow"], cfg.model_config().H,
                           cfg.model_config().W, dims=3)
        sums["depth"] += float(d.data)
        sums["future"] += float(f.data)
        sums["flow"] += float(fl.data)
    n = len(val_batches_list)
    return {k: v / n for k, v in sums.items()}


def train(cfg: RunConfig, mode, episodes=None, log=print):
    """Run pretraining or finetuning; returns (checkpoint path, model, val episodes).

    Resumable: picks up parameters, Adam state and the step counter from
    `out/checkpoint_last.f3dc` when present and cfg.resume is set.
    """
    if mode not in ("pretrain", "finetune"):
        raise ValueError(f"train mode must be pretrain|finetune, got {mode!r}")
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    if episodes is None:
        train_eps, val_eps = make_corpus(cfg, mode)
    else:
        train_eps, val_eps = split_corpus(episodes, cfg.val_fraction, cfg.seed)
    if mode == "finetune" and any(ep.actions is None for ep in train_eps):
        raise ValueError("finetune requires action-labelled episodes")

    model = build_model(cfg)
    if cfg.init_checkpoint:
        ckpt.load_model(cfg.init_checkpoint, model)
    params = model.named_params()
    opt = Adam(params, lr=cfg.lr, beta1=cfg.adam_beta1, beta2=cfg.adam_beta2, eps=cfg.adam_eps)

    ckpt_path = out / "checkpoint_last.f3dc"
    start_step = 0
    if cfg.resume and ckpt_path.exists():
        named = ckpt.load_model(ckpt_path, model)
        opt.load_state_arrays(named)
        if "meta.step" in named:
            start_step = int(named["meta.step"][0])
        log(f"[train] resuming from step {start_step}")

    columns = PRETRAIN_CSV_COLUMNS if mode == "pretrain" else obj.LossReport.CSV_FIELDS
    csv_path = out / "loss.csv"
    loss_csv = obj.LossCsv(csv_path, columns=columns) if start_step == 0 else None
    if loss_csv is None:
        loss_csv = _append_csv(csv_path, columns)

    def save(step):
        extra = opt.state_arrays()
        extra["meta.step"] = np.array([float(step)], dtype=np.float32)
        ckpt.save_model(ckpt_path, model, extra=extra)

    for step in range(start_step, cfg.steps):
        rng_data = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0xDA, step]))
        rng_cvae = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0xCE, step]))
        batch = data.draw_batch(train_eps, cfg.batch, T=cfg.T, S=cfg.S, K=cfg.K,
                                L=cfg.L, P=cfg.P, rng=rng_data)
        opt.zero_grad()
        with Tape() as tape:
            total, report = compute_losses(model, batch, cfg, mode, rng_cvae)
            tape.backward(total, params=params.values())
        opt.step()
        report.step = step
        loss_csv.write(report)
        if (step + 1) % cfg.save_every == 0 and step + 1 < cfg.steps:
            save(step + 1)
        if (step + 1) % max(1, cfg.steps // 5) == 0:
            log(f"[train:{mode}] step {step + 1}/{cfg.steps} total={report.total:.4f}")
    save(cfg.steps)
    loss_csv.close()
    return str(ckpt_path), model, val_eps


class _append_csv:
    def __init__(self, path, columns):
        self.columns = list(columns)
        self._fh = open(path, "a", newline="")
        import csv as _csv
        self._writer = _csv.writer(self._fh)

    def write(self, report):
        self._writer.writerow(report.row(self.columns))

    def close(self):
        self._fh.flush()
        self._fh.close()


def pretrain(cfg: RunConfig, episodes=None, log=print):
    return train(cfg, "pretrain", episodes=episodes, log=log)


def finetune(cfg: RunConfig, episodes=None, log=print):
    return train(cfg, "finetune", episodes=episodes, log=log)
