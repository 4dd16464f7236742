"""Leave-one-objective-out ablation over seeds.

Trains the full model plus three variants that each drop one auxiliary
objective, then reports the remaining objectives' validation losses (on
batches shared across variants) and the chain metric.
"""

from __future__ import annotations

import csv
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import RunConfig
from .datagen import generate_corpus
from .evaluate import eval_policy
from .train import finetune, validation_batches, validation_losses
from ..data import batch_samples

VARIANTS = ("full", "wo_depth", "wo_future", "wo_flow")


def variant_config(cfg: RunConfig, variant):
    if variant == "full":
        return cfg
    if variant == "wo_depth":
        return replace(cfg, beta=0.0)
    if variant == "wo_future":
        return replace(cfg, gamma=0.0)
    if variant == "wo_flow":
        return replace(cfg, delta=0.0)
    raise KeyError(variant)


def ablate(cfg: RunConfig, log=print):
    """Returns rows of dicts: variant, seed, val_depth, val_future, val_flow,
    chain_metric (NaN-free; removed objectives still get their val loss so
    the cross-effect is visible)."""
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for s in range(cfg.ablate_seeds):
        seed = cfg.seed + 101 * s
        seed_cfg = replace(cfg, seed=seed)
        episodes = generate_corpus(seed_cfg, pretrain=False)
        for variant in VARIANTS:
            vcfg = replace(variant_config(seed_cfg, variant),
                           out=str(out / f"{variant}_s{seed}"))
            log(f"[ablate] training {variant} seed {seed}")
            _, model, val_eps = finetune(vcfg, episodes=episodes, log=log)
            vb = validation_batches(val_eps, vcfg)
            losses = validation_losses(model, vb, vcfg)
            chain = float("nan")
            if cfg.eval_chains > 0:
                report = eval_policy(model, vcfg, seed=seed, log=lambda *a, **k: None)
                chain = report.chain_metric
            rows.append({"variant": variant, "seed": seed,
                         "val_depth": losses["depth"], "val_future": losses["future"],
                         "val_flow": losses["flow"], "chain_metric": chain})
            log(f"[ablate] {variant} seed {seed}: depth={losses['depth']:.4f} "
                f"future={losses['future']:.4f} flow={losses['flow']:.6f} chain={chain}")
    _write_rows(out / "ablation.csv", rows)
    return rows


def _write_rows(path, rows):
    if not rows:
        return
    with open(path, "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=list(rows[0].keys()))
        w.writeheader()
        w.writerows(rows)


def median_by_variant(rows, key):
    out = {}
    for variant in VARIANTS:
        vals = [r[key] for r in rows if r["variant"] == variant]
        out[variant] = float(np.median(vals)) if vals else float("nan")
    return out
