"""Command line interface.

    f3d datagen|pretrain|finetune|eval|bench|ablate --config <path> [--seed N] [--out DIR]

Config files are flat key=value text; unknown keys error. The F3D_THREADS
environment variable caps worker threads for data generation and
evaluation rollouts.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .. import checkpoint as ckpt
from .ablate import ablate
from .bench import bench_latency, save_bench_csv
from .config import load_config
from .datagen import datagen
from .evaluate import eval_policy
from .train import build_model, finetune, pretrain


def main(argv=None):
    parser = argparse.ArgumentParser(prog="f3d", description=__doc__.strip().splitlines()[0])
    sub = parser.add_subparsers(dest="mode", required=True)
    for mode in ("datagen", "pretrain", "finetune", "eval", "bench", "ablate"):
        p = sub.add_parser(mode)
        p.add_argument("--config", default=None, help="flat key=value config file")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", default=None)
    args = parser.parse_args(argv)

    cfg = load_config(args.config, overrides={"seed": args.seed, "out": args.out,
                                              "mode": args.mode})
    Path(cfg.out).mkdir(parents=True, exist_ok=True)

    if args.mode == "datagen":
        path, count = datagen(cfg)
        print(f"wrote {count} episodes to {path}")
        return 0
    if args.mode == "pretrain":
        path, _, _ = pretrain(cfg)
        print(f"pretrain checkpoint: {path}")
        return 0
    if args.mode == "finetune":
        path, _, _ = finetune(cfg)
        print(f"finetune checkpoint: {path}")
        return 0
    if args.mode == "eval":
        model = _load_model(cfg)
        report = eval_policy(model, cfg)
        out = Path(cfg.out) / "eval_report.csv"
        report.save_csv(out)
        print(f"eval report: {out}")
        return 0
    if args.mode == "bench":
        model = _load_model(cfg)
        result = bench_latency(model, cfg)
        out = Path(cfg.out) / "bench.csv"
        save_bench_csv(result, out)
        print(f"bench report: {out}")
        return 0
    if args.mode == "ablate":
        rows = ablate(cfg)
        print(f"ablation rows: {len(rows)} -> {Path(cfg.out) / 'ablation.csv'}")
        return 0
    raise AssertionError(args.mode)


def _load_model(cfg):
    model = build_model(cfg)
    source = cfg.checkpoint or cfg.init_checkpoint
    if source:
        ckpt.load_model(source, model)
    return model


if __name__ == "__main__":
    sys.exit(main())
