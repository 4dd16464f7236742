"""Training, evaluation, benchmarking and ablation harness."""

from .config import DEFAULT_TASKS, DEPTH_WISE_TASKS, RunConfig, load_config, parse_task_id
from .datagen import datagen, generate_corpus, split_corpus
from .train import (ACTION_SCALE, build_model, compute_losses, finetune, pretrain, train,
                    validation_batches, validation_losses)
from .evaluate import EvalReport, decode_action, eval_policy, rollout_task, run_chain
from .bench import bench_latency, save_bench_csv
from .ablate import VARIANTS, ablate, median_by_variant, variant_config

__all__ = [
    "ACTION_SCALE", "DEFAULT_TASKS", "DEPTH_WISE_TASKS", "EvalReport", "RunConfig",
    "VARIANTS", "ablate", "bench_latency", "build_model", "compute_losses", "datagen",
    "decode_action", "eval_policy", "finetune", "generate_corpus", "load_config",
    "median_by_variant", "parse_task_id", "pretrain", "rollout_task", "run_chain",
    "save_bench_csv", "split_corpus", "train", "validation_batches", "validation_losses",
    "variant_config",
]
