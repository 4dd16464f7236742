"""Train a small policy on two tasks and evaluate it closed-loop.

This is a scaled-down version of what the acceptance suite does with the
full six-task suite; expect a few minutes of CPU time.

Run:  python demos/04_train_and_evaluate.py
"""

import time

from f3d.harness import RunConfig, bench_latency, eval_policy, finetune

cfg = RunConfig(
    # trimmed dims keep this demo fast; paper-stated windows stay put
    d=48, heads=4, enc_layers=1, backbone_layers=2, dec_layers=1, r=2, l=2,
    T=10, S=3, K=5, L=6, P=64,
    tasks="push_left_green,push_away_blue",
    demos_per_task=20,
    steps=250, batch=8, lr=3e-4,
    eval_rollouts=6, eval_chains=4, max_task_steps=48,
    out="runs/demo_train", seed=0, resume=0,
)

t0 = time.time()
ckpt_path, model, _ = finetune(cfg)
print(f"trained {cfg.steps} steps in {time.time() - t0:.0f}s -> {ckpt_path}")

report = eval_policy(model, cfg, seed=7)
print("success rates:", report.per_task)
print(f"chain metric: {report.chain_metric:.2f} / {cfg.chain_length}")
print(f"policy latency: median {report.latency_median_ms:.1f} ms, "
      f"p95 {report.latency_p95_ms:.1f} ms")

bench = bench_latency(model, cfg)
print(f"offloading aux decoders keeps actions bitwise identical: "
      f"{bench['actions_bitwise_identical']}")
print(f"query-token overhead vs a stripped sequence: "
      f"{bench['query_token_overhead_pct']:.1f}% of deployed latency")
