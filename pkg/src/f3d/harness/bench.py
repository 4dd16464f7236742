"""Inference latency benchmark: auxiliary-head offloading and the cost of
retaining query tokens in the sequence.

Three measured configurations of one end-to-end control-step inference
(encoders + backbone + action head):
  action_only   deployed path, aux decoders never executed
  with_aux      action path plus every auxiliary decoder
  stripped      token layout without flow/future query groups (latency
                reference for what a no-foresight policy would cost)
"""

from __future__ import annotations

import csv
import time

import numpy as np

from ..data import grid_pixels
from ..world.expert import expert_demo
from .config import RunConfig


def _fixed_inputs(cfg: RunConfig):
    ep = expert_demo("lift", "red", seed=np.random.SeedSequence([cfg.seed, 0xBE]),
                     embodiment=cfg.embodiment_list()[0])
    t = min(len(ep) - 1, cfg.T + 2)
    idx = np.clip(np.arange(t - cfg.T + 1, t + 1), 0, None)
    return {
        "language_id": np.array([ep.language_id]),
        "rgb_main": ep.rgb_main[idx][None],
        "rgb_wrist": ep.rgb_wrist[idx][None],
        "proprio": ep.proprio[idx][None],
        "points": grid_pixels(cfg.P, 32, 32)[None],
    }


def _time(fn, warmup, iters):
    for _ in range(warmup):
        fn()
    samples = []
    for _ in range(iters):
        t0 = time.perf_counter()
        fn()
        samples.append((time.perf_counter() - t0) * 1e3)
    arr = np.array(samples)
    return float(np.median(arr)), float(np.percentile(arr, 95))


def bench_latency(model, cfg: RunConfig, log=print):
    inputs = _fixed_inputs(cfg)

    def action_only():
        return model.predict_actions(inputs, with_aux=False)[0]

    def with_aux():
        return model.predict_actions(inputs, with_aux=True)[0]

    def stripped():
        return model.predict_actions(inputs, with_aux=False, layout_mode="stripped")[0]

    # decoder-execution instrumentation for the offloading claim
    calls_before = (model.depth_dec.calls, model.image_dec.calls, model.flow_dec.calls)
    actions_a = action_only()
    calls_after = (model.depth_dec.calls, model.image_dec.calls, model.flow_dec.calls)
    aux_executed_in_a = calls_after != calls_before
    actions_b = with_aux()
    actions_identical = bool(np.array_equal(actions_a, actions_b))

    med_a, p95_a = _time(action_only, cfg.bench_warmup, cfg.bench_iters)
    med_b, p95_b = _time(with_aux, cfg.bench_warmup, cfg.bench_iters)
    med_c, p95_c = _time(stripped, cfg.bench_warmup, cfg.bench_iters)

    overhead_aux_pct = 100.0 * (med_b - med_a) / med_a
    overhead_queries_pct = 100.0 * (med_a - med_c) / med_a

    result = {
        "action_only_median_ms": med_a, "action_only_p95_ms": p95_a,
        "with_aux_median_ms": med_b, "with_aux_p95_ms": p95_b,
        "stripped_median_ms": med_c, "stripped_p95_ms": p95_c,
        "aux_decoder_overhead_pct": overhead_aux_pct,
        "query_token_overhead_pct": overhead_queries_pct,
        "actions_bitwise_identical": actions_identical,
        "aux_executed_in_action_only": aux_executed_in_a,
    }
    log(f"[bench] action-only {med_a:.2f} ms | with aux {med_b:.2f} ms "
        f"| stripped {med_c:.2f} ms | query overhead {overhead_queries_pct:.1f}%")
    return result


def save_bench_csv(result, path):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["metric", "value"])
        for k, v in result.items():
            w.writerow([k, v])
