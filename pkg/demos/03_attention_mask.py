"""Visualize the structured causal attention mask and verify its salient
properties: causality, query sinks, and the action query's reach.

Run:  python demos/03_attention_mask.py
"""

from pathlib import Path

import numpy as np

from f3d.model import build_mask, full_layout, pretrain_layout, stripped_layout, write_pgm
from f3d.model.layout import build_layout_mask

OUT = Path("runs/demo_mask")
OUT.mkdir(parents=True, exist_ok=True)

T, r, l = 3, 2, 4
layout = full_layout(T, r, l)
mask = build_mask(T, r, l)
print(f"layout: block of {layout.block_len} tokens x {T} steps = {layout.seq_len} positions")
for name, size in layout.group_sizes():
    lo, hi = layout.group_offset(name)
    print(f"  {name:<10} {size} tokens at block offset [{lo}, {hi})")

write_pgm(OUT / "mask_full.pgm", mask)
write_pgm(OUT / "mask_pretrain.pgm", build_layout_mask(pretrain_layout(T, r, l)))
write_pgm(OUT / "mask_stripped.pgm", build_layout_mask(stripped_layout(T, r, l)))
print(f"wrote PGM visualizations to {OUT}/")

# causality: nothing above the block diagonal
times = np.repeat(np.arange(T), layout.block_len)
assert not mask[times[:, None] < times[None, :]].any()
print("causality: no attention to future timesteps")

# queries are sinks: input tokens never look at future/action queries
futq = np.concatenate([layout.positions("futq_main", t) for t in range(T)])
inputs = np.concatenate([layout.positions(g, t) for g in ("lang", "main", "wrist", "proprio")
                         for t in range(T)])
assert not mask[np.ix_(inputs, futq)].any()
print("future queries are pure sinks (removable at inference)")

# the action query sees flow queries only at its own timestep
actq_row = layout.positions("actq", T - 1)[0]
flow_now = layout.positions("flowq", T - 1)
flow_past = layout.positions("flowq", 0)
print("actq -> current flow query:", bool(mask[actq_row, flow_now].all()),
      "| actq -> past flow query:", bool(mask[actq_row, flow_past].any()))
