"""GPT-style backbone: masked causal self-attention over the assembled
sequence, all positions updated in one pass. A zero-layer backbone is the
identity, which the tests rely on."""

from __future__ import annotations

import numpy as np

from .. import tensor as T
from ..nn import Module, TransformerBlock


class Backbone(Module):
    def __init__(self, rng, d, heads, layers, mlp_ratio=4):
        if d % heads:
            raise ValueError(f"model dim {d} must divide into {heads} heads")
        self.blocks = [TransformerBlock(rng, d, heads, mlp_ratio) for _ in range(layers)]

    def __call__(self, seq, mask):
        if mask is not None and mask.shape != (seq.shape[-2], seq.shape[-2]):
            raise T.ShapeError(f"mask {mask.shape} does not match sequence length {seq.shape[-2]}")
        x = seq
        for i, blk in enumerate(self.blocks):
            x = blk(x, mask)
            if not np.all(np.isfinite(x.data)):
                raise FloatingPointError(f"non-finite values after backbone layer {i}")
        return x
