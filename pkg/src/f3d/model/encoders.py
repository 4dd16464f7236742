"""Trainable language / image / proprioception encoders.

These stand in for the big frozen encoders of full-scale policy stacks:
a learned embedding table for language, a small ViT with a perceiver-style
resampler for images (one shared instance serves both camera views), and
an MLP for proprioception. Depth is never an input anywhere; the model
sees RGB only.
"""

from __future__ import annotations

import numpy as np

from .. import tensor as T
from ..nn import CrossBlock, LayerNorm, Linear, Mlp, Module, TransformerBlock, sincos_2d


class LanguageEncoder(Module):
    def __init__(self, rng, vocab, d):
        self.vocab = vocab
        self.table = T.param(rng.normal(0, 0.02, size=(vocab, d)).astype(T.FLOAT))
        self.proj = Linear(rng, d, d)

    def __call__(self, ids):
        ids = np.asarray(ids)
        if ids.min() < 0 or ids.max() >= self.vocab:
            raise ValueError(f"language id outside vocabulary of {self.vocab}")
        rows = T.take(self.table, ids, axis=0)          # (B, d)
        return self.proj(rows.reshape((len(ids), 1, -1)))  # (B, 1, d)


class ImageEncoder(Module):
    """RGB (N, H, W, 3) -> (N, 1+r, d): CLS token output plus r resampled
    patch summaries."""

    def __init__(self, rng, d, heads, layers, patch, r, height, width):
        if height % patch or width % patch:
            raise ValueError(f"frame {height}x{width} not divisible by patch {patch}")
        self.patch = patch
        self.gh, self.gw = height // patch, width // patch
        self.n_patches = self.gh * self.gw
        self.embed = Linear(rng, patch * patch * 3, d)
        self.pos = T.constant(sincos_2d(d, self.gh, self.gw))
        self.cls = T.param(rng.normal(0, 0.02, size=(d,)).astype(T.FLOAT))
        self.blocks = [TransformerBlock(rng, d, heads) for _ in range(layers)]
        self.ln = LayerNorm(d)
        self.queries = T.param(rng.normal(0, 0.02, size=(r, d)).astype(T.FLOAT))
        self.resampler = CrossBlock(rng, d, heads)

    def patchify(self, images):
        n, h, w, _ = images.shape
        p = self.patch
        x = images.reshape((n, self.gh, p, self.gw, p, 3))
        x = x.transpose((0, 1, 3, 2, 4, 5))
        return x.reshape((n, self.n_patches, p * p * 3))

    def __call__(self, images):
        if images.ndim != 4 or images.shape[-1] != 3:
            raise T.ShapeError(f"expected (N, H, W, 3) images, got {images.shape}")
        n = images.shape[0]
        x = T.add(self.embed(self.patchify(images)), self.pos)
        cls = T.add(T.constant(np.zeros((n, 1, x.shape[-1]), dtype=images.dtype)), self.cls)
        x = T.concat([cls, x], axis=1)
        for blk in self.blocks:
            x = blk(x)
        x = self.ln(x)
        cls_out = T.slice_axis(x, 1, 0, 1)
        patches = T.slice_axis(x, 1, 1, 1 + self.n_patches)
        q = T.add(T.constant(np.zeros((n,) + self.queries.shape, dtype=images.dtype)), self.queries)
        resampled = self.resampler(q, patches)
        return T.concat([cls_out, resampled], axis=1)


class ProprioEncoder(Module):
    def __init__(self, rng, d):
        self.fc1 = Linear(rng, 7, d)
        self.fc2 = Linear(rng, d, d)

    def __call__(self, proprio):
        if not np.all(np.isfinite(proprio.data)):
            raise ValueError("proprio input contains NaN/inf")
        return self.fc2(T.gelu(self.fc1(proprio)))
