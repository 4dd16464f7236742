"""Auxiliary decoders and the CVAE action head.

The depth decoder is a single shared instance: current-depth and
future-depth predictions both run through it (with different context),
so the parameter census counts one depth decoder. The image decoder is
structurally identical but emits three channels. All decoder stacks use
bidirectional (unmasked) self-attention over [projected context | masked
patch tokens]; only the masked-token outputs are read out.
"""

from __future__ import annotations

import numpy as np

from .. import tensor as T
from ..nn import LayerNorm, Linear, Module, TransformerBlock, sincos_1d, sincos_2d


class PatchDecoder(Module):
    """Context tokens -> (N, H, W, channels) prediction in normalized units."""

    def __init__(self, rng, d, heads, layers, patch, height, width, channels):
        self.patch = patch
        self.gh, self.gw = height // patch, width // patch
        self.n_patches = self.gh * self.gw
        self.channels = channels
        self.height, self.width = height, width
        self.proj = Linear(rng, d, d)
        self.mask_token = T.param(rng.normal(0, 0.02, size=(d,)).astype(T.FLOAT))
        self.pos = T.constant(sincos_2d(d, self.gh, self.gw))
        self.blocks = [TransformerBlock(rng, d, heads) for _ in range(layers)]
        self.ln = LayerNorm(d)
        self.out = Linear(rng, d, patch * patch * channels)
        self.calls = 0  # instrumentation for offloading asserts

    def __call__(self, context):
        self.calls += 1
        n = context.shape[0]
        d = context.shape[-1]
        masked = T.add(T.add(T.constant(np.zeros((n, self.n_patches, d), dtype=context.dtype)),
                             self.mask_token), self.pos)
        x = T.concat([self.proj(context), masked], axis=1)
        for blk in self.blocks:
            x = blk(x)
        x = self.ln(T.slice_axis(x, 1, context.shape[1], context.shape[1] + self.n_patches))
        x = self.out(x)
        p, c = self.patch, self.channels
        x = x.reshape((n, self.gh, self.gw, p, p, c))
        x = x.transpose((0, 1, 3, 2, 4, 5))
        x = x.reshape((n, self.height, self.width, c))
        if c == 1:
            x = x.reshape((n, self.height, self.width))
        return x


class FlowDecoder(Module):
    """Flow-query context + P starting pixels -> (N, L, P, 3) tracks.

    Point tokens are built purely from the start-pixel embedding plus one
    shared mask vector, so permuting the starts permutes the output rows.
    """

    def __init__(self, rng, d, heads, layers, flow_len):
        self.flow_len = flow_len
        self.start_embed = Linear(rng, 2, d)
        self.mask_token = T.param(rng.normal(0, 0.02, size=(d,)).astype(T.FLOAT))
        self.proj = Linear(rng, d, d)
        self.blocks = [TransformerBlock(rng, d, heads) for _ in range(layers)]
        self.ln = LayerNorm(d)
        self.out = Linear(rng, d, flow_len * 3)
        self.calls = 0

    def __call__(self, flowq, starts01):
        self.calls += 1
        n, p = starts01.shape[0], starts01.shape[1]
        ptok = T.add(self.start_embed(starts01), self.mask_token)
        x = T.concat([self.proj(flowq), ptok], axis=1)
        for blk in self.blocks:
            x = blk(x)
        x = self.ln(T.slice_axis(x, 1, flowq.shape[1], flowq.shape[1] + p))
        x = self.out(x)                       # (N, P, L*3)
        x = x.reshape((n, p, self.flow_len, 3))
        return x.transpose((0, 2, 1, 3))      # (N, L, P, 3)


class ActionHead(Module):
    """CVAE over action chunks, conditioned on the action-query state.

    Training: the ground-truth chunk is compressed to a latent (mean,
    logvar); a reparameterized sample plus the action query condition a
    small bidirectional decoder over K positionally-embedded mask tokens,
    each mapped to 7 outputs by an MLP. Inference uses the zero latent.
    """

    def __init__(self, rng, d, heads, layers, chunk, z_dim):
        self.chunk = chunk
        self.z_dim = z_dim
        self.enc1 = Linear(rng, chunk * 7, d)
        self.enc2 = Linear(rng, d, 2 * z_dim)
        self.z_proj = Linear(rng, z_dim, d)
        self.q_proj = Linear(rng, d, d)
        self.mask_token = T.param(rng.normal(0, 0.02, size=(d,)).astype(T.FLOAT))
        self.pos = T.constant(sincos_1d(d, chunk))
        self.blocks = [TransformerBlock(rng, d, heads) for _ in range(layers)]
        self.ln = LayerNorm(d)
        self.out1 = Linear(rng, d, d)
        self.out2 = Linear(rng, d, 7)

    def encode(self, gt_chunk):
        n = gt_chunk.shape[0]
        h = T.gelu(self.enc1(gt_chunk.reshape((n, self.chunk * 7))))
        stats = self.enc2(h)
        mean = T.slice_axis(stats, 1, 0, self.z_dim)
        logvar = T.slice_axis(stats, 1, self.z_dim, 2 * self.z_dim)
        return mean, logvar

    def decode(self, actq, latent):
        if not np.all(np.isfinite(latent.data)):
            raise ValueError("CVAE latent contains NaN/inf")
        n = actq.shape[0]
        d = actq.shape[-1]
        z_tok = self.z_proj(latent).reshape((n, 1, d))
        q_tok = self.q_proj(actq)
        masked = T.add(T.add(T.constant(np.zeros((n, self.chunk, d), dtype=actq.dtype)),
                             self.mask_token), self.pos)
        x = T.concat([z_tok, q_tok, masked], axis=1)
        for blk in self.blocks:
            x = blk(x)
        k0 = 1 + q_tok.shape[1]
        x = self.ln(T.slice_axis(x, 1, k0, k0 + self.chunk))
        return self.out2(T.gelu(self.out1(x)))   # (N, K, 7)

    def reparameterize(self, mean, logvar, rng):
        noise = T.constant(rng.standard_normal(mean.shape).astype(np.float32)
                           if mean.dtype == np.float32 else rng.standard_normal(mean.shape))
        std = T.exp(T.scale(logvar, 0.5))
        return T.add(mean, T.mul(std, noise))
