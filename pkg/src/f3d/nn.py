"""Small neural-net layer zoo on top of the tensor core.

Modules discover their parameters by walking instance attributes in
insertion order, so parameter names (used by checkpoints and Adam state)
are stable across runs.
"""

from __future__ import annotations

import numpy as np

from . import tensor as T
from .tensor import Tensor


class Module:
    def named_params(self, prefix=""):
        out = {}
        for name, value in vars(self).items():
            key = f"{prefix}{name}"
            if isinstance(value, Tensor) and value.node is not None:
                out[key] = value
            elif isinstance(value, Module):
                out.update(value.named_params(f"{key}."))
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        out.update(item.named_params(f"{key}.{i}."))
                    elif isinstance(item, Tensor) and item.node is not None:
                        out[f"{key}.{i}"] = item
        return out

    def params(self):
        return list(self.named_params().values())

    def param_count(self):
        return sum(p.size for p in self.params())

    def cast_(self, dtype):
        """In-place dtype cast of all parameters (float64 shadow mode)."""
        for p in self.params():
            p.data = p.data.astype(dtype)
        return self

    def load_arrays(self, named, prefix="", strict=True):
        """Copy numpy arrays into parameters by name."""
        own = self.named_params()
        for name, p in own.items():
            key = prefix + name
            if key in named:
                arr = np.asarray(named[key], dtype=p.data.dtype)
                if arr.shape != p.data.shape:
                    raise T.ShapeError(f"load: {key} has shape {arr.shape}, expected {p.data.shape}")
                p.data = arr.copy()
            elif strict:
                raise KeyError(f"load: missing parameter {key}")
        return self


def normal_init(rng, shape, std=0.02):
    return rng.normal(0.0, std, size=shape).astype(T.FLOAT)


class Linear(Module):
    def __init__(self, rng, d_in, d_out, bias=True, std=0.02):
        self.w = T.param(normal_init(rng, (d_in, d_out), std))
        self.b = T.param(np.zeros(d_out, dtype=T.FLOAT)) if bias else None

    def __call__(self, x):
        return T.linear(x, self.w, self.b)


class LayerNorm(Module):
    def __init__(self, d, eps=1e-5):
        self.gain = T.param(np.ones(d, dtype=T.FLOAT))
        self.bias = T.param(np.zeros(d, dtype=T.FLOAT))
        self.eps = eps

    def __call__(self, x):
        return T.layernorm(x, self.gain, self.bias, self.eps)


class Mlp(Module):
    def __init__(self, rng, d, hidden):
        self.fc1 = Linear(rng, d, hidden)
        self.fc2 = Linear(rng, hidden, d)

    def __call__(self, x):
        return self.fc2(T.gelu(self.fc1(x)))


class MultiHeadAttention(Module):
    """Multi-head attention over (..., n, d) with an optional visibility mask.

    `context` switches to cross-attention (queries from x, keys/values from
    context). The mask is a boolean (n_q, n_k) array, True = may attend.
    """

    def __init__(self, rng, d, heads):
        if d % heads:
            raise ValueError(f"model dim {d} not divisible by heads {heads}")
        self.heads = heads
        self.dh = d // heads
        self.wq = Linear(rng, d, d)
        self.wk = Linear(rng, d, d)
        self.wv = Linear(rng, d, d)
        self.wo = Linear(rng, d, d)
        self._scale = 1.0 / float(np.sqrt(self.dh))
        self.last_attn = None  # numpy copy of the most recent attention weights

    def _split(self, t, n):
        # (..., n, d) -> (..., heads, n, dh)
        lead = t.shape[:-2]
        t = t.reshape(lead + (n, self.heads, self.dh))
        axes = tuple(range(len(lead))) + (len(lead) + 1, len(lead), len(lead) + 2)
        return t.transpose(axes)

    def __call__(self, x, mask=None, context=None):
        src = x if context is None else context
        nq, nk = x.shape[-2], src.shape[-2]
        q = self._split(self.wq(x), nq)
        k = self._split(self.wk(src), nk)
        v = self._split(self.wv(src), nk)
        scores = T.scale(T.matmul(q, T.transpose(k, tuple(range(k.ndim - 2)) + (k.ndim - 1, k.ndim - 2))), self._scale)
        attn = T.softmax_rows(scores, mask)
        self.last_attn = attn.data
        out = T.matmul(attn, v)
        lead = x.shape[:-2]
        axes = tuple(range(len(lead))) + (len(lead) + 1, len(lead), len(lead) + 2)
        out = out.transpose(axes).reshape(lead + (nq, self.heads * self.dh))
        return self.wo(out)


class TransformerBlock(Module):
    """Pre-norm block: LN -> masked MHA -> residual, LN -> MLP -> residual."""

    def __init__(self, rng, d, heads, mlp_ratio=4):
        self.ln1 = LayerNorm(d)
        self.attn = MultiHeadAttention(rng, d, heads)
        self.ln2 = LayerNorm(d)
        self.mlp = Mlp(rng, d, d * mlp_ratio)

    def __call__(self, x, mask=None):
        x = T.add(x, self.attn(self.ln1(x), mask))
        return T.add(x, self.mlp(self.ln2(x)))


class CrossBlock(Module):
    """Pre-norm cross-attention block (perceiver-style resampling)."""

    def __init__(self, rng, d, heads, mlp_ratio=4):
        self.lnq = LayerNorm(d)
        self.lnc = LayerNorm(d)
        self.attn = MultiHeadAttention(rng, d, heads)
        self.ln2 = LayerNorm(d)
        self.mlp = Mlp(rng, d, d * mlp_ratio)

    def __call__(self, q, context):
        q = T.add(q, self.attn(self.lnq(q), context=self.lnc(context)))
        return T.add(q, self.mlp(self.ln2(q)))


def sincos_2d(d, grid_h, grid_w):
    """2D sin-cos positional table, (grid_h*grid_w, d), rows in row-major order."""
    if d % 4:
        raise ValueError("sincos_2d needs dim divisible by 4")
    half = d // 2

    def table_1d(positions):
        omega = np.arange(half // 2, dtype=np.float64) / (half / 2.0)
        omega = 1.0 / 10000.0 ** omega
        out = np.einsum("m,d->md", positions.astype(np.float64), omega)
        return np.concatenate([np.sin(out), np.cos(out)], axis=1)

    ys, xs = np.meshgrid(np.arange(grid_h), np.arange(grid_w), indexing="ij")
    emb = np.concatenate([table_1d(ys.reshape(-1)), table_1d(xs.reshape(-1))], axis=1)
    return emb.astype(T.FLOAT)


def sincos_1d(d, n):
    """1D sin-cos positional table, (n, d)."""
    if d % 2:
        raise ValueError("sincos_1d needs even dim")
    omega = np.arange(d // 2, dtype=np.float64) / (d / 2.0)
    omega = 1.0 / 10000.0 ** omega
    out = np.einsum("m,d->md", np.arange(n, dtype=np.float64), omega)
    return np.concatenate([np.sin(out), np.cos(out)], axis=1).astype(T.FLOAT)
